"""Bullet-comment generation.

Situational comments come from game-state triggers matched against the
template bank.  Highlight comments fire on detector onsets and mix a
template with a word from the positive-emotion lexicon.

Bank file format (UTF-8, LF, one record per line, tab separated)::

    # comment
    player      1   Ryu
    lexicon     amazing
    situational BigDamage   «ACTOR» lands a huge «MOVE»!
    highlight   HighlightOnset  «EMO»!!!
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ConfigError, EmptyLexicon, MissingTrigger, ParseError, UnresolvableSlot
from .state import ActionClass, GameFrame, MatchConfig


class Trigger(enum.IntEnum):
    ROUND_START = 0
    BIG_DAMAGE = 1
    CLOSE_COMBAT = 2
    SPECIAL_MOVE = 3
    SUPER_MOVE = 4
    LOW_HEALTH = 5
    ROUND_END = 6
    HIGHLIGHT_ONSET = 7

    @property
    def key(self) -> str:
        return "".join(part.capitalize() for part in self.name.split("_"))

    @classmethod
    def from_key(cls, key: str) -> Trigger:
        for t in cls:
            if t.key == key:
                return t
        raise ValueError(f"unknown trigger {key!r}")


SITUATIONAL = "situational"
HIGHLIGHT = "highlight"
SLOTS = frozenset({"P1", "P2", "ACTOR", "MOVE", "EMO"})
SLOT_RE = re.compile(r"«([^«»]*)»")
# Anything that still looks like a slot after filling.
RAW_SLOT_RE = re.compile(r"«[A-Z0-9_]+»")


@dataclass(frozen=True, slots=True)
class Template:
    trigger: Trigger
    text: str
    kind: str = SITUATIONAL

    @property
    def slots(self) -> frozenset[str]:
        return frozenset(SLOT_RE.findall(self.text))


@dataclass(frozen=True, slots=True)
class CommentBank:
    templates: tuple[Template, ...]
    emotions: tuple[str, ...]
    player_names: tuple[str, str] = ("P1", "P2")

    def for_trigger(self, trigger: Trigger) -> list[Template]:
        return [t for t in self.templates if t.trigger == trigger]


@dataclass(frozen=True, slots=True)
class TriggerParams:
    big_damage: float = 0.15
    close_combat: float = 0.1
    low_health: float = 0.2
    cooldown: int = 300
    duplicate_window: int = 600
    lanes: int = 4

    def __post_init__(self) -> None:
        for name in ("big_damage", "close_combat", "low_health"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ConfigError(f"trigger.{name} must be in (0, 1]")
        if self.cooldown < 0 or self.duplicate_window < 0:
            raise ConfigError("cooldown and duplicate window must be >= 0")
        if self.lanes < 1:
            raise ConfigError("need at least one display lane")


@dataclass(frozen=True, slots=True)
class CommentEvent:
    t_ms: int
    k: int
    kind: str
    text: str
    score: float
    lane: int
    trigger: Trigger = Trigger.HIGHLIGHT_ONSET
    round_id: int = 1


class Fired(NamedTuple):
    trigger: Trigger
    actor: int | None  # 1 or 2 when the trigger has a protagonist


# ---------------------------------------------------------------- bank files


def _check_text(text: str, lineno: int, col: int, what: str, name: str | None) -> None:
    for ch in ("«", "»"):
        pos = text.find(ch)
        if pos >= 0:
            raise ParseError(f"{what} may not contain {ch!r}", lineno, col + pos, name)


def load_bank(source: str | bytes, name: str | None = None) -> CommentBank:
    """Parse bank file content.  Duplicate templates and words are dropped."""
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            line = source.count(b"\n", 0, exc.start) + 1
            col = exc.start - (source.rfind(b"\n", 0, exc.start) + 1) + 1
            raise ParseError("invalid UTF-8", line, col, name) from None
    templates: dict[Template, None] = {}
    emotions: dict[str, None] = {}
    players: dict[int, str] = {}
    lines = source.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        cr = line.find("\r")
        if cr >= 0:
            raise ParseError("carriage return in record (files must use LF)", lineno, cr + 1, name)
        fields = line.split("\t")
        cols = [1]
        for f in fields[:-1]:
            cols.append(cols[-1] + len(f) + 1)
        tag = fields[0]
        if tag == "lexicon":
            if len(fields) != 2 or not fields[1]:
                raise ParseError("lexicon record needs exactly one non-empty word", lineno, len(line) + 1, name)
            _check_text(fields[1], lineno, cols[1], "lexicon word", name)
            emotions[fields[1]] = None
        elif tag == "player":
            if len(fields) != 3 or not fields[2]:
                raise ParseError("player record needs: player <TAB> 1|2 <TAB> name", lineno, len(line) + 1, name)
            if fields[1] not in ("1", "2"):
                raise ParseError(f"player number must be 1 or 2, got {fields[1]!r}", lineno, cols[1], name)
            which = int(fields[1])
            if which in players:
                raise ParseError(f"player {which} named twice", lineno, 1, name)
            _check_text(fields[2], lineno, cols[2], "player name", name)
            players[which] = fields[2]
        elif tag in (SITUATIONAL, HIGHLIGHT):
            if len(fields) != 3:
                raise ParseError("template record needs: kind <TAB> trigger <TAB> text", lineno, len(line) + 1, name)
            try:
                trigger = Trigger.from_key(fields[1])
            except ValueError:
                raise ParseError(f"unknown trigger {fields[1]!r}", lineno, cols[1], name) from None
            if (trigger == Trigger.HIGHLIGHT_ONSET) != (tag == HIGHLIGHT):
                raise ParseError(
                    f"{tag} template cannot use trigger {fields[1]}", lineno, cols[1], name
                )
            text = fields[2]
            if not text:
                raise ParseError("empty template text", lineno, cols[2], name)
            for m in SLOT_RE.finditer(text):
                slot = m.group(1)
                if slot not in SLOTS:
                    raise ParseError(f"unknown slot «{slot}»", lineno, cols[2] + m.start(), name)
                if slot == "EMO" and tag != HIGHLIGHT:
                    raise ParseError("«EMO» is only allowed in highlight templates", lineno, cols[2] + m.start(), name)
                if slot in ("ACTOR", "MOVE") and tag == HIGHLIGHT:
                    raise ParseError(f"«{slot}» has no value in highlight templates", lineno, cols[2] + m.start(), name)
            covered = {i for m in SLOT_RE.finditer(text) for i in range(m.start(), m.end())}
            for i, ch in enumerate(text):
                if ch in "«»" and i not in covered:
                    raise ParseError(f"unbalanced slot marker {ch!r}", lineno, cols[2] + i, name)
            templates[Template(trigger, text, tag)] = None
        else:
            raise ParseError(f"unknown record type {tag!r}", lineno, 1, name)
    present = {t.trigger for t in templates}
    missing = [t.key for t in Trigger if t not in present]
    if missing:
        raise MissingTrigger(missing)
    if not emotions:
        raise EmptyLexicon()
    return CommentBank(
        tuple(templates), tuple(emotions), (players.get(1, "P1"), players.get(2, "P2"))
    )


def read_bank(path: str | Path) -> CommentBank:
    path = Path(path)
    return load_bank(path.read_bytes(), name=str(path))


def dump_bank(bank: CommentBank) -> str:
    """Canonical text form; ``load_bank(dump_bank(b)) == b``."""
    out = [f"player\t1\t{bank.player_names[0]}", f"player\t2\t{bank.player_names[1]}"]
    out += [f"lexicon\t{w}" for w in bank.emotions]
    out += [f"{t.kind}\t{t.trigger.key}\t{t.text}" for t in bank.templates]
    return "\n".join(out) + "\n"


def write_bank(bank: CommentBank, path: str | Path) -> None:
    Path(path).write_bytes(dump_bank(bank).encode("utf-8"))


def default_bank() -> CommentBank:
    return read_bank(Path(__file__).with_name("data") / "default.bank")


# ---------------------------------------------------------------- matching


def match_triggers(
    frame: GameFrame,
    prev: GameFrame | None,
    cfg: MatchConfig,
    params: TriggerParams | None = None,
) -> list[Fired]:
    """Triggers whose predicate holds on ``frame`` given the previous frame.

    The first frame of a round only ever fires ``RoundStart``.  Apart from
    ``RoundEnd`` every predicate is edge-triggered, i.e. it needs a change
    since ``prev``.
    """
    if frame.k == 1 or prev is None:
        return [Fired(Trigger.ROUND_START, None)]
    params = params or TriggerParams()
    max_hp = cfg.max_hp
    fired: list[Fired] = []
    players = ((frame.p1, prev.p1), (frame.p2, prev.p2))
    for p, (me, _) in enumerate(players, 1):
        opp, opp_prev = players[2 - p]
        if (opp_prev.hp - opp.hp) / max_hp >= params.big_damage:
            fired.append(Fired(Trigger.BIG_DAMAGE, p))
    near = 1 - params.close_combat
    d_now = 1 - abs(frame.p1.x - frame.p2.x) / cfg.stage_width
    d_prev = 1 - abs(prev.p1.x - prev.p2.x) / cfg.stage_width
    if d_now >= near > d_prev:
        fired.append(Fired(Trigger.CLOSE_COMBAT, None))
    for trigger, cls in ((Trigger.SPECIAL_MOVE, ActionClass.SPECIAL_ATTACK), (Trigger.SUPER_MOVE, ActionClass.SUPER_ATTACK)):
        for p, (me, me_prev) in enumerate(players, 1):
            if me.action == cls and me_prev.action != cls:
                fired.append(Fired(trigger, p))
    for p, (me, me_prev) in enumerate(players, 1):
        if me.hp / max_hp < params.low_health <= me_prev.hp / max_hp:
            fired.append(Fired(Trigger.LOW_HEALTH, p))
    ko = [me.hp == 0 and me_prev.hp > 0 for me, me_prev in players]
    if any(ko):
        down = [me.hp == 0 for me, _ in players]
        winner = None if all(down) else (2 if down[0] else 1)
        fired.append(Fired(Trigger.ROUND_END, winner))
    return fired


# ---------------------------------------------------------------- filling


def fill_template(
    template: Template,
    bank: CommentBank,
    rng: np.random.Generator,
    actor: int | None = None,
    move: str | None = None,
) -> str:
    """Substitute every slot.  One lexicon draw per call serves all «EMO»s."""
    needed = template.slots
    values = {"P1": bank.player_names[0], "P2": bank.player_names[1]}
    if "ACTOR" in needed:
        if actor not in (1, 2):
            raise UnresolvableSlot("ACTOR", template.text)
        values["ACTOR"] = bank.player_names[actor - 1]
    if "MOVE" in needed:
        if not move:
            raise UnresolvableSlot("MOVE", template.text)
        values["MOVE"] = move
    if "EMO" in needed:
        values["EMO"] = bank.emotions[int(rng.integers(len(bank.emotions)))]
    return SLOT_RE.sub(lambda m: values[m.group(1)], template.text)


def _resolvable(template: Template, actor: int | None, move: str | None) -> bool:
    slots = template.slots
    if "ACTOR" in slots and actor is None:
        return False
    if "MOVE" in slots and not move:
        return False
    return True


@dataclass
class CommentMetrics:
    emitted: int = 0
    suppressed_cooldown: int = 0
    suppressed_duplicate: int = 0
    suppressed_unresolvable: int = 0
    forced_duplicate: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(vars(self))


class CommentEngine:
    """Stateful generator: per-trigger cooldown, duplicate filter, lanes.

    State (random stream, limiter, lanes) restarts at each round so rounds
    are independent; the random stream of round ``r`` is seeded from
    ``(seed, r)``.
    """

    REDRAWS = 8

    def __init__(
        self,
        bank: CommentBank,
        params: TriggerParams | None = None,
        seed: int = 0,
        move_names: str = "class",
    ) -> None:
        if move_names not in ("class", "raw"):
            raise ConfigError("move_names must be 'class' or 'raw'")
        self.bank = bank
        self.params = params or TriggerParams()
        self.seed = seed
        self.move_names = move_names
        self.metrics = CommentMetrics()
        self._by_trigger = {t: bank.for_trigger(t) for t in Trigger}
        self.reset_round(1)

    def reset_round(self, round_id: int) -> None:
        self.round_id = round_id
        self.rng = np.random.default_rng([self.seed, round_id])
        self._last_fire: dict[Trigger, int] = {}
        self._recent: deque[tuple[int, str]] = deque()
        self._lane = 0

    def _move(self, frame: GameFrame, actor: int | None) -> str | None:
        if actor is None:
            return None
        p = frame.player(actor)
        return p.action_raw if self.move_names == "raw" else p.action.display_name

    def _is_recent(self, text: str) -> bool:
        return any(t == text for _, t in self._recent)

    def _compose(self, trigger: Trigger, frame: GameFrame, actor: int | None, force: bool) -> str | None:
        move = self._move(frame, actor)
        cands = [t for t in self._by_trigger[trigger] if _resolvable(t, actor, move)]
        if not cands:
            self.metrics.suppressed_unresolvable += 1
            return None
        rng = self.rng
        text = ""
        for _ in range(self.REDRAWS):
            t = cands[int(rng.integers(len(cands)))]
            text = fill_template(t, self.bank, rng, actor, move)
            if not self._is_recent(text):
                return text
        # Every quick draw collided: choose among all fresh fillings instead.
        fresh: list[str] = []
        names = self.bank.player_names
        for t in cands:
            base = {"P1": names[0], "P2": names[1], "ACTOR": names[actor - 1] if actor else "", "MOVE": move or ""}
            words = self.bank.emotions if "EMO" in t.slots else ("",)
            for w in words:
                filled = SLOT_RE.sub(lambda m: w if m.group(1) == "EMO" else base[m.group(1)], t.text)
                if filled not in fresh and not self._is_recent(filled):
                    fresh.append(filled)
        if fresh:
            return fresh[int(rng.integers(len(fresh)))]
        if force:
            self.metrics.forced_duplicate += 1
            return text
        self.metrics.suppressed_duplicate += 1
        return None

    def _emit(self, out, frame, trigger, kind, text, score, t_ms) -> None:
        k = frame.k
        self._recent.append((k, text))
        out.append(CommentEvent(t_ms, k, kind, text, score, self._lane, trigger, frame.round_id))
        self._lane = (self._lane + 1) % self.params.lanes
        self.metrics.emitted += 1

    def generate(
        self,
        frame: GameFrame,
        fired: Iterable[Fired],
        onset: object | None = None,
        score: float = 0.0,
        t_ms: int = 0,
    ) -> list[CommentEvent]:
        """Comments for one frame: situational ones in trigger order, then
        exactly one highlight comment if ``onset`` is given."""
        k = frame.k
        window = self.params.duplicate_window
        recent = self._recent
        while recent and k - recent[0][0] >= window:
            recent.popleft()
        out: list[CommentEvent] = []
        cooldown = self.params.cooldown
        for trigger, actor in fired:
            last = self._last_fire.get(trigger)
            if last is not None and k - last < cooldown:
                self.metrics.suppressed_cooldown += 1
                continue
            self._last_fire[trigger] = k
            text = self._compose(trigger, frame, actor, force=False)
            if text is not None:
                self._emit(out, frame, trigger, SITUATIONAL, text, score, t_ms)
        if onset is not None:
            text = self._compose(Trigger.HIGHLIGHT_ONSET, frame, None, force=True)
            self._emit(out, frame, Trigger.HIGHLIGHT_ONSET, HIGHLIGHT, text, score, t_ms)
        return out
