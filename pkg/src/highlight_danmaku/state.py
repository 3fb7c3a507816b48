"""Canonical match-state types.

Two representations exist side by side: ``GameFrame`` objects for the
per-frame (live) path and ``RoundArrays`` columns for the batch path.  They
convert losslessly into one another.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import ConfigError, OutOfRange, SequenceGap

log = logging.getLogger(__name__)


class ActionClass(enum.IntEnum):
    IDLE = 0
    MOVE = 1
    GUARD = 2
    NORMAL_ATTACK = 3
    SPECIAL_ATTACK = 4
    SUPER_ATTACK = 5

    @property
    def key(self) -> str:
        """Config/file spelling, e.g. ``SpecialAttack``."""
        return _KEYS[self]

    @property
    def display_name(self) -> str:
        return _DISPLAY[self]

    @classmethod
    def from_key(cls, key: str) -> ActionClass:
        try:
            return _BY_KEY[key]
        except KeyError:
            raise ValueError(f"unknown action class {key!r}") from None


_KEYS = {
    ActionClass.IDLE: "Idle",
    ActionClass.MOVE: "Move",
    ActionClass.GUARD: "Guard",
    ActionClass.NORMAL_ATTACK: "NormalAttack",
    ActionClass.SPECIAL_ATTACK: "SpecialAttack",
    ActionClass.SUPER_ATTACK: "SuperAttack",
}
_BY_KEY = {v: k for k, v in _KEYS.items()}
_DISPLAY = {
    ActionClass.IDLE: "idle stance",
    ActionClass.MOVE: "footsies",
    ActionClass.GUARD: "guard",
    ActionClass.NORMAL_ATTACK: "normal attack",
    ActionClass.SPECIAL_ATTACK: "special move",
    ActionClass.SUPER_ATTACK: "super art",
}

# Raw ids written by the simulator (FightingICE-style names).
DEFAULT_RAW_ACTIONS: dict[str, ActionClass] = {
    "STAND": ActionClass.IDLE,
    "CROUCH": ActionClass.IDLE,
    "FORWARD_WALK": ActionClass.MOVE,
    "BACK_STEP": ActionClass.MOVE,
    "DASH": ActionClass.MOVE,
    "STAND_GUARD": ActionClass.GUARD,
    "CROUCH_GUARD": ActionClass.GUARD,
    "STAND_A": ActionClass.NORMAL_ATTACK,
    "STAND_B": ActionClass.NORMAL_ATTACK,
    "CROUCH_FB": ActionClass.NORMAL_ATTACK,
    "STAND_D_DF_FA": ActionClass.SPECIAL_ATTACK,
    "STAND_D_DB_BB": ActionClass.SPECIAL_ATTACK,
    "STAND_D_DF_FC": ActionClass.SUPER_ATTACK,
}


class ActionMap:
    """Maps raw action identifiers onto the six action classes.

    Class keys themselves (``"Guard"``, ``"SuperAttack"``...) always map to
    their class.  Unknown ids fall back to ``IDLE`` and are logged once.
    """

    def __init__(self, table: Mapping[str, ActionClass] | None = None) -> None:
        self._table: dict[str, ActionClass] = dict(_BY_KEY)
        self._table.update(DEFAULT_RAW_ACTIONS if table is None else table)
        self._warned: set[str] = set()

    def __call__(self, raw: str) -> ActionClass:
        cls = self._table.get(raw)
        if cls is None:
            if raw not in self._warned:
                self._warned.add(raw)
                log.warning("unmapped action id %r treated as Idle", raw)
            return ActionClass.IDLE
        return cls

    def items(self) -> list[tuple[str, ActionClass]]:
        return sorted(self._table.items())


@dataclass(frozen=True, slots=True)
class MatchConfig:
    max_hp: int = 400
    stage_width: int = 960
    fps: int = 60

    def __post_init__(self) -> None:
        for name in ("max_hp", "stage_width", "fps"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise ConfigError(f"MatchConfig.{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True, slots=True)
class PlayerState:
    hp: int
    x: int
    action: ActionClass
    action_raw: str = ""

    def __post_init__(self) -> None:
        if not self.action_raw:
            object.__setattr__(self, "action_raw", self.action.key)


@dataclass(frozen=True, slots=True)
class GameFrame:
    k: int
    round_id: int
    p1: PlayerState
    p2: PlayerState

    def player(self, which: int) -> PlayerState:
        return self.p1 if which == 1 else self.p2

    def swapped(self) -> GameFrame:
        return GameFrame(self.k, self.round_id, self.p2, self.p1)


def validate_frame(frame: GameFrame, cfg: MatchConfig, prev_k: int | None = None) -> GameFrame:
    """Return ``frame`` unchanged if it is in sequence and within bounds.

    ``prev_k`` is the previous frame index of the same round, or ``None`` at
    the start of a round (the frame must then be ``k == 1``).
    """
    expected = 1 if prev_k is None else prev_k + 1
    if frame.k != expected:
        raise SequenceGap(frame.k, prev_k)
    if frame.round_id < 1:
        raise OutOfRange("round_id", frame.round_id, 1, 2**31 - 1)
    for name, p in (("p1", frame.p1), ("p2", frame.p2)):
        if not 0 <= p.hp <= cfg.max_hp:
            raise OutOfRange(f"{name}.hp", p.hp, 0, cfg.max_hp)
        if not 0 <= p.x <= cfg.stage_width:
            raise OutOfRange(f"{name}.x", p.x, 0, cfg.stage_width)
    return frame


@dataclass(slots=True)
class RoundArrays:
    """One round in columnar form; row ``j`` holds frame ``k = j + 1``.

    ``hp``, ``x``, ``action`` and ``raw`` have shape ``(N, 2)`` with column 0
    for player one.  ``raw`` indexes into ``vocab``.
    """

    round_id: int
    hp: np.ndarray
    x: np.ndarray
    action: np.ndarray
    raw: np.ndarray
    vocab: tuple[str, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return self.hp.shape[0]

    def frames(self) -> Iterator[GameFrame]:
        hp = self.hp.tolist()
        xs = self.x.tolist()
        act = self.action.tolist()
        raw = self.raw.tolist()
        vocab = self.vocab
        classes = list(ActionClass)
        for j in range(len(hp)):
            h, x, a, r = hp[j], xs[j], act[j], raw[j]
            yield GameFrame(
                j + 1,
                self.round_id,
                PlayerState(h[0], x[0], classes[a[0]], vocab[r[0]]),
                PlayerState(h[1], x[1], classes[a[1]], vocab[r[1]]),
            )

    @classmethod
    def from_frames(cls, frames: Iterable[GameFrame], round_id: int | None = None) -> RoundArrays:
        frames = list(frames)
        vocab: dict[str, int] = {}
        hp, xs, act, raw = [], [], [], []
        for f in frames:
            hp.append((f.p1.hp, f.p2.hp))
            xs.append((f.p1.x, f.p2.x))
            act.append((int(f.p1.action), int(f.p2.action)))
            raw.append(tuple(vocab.setdefault(p.action_raw, len(vocab)) for p in (f.p1, f.p2)))
        if round_id is None:
            round_id = frames[0].round_id if frames else 1
        shape = (len(frames), 2)
        return cls(
            round_id=round_id,
            hp=np.array(hp, dtype=np.int64).reshape(shape),
            x=np.array(xs, dtype=np.int64).reshape(shape),
            action=np.array(act, dtype=np.int64).reshape(shape),
            raw=np.array(raw, dtype=np.int64).reshape(shape),
            vocab=tuple(vocab),
        )

    def validate(self, cfg: MatchConfig) -> None:
        """Vectorised equivalent of running ``validate_frame`` on every row."""
        if self.round_id < 1:
            raise OutOfRange("round_id", self.round_id, 1, 2**31 - 1)
        for arr, name, high in ((self.hp, "hp", cfg.max_hp), (self.x, "x", cfg.stage_width)):
            bad = np.argwhere((arr < 0) | (arr > high))
            if bad.size:
                j, p = bad[0]
                raise OutOfRange(f"p{p + 1}.{name}", int(arr[j, p]), 0, high)
