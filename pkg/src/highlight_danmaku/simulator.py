"""Synthetic fighting matches and the line-oriented replay format.

Replay files are UTF-8 text with LF endings::

    #replay<TAB>v1<TAB>max_hp=400<TAB>stage_width=960<TAB>fps=60
    k  round  p1_hp  p1_x  p1_action  p2_hp  p2_x  p2_action   (tab separated)
    ...
    #end<TAB>frames=<total frame lines>

The trailer makes truncated files detectable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import kernels
from .errors import ConfigError, InvariantViolation, ParseError
from .state import DEFAULT_RAW_ACTIONS, ActionClass, ActionMap, GameFrame, MatchConfig, PlayerState, RoundArrays, validate_frame

HEADER_TAG = "#replay"
TRAILER_TAG = "#end"
VERSION = "v1"

# Per action class, in ActionClass order.
DURATION = (8, 12, 15, 18, 35, 70)
DAMAGE = (0, 0, 0, 10, 25, 60)
REACH = (0, 0, 0, 110, 180, 220)
# Cut points on a uniform draw: normal/special split, special/super split,
# move/guard split, guard/idle split, and P(step toward the opponent).
CHOICE_CUTS = (0.72, 0.94, 0.55, 0.75, 0.7, 0.0)
ATTACK_RATE = 0.2
SPEED = 6


def _vocab() -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    by_class: list[list[str]] = [[] for _ in ActionClass]
    for raw, cls in DEFAULT_RAW_ACTIONS.items():
        by_class[cls].append(raw)
    vocab = tuple(r for group in by_class for r in group)
    counts = np.array([len(g) for g in by_class], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    return vocab, starts, counts


SIM_VOCAB, _CLS_START, _CLS_COUNT = _vocab()


@dataclass(frozen=True, slots=True)
class SimConfig:
    seed: int = 1
    rounds: int = 1
    round_length_frames: int = 3600
    aggression: float = 0.5
    cfg: MatchConfig = field(default_factory=MatchConfig)

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.round_length_frames < 1:
            raise ConfigError("round_length_frames must be >= 1")
        if not 0.0 <= self.aggression <= 1.0:
            raise ConfigError("aggression must be in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


def _params(cfg: MatchConfig) -> np.ndarray:
    p = np.zeros((5, 6))
    p[0] = DURATION
    p[1] = DAMAGE
    p[2] = REACH
    p[3] = CHOICE_CUTS
    p[4, 0] = SPEED
    p[4, 1] = int(0.3 * cfg.stage_width)
    return p


def simulate_round(config: SimConfig, round_id: int) -> RoundArrays:
    """One round; each round draws from its own ``(seed, round_id)`` stream."""
    cfg = config.cfg
    n = config.round_length_frames
    u = np.random.default_rng([config.seed, round_id]).random((n, 2, 4))
    hp, x, act, raw = kernels.ACTIVE.simulate_round(
        u,
        cfg.max_hp,
        cfg.stage_width,
        n,
        config.aggression * ATTACK_RATE,
        _CLS_START,
        _CLS_COUNT,
        _params(cfg),
    )
    return RoundArrays(round_id, hp, x, act, raw, SIM_VOCAB)


def simulate(config: SimConfig) -> Iterator[RoundArrays]:
    for r in range(1, config.rounds + 1):
        yield simulate_round(config, r)


def simulate_frames(config: SimConfig) -> Iterator[GameFrame]:
    for arrays in simulate(config):
        yield from arrays.frames()


# ---------------------------------------------------------------- replay files


@dataclass(slots=True)
class Replay:
    cfg: MatchConfig
    rounds: list[RoundArrays]

    def frames(self) -> Iterator[GameFrame]:
        for r in self.rounds:
            yield from r.frames()

    @property
    def frame_count(self) -> int:
        return sum(len(r) for r in self.rounds)


def format_header(cfg: MatchConfig) -> str:
    return f"{HEADER_TAG}\t{VERSION}\tmax_hp={cfg.max_hp}\tstage_width={cfg.stage_width}\tfps={cfg.fps}"


_HEADER_RE = re.compile(r"#replay\tv1\tmax_hp=(\d+)\tstage_width=(\d+)\tfps=(\d+)")


def parse_header(line: str, lineno: int = 1, source: str | None = None) -> MatchConfig:
    m = _HEADER_RE.fullmatch(line)
    if not m:
        raise ParseError("bad replay header (expected '#replay v1 max_hp=.. stage_width=.. fps=..')", lineno, 1, source)
    try:
        return MatchConfig(*(int(g) for g in m.groups()))
    except ConfigError as exc:
        raise ParseError(str(exc), lineno, 1, source) from None


def _round_lines(arrays: RoundArrays) -> str:
    """The round's frame lines, joined column-wise (no trailing newline)."""
    n = len(arrays)
    if n == 0:
        return ""
    names = np.array(arrays.vocab, dtype=object)
    cols = [
        map(str, range(1, n + 1)),
        [str(arrays.round_id)] * n,
        map(str, arrays.hp[:, 0].tolist()),
        map(str, arrays.x[:, 0].tolist()),
        names[arrays.raw[:, 0]].tolist(),
        map(str, arrays.hp[:, 1].tolist()),
        map(str, arrays.x[:, 1].tolist()),
        names[arrays.raw[:, 1]].tolist(),
    ]
    return "\n".join(map("\t".join, zip(*cols)))


def format_frame(frame: GameFrame) -> str:
    p1, p2 = frame.p1, frame.p2
    return f"{frame.k}\t{frame.round_id}\t{p1.hp}\t{p1.x}\t{p1.action_raw}\t{p2.hp}\t{p2.x}\t{p2.action_raw}"


def dump_replay(rounds: Iterable[RoundArrays], cfg: MatchConfig) -> str:
    parts = [format_header(cfg)]
    total = 0
    for arrays in rounds:
        if len(arrays):
            parts.append(_round_lines(arrays))
        total += len(arrays)
    parts.append(f"{TRAILER_TAG}\tframes={total}")
    return "\n".join(parts) + "\n"


def write_replay(rounds: Iterable[RoundArrays] | Iterable[GameFrame], cfg: MatchConfig, path: str | Path | None = None) -> str:
    """Serialise rounds (or a flat frame stream) and optionally save to ``path``."""
    rounds = list(rounds)
    if rounds and isinstance(rounds[0], GameFrame):
        rounds = _group_frames(rounds)
    text = dump_replay(rounds, cfg)
    if path is not None:
        Path(path).write_bytes(text.encode("utf-8"))
    return text


def _group_frames(frames: list[GameFrame]) -> list[RoundArrays]:
    out: list[RoundArrays] = []
    start = 0
    for i in range(1, len(frames) + 1):
        if i == len(frames) or frames[i].round_id != frames[start].round_id:
            out.append(RoundArrays.from_frames(frames[start:i]))
            start = i
    return out


_ACTION_RE = re.compile(r"[^\s«»]+")


def parse_frame_line(line: str, lineno: int, actions: ActionMap, source: str | None = None) -> GameFrame:
    """Parse one frame line (no sequencing or bounds checks)."""
    fields = line.split("\t")
    col = 1
    if len(fields) != 8:
        raise ParseError(f"expected 8 tab-separated fields, got {len(fields)}", lineno, len(line) + 1 if len(fields) < 8 else 1, source)
    values: list[int | str] = []
    for i, f in enumerate(fields):
        if i in (4, 7):
            if not _ACTION_RE.fullmatch(f):
                raise ParseError(f"bad action id {f!r}", lineno, col, source)
            values.append(f)
        else:
            if not f.isascii() or not f.isdigit() or (len(f) > 1 and f[0] == "0"):
                raise ParseError(f"expected a non-negative integer, got {f!r}", lineno, col, source)
            values.append(int(f))
        col += len(f) + 1
    k, rid, h1, x1, a1, h2, x2, a2 = values
    return GameFrame(k, rid, PlayerState(h1, x1, actions(a1), a1), PlayerState(h2, x2, actions(a2), a2))


def load_replay(source: str | bytes, actions: ActionMap | None = None, name: str | None = None) -> Replay:
    """Parse and validate a replay.  Errors carry line and column."""
    actions = actions or ActionMap()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            line = source.count(b"\n", 0, exc.start) + 1
            col = exc.start - (source.rfind(b"\n", 0, exc.start) + 1) + 1
            raise ParseError("invalid UTF-8", line, col, name) from None
    if source and not source.endswith("\n"):
        raise ParseError("file does not end with a newline (truncated?)", source.count("\n") + 1, 1, name)
    lines = source.split("\n")[:-1] if source else []
    if not lines:
        raise ParseError("empty replay (missing header)", 1, 1, name)
    cr = source.find("\r")
    if cr >= 0:
        line = source.count("\n", 0, cr) + 1
        raise ParseError("carriage return in replay (files must use LF)", line, cr - (source.rfind("\n", 0, cr) + 1) + 1, name)
    cfg = parse_header(lines[0], 1, name)
    if len(lines) < 2 or not lines[-1].startswith(TRAILER_TAG):
        raise ParseError("missing '#end' trailer (truncated file?)", len(lines) + 1, 1, name)
    m = re.fullmatch(r"#end\tframes=(\d+)", lines[-1])
    body = lines[1:-1]
    if not m:
        raise ParseError("bad trailer (expected '#end<TAB>frames=N')", len(lines), 1, name)
    if int(m.group(1)) != len(body):
        raise ParseError(f"trailer says {m.group(1)} frames but file has {len(body)}", len(lines), 1, name)
    rounds = _parse_body(body, cfg, actions, name)
    return Replay(cfg, rounds)


def _uint_column(col: list[str]) -> np.ndarray:
    """Parse canonical non-negative integers; ``ValueError`` on anything else."""
    joined = "\n".join(col)
    digits = joined.replace("\n", "")
    if "\n\n" in joined or joined[:1] == "\n" or joined[-1:] == "\n":
        raise ValueError
    if not (digits.isascii() and digits.isdigit()):
        raise ValueError
    values = np.array(col, dtype=np.uint64).astype(np.int64)
    if (values < 0).any():
        raise OverflowError
    # A leading zero is the only way a column can be longer than its values.
    widths = np.ones(values.shape, dtype=np.int64)
    for power in range(1, 19):
        widths += values >= 10**power
    if int(widths.sum()) != len(digits):
        raise ValueError
    return values


def _parse_body(body: list[str], cfg: MatchConfig, actions: ActionMap, name: str | None) -> list[RoundArrays]:
    if not body:
        return []
    n = len(body)
    tokens = "\n".join(body).replace("\t", "\n").split("\n")
    try:
        if len(tokens) != 8 * n:
            raise ValueError
        nums = {}
        for i in (0, 1, 2, 3, 5, 6):
            nums[i] = _uint_column(tokens[i::8])
        raw_all = tokens[4::8] + tokens[7::8]
        index = dict.fromkeys(raw_all)
        vocab = tuple(index)
        if not all(_ACTION_RE.fullmatch(v) for v in vocab):
            raise ValueError
        for code, v in enumerate(vocab):
            index[v] = code
        inverse = np.array(list(map(index.__getitem__, raw_all)), dtype=np.int64)
    except (ValueError, OverflowError):
        _diagnose(body, cfg, actions, name)
        raise AssertionError("diagnosis found no error")  # pragma: no cover
    n = len(body)
    inverse = inverse.reshape(2, n).T
    classes = np.array([int(actions(v)) for v in vocab], dtype=np.int64)
    k, rid = nums[0], nums[1]
    hp = np.stack([nums[2], nums[5]], axis=1)
    x = np.stack([nums[3], nums[6]], axis=1)
    starts = np.flatnonzero(np.r_[True, rid[1:] != rid[:-1]])
    ends = np.r_[starts[1:], n]
    rounds = []
    prev_rid = 0
    for s, e in zip(starts.tolist(), ends.tolist()):
        r = int(rid[s])
        if r <= prev_rid:
            raise ParseError(f"round {r} does not follow round {prev_rid}", s + 2, len(body[s].split("\t")[0]) + 2, name)
        prev_rid = r
        expect = np.arange(1, e - s + 1)
        bad = np.flatnonzero(k[s:e] != expect)
        if bad.size:
            j = s + int(bad[0])
            raise _wrap(InvariantViolation(f"frame k={k[j]} out of sequence (expected k={expect[bad[0]]})"), j + 2, 1, name)
        arrays = RoundArrays(r, hp[s:e], x[s:e], classes[inverse[s:e]], inverse[s:e], vocab)
        try:
            arrays.validate(cfg)
        except InvariantViolation as exc:
            bad_rows = np.flatnonzero(((hp[s:e] < 0) | (hp[s:e] > cfg.max_hp) | (x[s:e] < 0) | (x[s:e] > cfg.stage_width)).any(axis=1))
            raise _wrap(exc, s + int(bad_rows[0]) + 2, 1, name) from None
        rounds.append(arrays)
    return rounds


class FrameInvariantError(ParseError, InvariantViolation):
    """A syntactically valid frame line that breaks a frame invariant."""


def _wrap(exc: InvariantViolation, line: int, col: int, name: str | None) -> FrameInvariantError:
    err = FrameInvariantError(str(exc), line, col, name)
    err.__cause__ = exc
    return err


def _diagnose(body: list[str], cfg: MatchConfig, actions: ActionMap, name: str | None) -> None:
    """Slow line-by-line pass that pins the first error to a position."""
    prev: GameFrame | None = None
    for i, line in enumerate(body):
        f = parse_frame_line(line, i + 2, actions, name)
        same_round = prev is not None and prev.round_id == f.round_id
        try:
            validate_frame(f, cfg, prev.k if same_round else None)
        except InvariantViolation as exc:
            raise _wrap(exc, i + 2, 1, name) from None
        prev = f


def read_replay(path: str | Path, actions: ActionMap | None = None) -> Replay:
    path = Path(path)
    return load_replay(path.read_bytes(), actions, name=str(path))
