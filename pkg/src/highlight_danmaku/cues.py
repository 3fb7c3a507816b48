"""The six raw highlight cues: per-player score, action and distance."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import kernels
from .errors import ConfigError
from .state import ActionClass, GameFrame, MatchConfig, RoundArrays


class CueId(enum.IntEnum):
    """Cue order is fixed; it is the column order everywhere."""

    P1_SCORE = 0
    P2_SCORE = 1
    P1_ACTION = 2
    P2_ACTION = 3
    P1_DISTANCE = 4
    P2_DISTANCE = 5

    @property
    def column(self) -> str:
        return self.name.lower()


@dataclass(frozen=True, slots=True)
class CueVector:
    k: int
    values: tuple[float, float, float, float, float, float]

    def __getitem__(self, cue: CueId) -> float:
        return self.values[cue]


DEFAULT_ACTION_WEIGHTS = {
    ActionClass.IDLE: 0.0,
    ActionClass.MOVE: 0.1,
    ActionClass.GUARD: 0.2,
    ActionClass.NORMAL_ATTACK: 0.5,
    ActionClass.SPECIAL_ATTACK: 0.8,
    ActionClass.SUPER_ATTACK: 1.0,
}


class ActionWeightTable:
    """Excitement weight per action class.

    Idle must weigh 0 and weights may not decrease along the class order.
    """

    def __init__(self, weights: Mapping[ActionClass, float] | None = None) -> None:
        merged = dict(DEFAULT_ACTION_WEIGHTS)
        if weights:
            merged.update(weights)
        values = [float(merged[c]) for c in ActionClass]
        if values[0] != 0.0:
            raise ConfigError("Idle action weight must be 0")
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ConfigError("action weights must lie in [0, 1]")
        if any(b < a for a, b in zip(values, values[1:])):
            raise ConfigError("action weights must be non-decreasing from Idle to SuperAttack")
        self.array = np.array(values)

    def __getitem__(self, action: ActionClass) -> float:
        return float(self.array[action])

    def as_dict(self) -> dict[ActionClass, float]:
        return {c: float(self.array[c]) for c in ActionClass}


def score_cue(frame: GameFrame, cfg: MatchConfig, player: int) -> float:
    """Fraction of the opponent's life taken so far."""
    opponent = frame.p2 if player == 1 else frame.p1
    return (cfg.max_hp - opponent.hp) / cfg.max_hp


def action_cue(window: Iterable[ActionClass], table: ActionWeightTable) -> float:
    """Largest class weight seen in the player's recent action window."""
    return max((table[a] for a in window), default=0.0)


def distance_cue(frame: GameFrame, cfg: MatchConfig) -> float:
    return 1 - abs(frame.p1.x - frame.p2.x) / cfg.stage_width


class CueExtractor:
    """Per-round streaming extractor; keeps each player's action window.

    Call :meth:`reset` (or build a new instance) at every round boundary.
    """

    def __init__(self, cfg: MatchConfig, table: ActionWeightTable | None = None, window: int = 30) -> None:
        if window < 1:
            raise ConfigError("action window must be at least one frame")
        self.cfg = cfg
        self.table = table or ActionWeightTable()
        self.window = window
        self.reset()

    def reset(self) -> None:
        self._history = (deque(maxlen=self.window), deque(maxlen=self.window))

    def extract(self, frame: GameFrame) -> CueVector:
        h1, h2 = self._history
        h1.append(frame.p1.action)
        h2.append(frame.p2.action)
        d = distance_cue(frame, self.cfg)
        return CueVector(
            frame.k,
            (
                score_cue(frame, self.cfg, 1),
                score_cue(frame, self.cfg, 2),
                action_cue(h1, self.table),
                action_cue(h2, self.table),
                d,
                d,
            ),
        )


def extract_round(
    arrays: RoundArrays, cfg: MatchConfig, table: ActionWeightTable | None = None, window: int = 30
) -> np.ndarray:
    """Batch twin of :class:`CueExtractor`: an ``(N, 6)`` raw cue matrix."""
    table = table or ActionWeightTable()
    n = len(arrays)
    out = np.empty((n, 6))
    if n == 0:
        return out
    hp = arrays.hp
    out[:, CueId.P1_SCORE] = (cfg.max_hp - hp[:, 1]) / cfg.max_hp
    out[:, CueId.P2_SCORE] = (cfg.max_hp - hp[:, 0]) / cfg.max_hp
    weights = table.array[arrays.action]
    out[:, CueId.P1_ACTION] = kernels.ACTIVE.window_max(np.ascontiguousarray(weights[:, 0]), window)
    out[:, CueId.P2_ACTION] = kernels.ACTIVE.window_max(np.ascontiguousarray(weights[:, 1]), window)
    d = 1 - np.abs(arrays.x[:, 0] - arrays.x[:, 1]) / cfg.stage_width
    out[:, CueId.P1_DISTANCE] = d
    out[:, CueId.P2_DISTANCE] = d
    return out
