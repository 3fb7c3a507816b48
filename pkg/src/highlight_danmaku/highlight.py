"""Highlight scoring: cumulative moving averages, max-rescaling, the six-cue
mean H(k), and a threshold detector with hysteresis and cooldown."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .cues import CueId, CueVector
from .errors import ConfigError, NonFiniteInput


class CueSeries:
    """Running record of one cue within a round.

    ``push`` is O(1); the rescaled series uses the maxima seen so far, so
    ``smoothed_at(k)`` is what an online consumer sees at frame ``k``.
    """

    __slots__ = ("cue", "raw", "cma", "running_sum", "raw_max", "cma_max")

    def __init__(self, cue: CueId | None = None) -> None:
        self.cue = cue
        self.raw: list[float] = []
        self.cma: list[float] = []
        self.running_sum = 0.0
        self.raw_max = -math.inf
        self.cma_max = -math.inf

    def __len__(self) -> int:
        return len(self.raw)

    def push(self, value: float, k: int | None = None) -> float:
        """Append ``value`` as frame ``k`` and return the new CMA."""
        if k is not None and k != len(self.raw) + 1:
            raise ValueError(f"expected k={len(self.raw) + 1}, got {k}")
        value = float(value)
        if not math.isfinite(value):
            raise NonFiniteInput(f"cue value {value!r} is not finite")
        self.running_sum += value
        mean = self.running_sum / (len(self.raw) + 1.0)
        self.raw.append(value)
        self.cma.append(mean)
        if value > self.raw_max:
            self.raw_max = value
        if mean > self.cma_max:
            self.cma_max = mean
        return mean

    @property
    def scale(self) -> float:
        """``raw_max / cma_max``; zero for a series with no signal."""
        if not self.raw or self.cma_max <= 0:
            return 0.0
        return self.raw_max / self.cma_max

    def smoothed_at(self, k: int) -> float:
        if self.cma_max > 0:
            return (self.raw_max / self.cma_max) * self.cma[k - 1]
        return 0.0

    def smooth(self) -> list[float]:
        if not self.raw:
            raise ValueError("smooth() needs at least one pushed value")
        if self.cma_max <= 0:
            return [0.0] * len(self.cma)
        s = self.raw_max / self.cma_max
        return [s * c for c in self.cma]


def cma_push(series: CueSeries, value: float, k: int | None = None) -> CueSeries:
    series.push(value, k)
    return series


def smooth(series: CueSeries) -> list[float]:
    return series.smooth()


def combine(values: Sequence[float]) -> float:
    """Unweighted mean of the six smoothed cues.

    Computed as ``c0 + mean(ci - c0)`` so that six equal inputs return that
    input exactly.
    """
    if len(values) != 6:
        raise ValueError(f"combine takes exactly six values, got {len(values)}")
    c0, c1, c2, c3, c4, c5 = (float(v) for v in values)
    if not all(math.isfinite(v) for v in (c0, c1, c2, c3, c4, c5)):
        raise NonFiniteInput(f"non-finite cue in {values!r}")
    return c0 + ((c1 - c0) + (c2 - c0) + (c3 - c0) + (c4 - c0) + (c5 - c0)) / 6.0


@dataclass(frozen=True, slots=True)
class DetectorConfig:
    tau_high: float = 0.6
    tau_low: float = 0.45
    cooldown: int = 180

    def __post_init__(self) -> None:
        if not 0.0 < self.tau_high < 1.0:
            raise ConfigError(f"tau_high must be in (0, 1), got {self.tau_high}")
        if not 0.0 <= self.tau_low < self.tau_high:
            raise ConfigError(f"tau_low must be in [0, tau_high), got {self.tau_low}")
        if self.cooldown < 0:
            raise ConfigError("cooldown must be >= 0")


@dataclass(frozen=True, slots=True)
class HighlightEvent:
    onset_k: int
    peak_k: int
    peak_h: float
    released: bool = False
    release_k: int | None = None


@dataclass(slots=True)
class HighlightTrace:
    h: list[float] = field(default_factory=list)
    events: list[HighlightEvent] = field(default_factory=list)


class HighlightDetector:
    """Rising-edge threshold detector.

    An onset fires when H crosses up through ``tau_high``, the previous
    event has released (H fell below ``tau_low``) and ``cooldown`` frames
    have passed since the previous onset.  The first frame of a round
    counts as a crossing if it is already at or above ``tau_high``.
    """

    def __init__(self, cfg: DetectorConfig | None = None) -> None:
        self.cfg = cfg or DetectorConfig()
        self.reset()

    def reset(self) -> None:
        self.trace = HighlightTrace()
        self._prev = -math.inf
        self._open = False
        self._last_onset: int | None = None
        self.released: HighlightEvent | None = None

    @property
    def active(self) -> bool:
        return self._open

    def update(self, h: float, k: int) -> HighlightEvent | None:
        """Feed H(k); return the new event on an onset, else ``None``.

        ``self.released`` holds the event that closed on this frame, if any.
        """
        cfg = self.cfg
        events = self.trace.events
        self.trace.h.append(h)
        self.released = None
        if self._open:
            ev = events[-1]
            if h < cfg.tau_low:
                self._open = False
                events[-1] = self.released = replace(ev, released=True, release_k=k)
            elif h > ev.peak_h:
                events[-1] = replace(ev, peak_k=k, peak_h=h)
        onset = None
        if (
            not self._open
            and self._prev < cfg.tau_high <= h
            and (self._last_onset is None or k - self._last_onset >= cfg.cooldown)
        ):
            onset = HighlightEvent(k, k, h)
            events.append(onset)
            self._open = True
            self._last_onset = k
        self._prev = h
        return onset


def detect(detector: HighlightDetector, h_k: float, k: int) -> HighlightEvent | None:
    return detector.update(h_k, k)


@dataclass(frozen=True, slots=True)
class FrameScore:
    k: int
    smoothed: tuple[float, ...]
    h: float
    onset: HighlightEvent | None
    released: HighlightEvent | None
    active: bool


class HighlightEngine:
    """Per-round online scorer: six ``CueSeries`` plus a detector."""

    def __init__(self, cfg: DetectorConfig | None = None) -> None:
        self.detector = HighlightDetector(cfg)
        self.reset()

    def reset(self) -> None:
        self.series = [CueSeries(c) for c in CueId]
        self.detector.reset()

    @property
    def trace(self) -> HighlightTrace:
        return self.detector.trace

    def push(self, cues: CueVector) -> FrameScore:
        k = cues.k
        smoothed = []
        for s, v in zip(self.series, cues.values):
            s.push(v, k)
            smoothed.append(s.smoothed_at(k))
        h = combine(smoothed)
        onset = self.detector.update(h, k)
        return FrameScore(k, tuple(smoothed), h, onset, self.detector.released, self.detector.active)


@dataclass(slots=True)
class RoundScores:
    """Batch scoring result for one round (rows are frames)."""

    raw: np.ndarray
    cma: np.ndarray
    smoothed: np.ndarray
    h: np.ndarray
    events: np.ndarray  # rows of (onset_k, peak_k, peak_h, release_k)
    active: np.ndarray

    def highlight_events(self) -> list[HighlightEvent]:
        out = []
        for onset, peak, peak_h, release in self.events.tolist():
            rel = int(release)
            out.append(
                HighlightEvent(int(onset), int(peak), peak_h, rel > 0, rel if rel > 0 else None)
            )
        return out


def score_round(raw: np.ndarray, cfg: DetectorConfig | None = None) -> RoundScores:
    """Batch twin of feeding every row of ``raw`` through :class:`HighlightEngine`."""
    cfg = cfg or DetectorConfig()
    raw = np.ascontiguousarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] != 6:
        raise ValueError(f"raw cues must have shape (N, 6), got {raw.shape}")
    if not np.isfinite(raw).all():
        raise NonFiniteInput("non-finite cue value in round")
    if raw.shape[0] == 0:
        empty = np.empty((0, 6))
        return RoundScores(raw, empty, empty, np.empty(0), np.empty((0, 4)), np.zeros(0, dtype=bool))
    k = kernels.ACTIVE
    cma, smoothed, h = k.highlight_series(raw)
    events, active = k.detect(h, cfg.tau_high, cfg.tau_low, cfg.cooldown)
    return RoundScores(raw, cma, smoothed, h, events, active)


def batch_normalize(raw: np.ndarray, cma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rescale with whole-round maxima instead of running ones.

    Returns ``(smoothed, h)``.  Agrees with the streaming result on the
    round's final frame.
    """
    raw_max = raw.max(axis=0)
    cma_max = cma.max(axis=0)
    positive = cma_max > 0
    scale = np.divide(raw_max, cma_max, out=np.zeros_like(raw_max), where=positive)
    smoothed = np.where(positive, scale * cma, 0.0)
    return smoothed, kernels.combine_rows(smoothed)
