"""Hot loops of the batch path, in two interchangeable flavours.

Every kernel exists as a numba ``@njit`` function and as a pure numpy (or
sparse Python) function with identical results, bit for bit.  The numba
flavour is used when numba imports and ``HIGHLIGHT_DANMAKU_NUMBA`` is not
``0``; ``NUMPY`` and ``NUMBA`` expose each flavour explicitly for tests and
benchmarks.
"""

from __future__ import annotations

import os
import warnings
from types import SimpleNamespace

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False
    warnings.warn("numba unavailable, falling back to numpy kernels")

USE_NUMBA = HAVE_NUMBA and os.environ.get("HIGHLIGHT_DANMAKU_NUMBA", "1") != "0"

# Detector events are rows of (onset_k, peak_k, peak_h, release_k); k is 1-based,
# release_k is -1 while the event is still open at the end of the round.
EVENT_COLUMNS = 4


# ---------------------------------------------------------------- numpy path


def _np_window_max(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing max over ``values[max(0, j - window + 1) : j + 1]``."""
    n = values.shape[0]
    if n == 0:
        return values.astype(np.float64)
    # Left padding with the smallest value keeps short prefixes correct.
    pad = np.full(window - 1, values.min(), dtype=np.float64)
    full = np.concatenate([pad, values.astype(np.float64)])
    return np.lib.stride_tricks.sliding_window_view(full, window).max(axis=1)


def _np_highlight_series(raw: np.ndarray):
    n = raw.shape[0]
    k = np.arange(1, n + 1, dtype=np.float64)[:, None]
    cma = np.cumsum(raw, axis=0) / k
    raw_max = np.maximum.accumulate(raw, axis=0)
    cma_max = np.maximum.accumulate(cma, axis=0)
    positive = cma_max > 0
    scale = np.divide(raw_max, cma_max, out=np.zeros_like(raw_max), where=positive)
    smoothed = np.where(positive, scale * cma, 0.0)
    return cma, smoothed, combine_rows(smoothed)


def combine_rows(s: np.ndarray) -> np.ndarray:
    """Row-wise mean of six cues, written as a shifted sum.

    Six equal values give back that value exactly; the per-frame engine
    uses the same expression so both paths agree to the last bit.
    """
    c0 = s[:, 0]
    return c0 + ((s[:, 1] - c0) + (s[:, 2] - c0) + (s[:, 3] - c0) + (s[:, 4] - c0) + (s[:, 5] - c0)) / 6.0


def _np_detect(h: np.ndarray, tau_high: float, tau_low: float, cooldown: int):
    n = h.shape[0]
    prev = np.empty(n)
    prev[0] = -np.inf
    prev[1:] = h[:-1]
    ups = np.flatnonzero((prev < tau_high) & (h >= tau_high))
    lows = np.flatnonzero(h < tau_low)
    active = np.zeros(n, dtype=np.bool_)
    events = []
    resume = 0
    last_onset = -1
    for j in ups.tolist():
        if j < resume:
            continue
        if last_onset >= 0 and j - last_onset < cooldown:
            continue
        pos = np.searchsorted(lows, j, side="right")
        r = int(lows[pos]) if pos < lows.shape[0] else n
        p = j + int(np.argmax(h[j:r]))
        events.append((j + 1, p + 1, float(h[p]), r + 1 if r < n else -1))
        active[j:r] = True
        last_onset = j
        resume = r
    out = np.array(events, dtype=np.float64).reshape(len(events), EVENT_COLUMNS)
    return out, active


def _np_cooldown_select(idx: np.ndarray, cooldown: int) -> np.ndarray:
    keep = np.zeros(idx.shape[0], dtype=np.bool_)
    last = None
    for i, j in enumerate(idx.tolist()):
        if last is None or j - last >= cooldown:
            keep[i] = True
            last = j
    return keep


def _py_simulate_round(u, max_hp, width, n_frames, p_attack, cls_start, cls_count, params):
    """Plain-Python twin of ``_nb_simulate_round`` (see there for the model)."""
    hp = np.zeros((n_frames, 2), dtype=np.int64)
    xs = np.zeros((n_frames, 2), dtype=np.int64)
    act = np.zeros((n_frames, 2), dtype=np.int64)
    raw = np.zeros((n_frames, 2), dtype=np.int64)
    dur, dmg, reach, probs = (params[0].tolist(), params[1].tolist(), params[2].tolist(), params[3].tolist())
    speed = int(params[4][0])
    start_x = int(params[4][1])
    cls_start = cls_start.tolist()
    cls_count = cls_count.tolist()
    uu = u.tolist()
    php = [max_hp, max_hp]
    px = [start_x, width - start_x]
    pc = [0, 0]
    pr = [cls_start[0], cls_start[0]]
    left = [0, 0]
    step = [0, 0]
    n = n_frames
    for j in range(n_frames):
        fresh = [False, False]
        for p in range(2):
            r = uu[j][p]
            if left[p] == 0:
                if r[0] < p_attack:
                    c = 3 if r[1] < probs[0] else (4 if r[1] < probs[1] else 5)
                else:
                    c = 1 if r[1] < probs[2] else (2 if r[1] < probs[3] else 0)
                pc[p] = c
                pr[p] = cls_start[c] + min(int(r[2] * cls_count[c]), cls_count[c] - 1)
                left[p] = dur[c]
                fresh[p] = True
                toward = 1 if px[1 - p] >= px[p] else -1
                step[p] = toward * speed if r[3] < probs[4] else -toward * speed
            if pc[p] == 1:
                px[p] = min(max(px[p] + step[p], 0), width)
            left[p] -= 1
        dist = abs(px[0] - px[1])
        for p in range(2):
            c = pc[p]
            if fresh[p] and c >= 3 and dist <= reach[c] and pc[1 - p] != 2:
                php[1 - p] = max(php[1 - p] - dmg[c], 0)
        for p in range(2):
            hp[j, p] = php[p]
            xs[j, p] = px[p]
            act[j, p] = pc[p]
            raw[j, p] = pr[p]
        if php[0] == 0 or php[1] == 0:
            n = j + 1
            break
    return hp[:n], xs[:n], act[:n], raw[:n]


NUMPY = SimpleNamespace(
    name="numpy",
    window_max=_np_window_max,
    highlight_series=_np_highlight_series,
    detect=_np_detect,
    cooldown_select=_np_cooldown_select,
    simulate_round=_py_simulate_round,
)


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _nb_window_max(values, window):
        n = values.shape[0]
        out = np.empty(n, dtype=np.float64)
        for j in range(n):
            lo = j - window + 1
            if lo < 0:
                lo = 0
            m = values[lo]
            for i in range(lo + 1, j + 1):
                if values[i] > m:
                    m = values[i]
            out[j] = m
        return out

    @njit(cache=True)
    def _nb_highlight_series(raw):
        n = raw.shape[0]
        cma = np.empty((n, 6))
        smoothed = np.empty((n, 6))
        h = np.empty(n)
        for i in range(6):
            total = 0.0
            raw_max = -np.inf
            cma_max = -np.inf
            for j in range(n):
                v = raw[j, i]
                total += v
                c = total / (j + 1.0)
                cma[j, i] = c
                if v > raw_max:
                    raw_max = v
                if c > cma_max:
                    cma_max = c
                if cma_max > 0:
                    smoothed[j, i] = (raw_max / cma_max) * c
                else:
                    smoothed[j, i] = 0.0
        for j in range(n):
            c0 = smoothed[j, 0]
            s = smoothed[j]
            h[j] = c0 + ((s[1] - c0) + (s[2] - c0) + (s[3] - c0) + (s[4] - c0) + (s[5] - c0)) / 6.0
        return cma, smoothed, h

    @njit(cache=True)
    def _nb_detect_core(h, tau_high, tau_low, cooldown):
        n = h.shape[0]
        events = np.empty((n // 2 + 1, 4))
        active = np.zeros(n, dtype=np.bool_)
        m = 0
        prev = -np.inf
        is_open = False
        last_onset = -1
        for j in range(n):
            v = h[j]
            if is_open:
                if v < tau_low:
                    is_open = False
                    events[m - 1, 3] = j + 1
                elif v > events[m - 1, 2]:
                    events[m - 1, 1] = j + 1
                    events[m - 1, 2] = v
            if not is_open and prev < tau_high and v >= tau_high and (last_onset < 0 or j - last_onset >= cooldown):
                events[m, 0] = j + 1
                events[m, 1] = j + 1
                events[m, 2] = v
                events[m, 3] = -1
                m += 1
                is_open = True
                last_onset = j
            active[j] = is_open
            prev = v
        return events[:m].copy(), active

    def _nb_detect(h, tau_high, tau_low, cooldown):
        return _nb_detect_core(np.ascontiguousarray(h, dtype=np.float64), float(tau_high), float(tau_low), int(cooldown))

    @njit(cache=True)
    def _nb_cooldown_select_core(idx, cooldown):
        keep = np.zeros(idx.shape[0], dtype=np.bool_)
        last = -1
        have = False
        for i in range(idx.shape[0]):
            if not have or idx[i] - last >= cooldown:
                keep[i] = True
                last = idx[i]
                have = True
        return keep

    def _nb_cooldown_select(idx, cooldown):
        return _nb_cooldown_select_core(np.asarray(idx, dtype=np.int64), int(cooldown))

    @njit(cache=True)
    def _nb_simulate_round(u, max_hp, width, n_frames, p_attack, cls_start, cls_count, params):
        """Bounded random-walk duel.

        Each player picks a new action when the previous one runs out.  An
        attack connects on its first frame if the opponent is within the
        class reach and not guarding.  Movement steps toward (or away from)
        the opponent at a fixed speed.  The round stops at the first KO.
        """
        hp = np.zeros((n_frames, 2), dtype=np.int64)
        xs = np.zeros((n_frames, 2), dtype=np.int64)
        act = np.zeros((n_frames, 2), dtype=np.int64)
        raw = np.zeros((n_frames, 2), dtype=np.int64)
        speed = np.int64(params[4, 0])
        start_x = np.int64(params[4, 1])
        php = np.array([max_hp, max_hp], dtype=np.int64)
        px = np.array([start_x, width - start_x], dtype=np.int64)
        pc = np.zeros(2, dtype=np.int64)
        pr = np.array([cls_start[0], cls_start[0]], dtype=np.int64)
        left = np.zeros(2, dtype=np.int64)
        step = np.zeros(2, dtype=np.int64)
        fresh = np.zeros(2, dtype=np.bool_)
        n = n_frames
        for j in range(n_frames):
            for p in range(2):
                fresh[p] = False
                if left[p] == 0:
                    if u[j, p, 0] < p_attack:
                        if u[j, p, 1] < params[3, 0]:
                            c = 3
                        elif u[j, p, 1] < params[3, 1]:
                            c = 4
                        else:
                            c = 5
                    else:
                        if u[j, p, 1] < params[3, 2]:
                            c = 1
                        elif u[j, p, 1] < params[3, 3]:
                            c = 2
                        else:
                            c = 0
                    pc[p] = c
                    pick = np.int64(u[j, p, 2] * cls_count[c])
                    if pick > cls_count[c] - 1:
                        pick = cls_count[c] - 1
                    pr[p] = cls_start[c] + pick
                    left[p] = np.int64(params[0, c])
                    fresh[p] = True
                    toward = 1 if px[1 - p] >= px[p] else -1
                    if u[j, p, 3] < params[3, 4]:
                        step[p] = toward * speed
                    else:
                        step[p] = -toward * speed
                if pc[p] == 1:
                    nx = px[p] + step[p]
                    if nx < 0:
                        nx = 0
                    if nx > width:
                        nx = width
                    px[p] = nx
                left[p] -= 1
            dist = abs(px[0] - px[1])
            for p in range(2):
                c = pc[p]
                if fresh[p] and c >= 3 and dist <= params[2, c] and pc[1 - p] != 2:
                    v = php[1 - p] - np.int64(params[1, c])
                    php[1 - p] = v if v > 0 else 0
            for p in range(2):
                hp[j, p] = php[p]
                xs[j, p] = px[p]
                act[j, p] = pc[p]
                raw[j, p] = pr[p]
            if php[0] == 0 or php[1] == 0:
                n = j + 1
                break
        return hp[:n].copy(), xs[:n].copy(), act[:n].copy(), raw[:n].copy()

    NUMBA = SimpleNamespace(
        name="numba",
        window_max=_nb_window_max,
        highlight_series=_nb_highlight_series,
        detect=_nb_detect,
        cooldown_select=_nb_cooldown_select,
        simulate_round=_nb_simulate_round,
    )
else:  # pragma: no cover
    NUMBA = None

ACTIVE = NUMBA if USE_NUMBA else NUMPY
