from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from highlight_danmaku.cues import CueVector
from highlight_danmaku.errors import ConfigError, NonFiniteInput
from highlight_danmaku.highlight import (
    CueSeries,
    DetectorConfig,
    HighlightDetector,
    HighlightEngine,
    batch_normalize,
    combine,
    detect,
    score_round,
)


def series(values):
    s = CueSeries()
    for k, v in enumerate(values, 1):
        s.push(v, k)
    return s


def test_constant_is_cma_fixed_point():
    assert series([0.5, 0.5, 0.5]).cma == [0.5, 0.5, 0.5]


def test_cma_of_ramp():
    assert series([0.1, 0.2, 0.3]).cma == pytest.approx([0.1, 0.15, 0.2], abs=1e-12)


def test_single_value():
    assert series([0.37]).cma == [0.37]


def test_push_rejects_nan_and_wrong_k():
    s = CueSeries()
    with pytest.raises(NonFiniteInput):
        s.push(math.nan)
    with pytest.raises(ValueError):
        s.push(0.1, k=2)


def test_smooth_ramp():
    assert series([0.1, 0.2, 0.3]).smooth() == pytest.approx([0.15, 0.225, 0.3], abs=1e-12)


def test_smooth_zero_and_constant():
    assert series([0.0] * 5).smooth() == [0.0] * 5
    assert series([0.4] * 5).smooth() == pytest.approx([0.4] * 5, abs=1e-15)


def test_smooth_empty_raises():
    with pytest.raises(ValueError):
        CueSeries().smooth()


def test_combine_examples():
    assert combine([0.3] * 6) == 0.3
    assert combine([1, 0, 0, 0, 0, 0]) == pytest.approx(1 / 6, abs=1e-12)
    assert combine([0] * 6) == 0.0


def test_combine_rejects_bad_input():
    with pytest.raises(ValueError):
        combine([0.1] * 5)
    with pytest.raises(NonFiniteInput):
        combine([0.1] * 5 + [math.inf])


@given(st.floats(0, 1))
def test_combine_equal_values_exact(c):
    assert combine([c] * 6) == c


def run(h, cfg):
    det = HighlightDetector(cfg)
    for k, v in enumerate(h, 1):
        detect(det, v, k)
    return det.trace.events


def test_never_crossing_gives_no_events():
    assert run([0.1, 0.5, 0.59] * 10, DetectorConfig()) == []


def test_single_event_with_peak():
    (ev,) = run([0.2, 0.7, 0.8, 0.3], DetectorConfig(0.6, 0.4, 0))
    assert (ev.onset_k, ev.peak_k, ev.peak_h) == (2, 3, 0.8)
    assert ev.released and ev.release_k == 4


def test_oscillation_above_release_is_one_event():
    events = run([0.7, 0.5, 0.7, 0.5], DetectorConfig(0.6, 0.4, 0))
    assert len(events) == 1 and not events[0].released


def test_first_frame_can_fire():
    (ev,) = run([0.9], DetectorConfig())
    assert ev.onset_k == 1


def test_cooldown_blocks_reonset():
    h = [0.7, 0.1, 0.7, 0.1, 0.7]
    assert len(run(h, DetectorConfig(0.6, 0.4, 0))) == 3
    assert len(run(h, DetectorConfig(0.6, 0.4, 3))) == 2
    assert len(run(h, DetectorConfig(0.6, 0.4, 5))) == 1


@pytest.mark.parametrize("kw", [{"tau_high": 1.0}, {"tau_high": 0.5, "tau_low": 0.5}, {"cooldown": -1}])
def test_detector_config_validation(kw):
    with pytest.raises(ConfigError):
        DetectorConfig(**kw)


def test_engine_matches_batch_scoring():
    rng = np.random.default_rng(11)
    raw = np.clip(np.cumsum(rng.normal(0, 0.05, (400, 6)), axis=0) + 0.3, 0, 1)
    cfg = DetectorConfig(0.5, 0.35, 20)
    eng = HighlightEngine(cfg)
    hs = [eng.push(CueVector(k, tuple(row))).h for k, row in enumerate(raw.tolist(), 1)]
    batch = score_round(raw, cfg)
    assert np.array_equal(np.array(hs), batch.h)
    assert batch.highlight_events() == eng.trace.events


def test_score_round_empty_and_nonfinite():
    assert score_round(np.empty((0, 6))).h.size == 0
    bad = np.zeros((3, 6))
    bad[1, 2] = np.nan
    with pytest.raises(NonFiniteInput):
        score_round(bad)


def test_streaming_and_batch_agree_on_last_frame():
    ramp = np.linspace(0.2, 1.0, 50)
    raw = np.stack([ramp] * 6, axis=1)
    scores = score_round(raw)
    smoothed, h = batch_normalize(scores.raw, scores.cma)
    assert not np.allclose(smoothed[:10], scores.smoothed[:10])
    assert smoothed[-1] == pytest.approx(scores.smoothed[-1], abs=1e-12)
    assert h[-1] == pytest.approx(scores.h[-1], abs=1e-12)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=200), st.floats(0.0, 0.3))
def test_event_count_monotone_with_fixed_release_and_no_cooldown(h, tau_low):
    counts = [len(run(h, DetectorConfig(t, tau_low, 0))) for t in np.arange(0.35, 0.96, 0.05)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
