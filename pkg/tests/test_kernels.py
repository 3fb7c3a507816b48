from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from highlight_danmaku import kernels
from highlight_danmaku.simulator import _CLS_COUNT, _CLS_START, ATTACK_RATE, _params
from highlight_danmaku.state import MatchConfig

pytestmark = pytest.mark.skipif(kernels.NUMBA is None, reason="numba not installed")
NP, NB = kernels.NUMPY, kernels.NUMBA


@pytest.mark.parametrize("window", [1, 3, 30, 1000])
def test_window_max(window):
    values = np.random.default_rng(window).random(500)
    expected = np.array([values[max(0, i - window + 1): i + 1].max() for i in range(500)])
    assert np.array_equal(NP.window_max(values, window), expected)
    assert np.array_equal(NB.window_max(values, window), expected)


@pytest.mark.parametrize("seed", range(5))
def test_highlight_series_bitwise(seed):
    rng = np.random.default_rng(seed)
    raw = rng.random((777, 6))
    raw[:, seed] = 0.0
    for a, b in zip(NP.highlight_series(raw), NB.highlight_series(raw)):
        assert np.array_equal(a, b)


@pytest.mark.parametrize("cooldown", [0, 7, 180])
def test_detect_bitwise(cooldown):
    h = np.random.default_rng(cooldown).random(2000)
    ev_np, act_np = NP.detect(h, 0.6, 0.45, cooldown)
    ev_nb, act_nb = NB.detect(h, 0.6, 0.45, cooldown)
    assert np.array_equal(ev_np, ev_nb) and np.array_equal(act_np, act_nb)
    assert ev_np.shape[1] == kernels.EVENT_COLUMNS


def test_cooldown_select():
    idx = np.array([1, 5, 300, 301, 601, 900], dtype=np.int64)
    expected = [True, False, False, True, True, False]
    assert NP.cooldown_select(idx, 300).tolist() == expected
    assert NB.cooldown_select(idx, 300).tolist() == expected


@pytest.mark.parametrize("aggression", [0.0, 0.5, 1.0])
def test_simulate_round_bitwise(aggression):
    cfg = MatchConfig()
    u = np.random.default_rng(4).random((3000, 2, 4))
    args = (u, cfg.max_hp, cfg.stage_width, 3000, aggression * ATTACK_RATE, _CLS_START, _CLS_COUNT, _params(cfg))
    for a, b in zip(NP.simulate_round(*args), NB.simulate_round(*args)):
        assert np.array_equal(a, b)


def test_env_flag_selects_numpy():
    env = dict(os.environ, HIGHLIGHT_DANMAKU_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", "from highlight_danmaku import kernels; print(kernels.ACTIVE.name)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"
