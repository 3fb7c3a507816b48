from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import frame
from highlight_danmaku.cues import (
    ActionWeightTable,
    CueExtractor,
    CueId,
    action_cue,
    distance_cue,
    extract_round,
    score_cue,
)
from highlight_danmaku.errors import ConfigError
from highlight_danmaku.state import ActionClass, MatchConfig, RoundArrays

A = ActionClass


@pytest.mark.parametrize("opp_hp, expected", [(400, 0.0), (0, 1.0), (300, 0.25)])
def test_score_cue(match, opp_hp, expected):
    assert score_cue(frame(hp=(400, opp_hp)), match, 1) == expected
    assert score_cue(frame(hp=(opp_hp, 400)), match, 2) == expected


def test_action_cue_examples():
    table = ActionWeightTable()
    assert action_cue([A.IDLE] * 30, table) == 0.0
    assert action_cue([A.IDLE] * 29 + [A.SUPER_ATTACK], table) == 1.0
    assert action_cue([A.MOVE] * 15 + [A.NORMAL_ATTACK] + [A.MOVE] * 14, table) == 0.5


@pytest.mark.parametrize("x, expected", [((300, 300), 1.0), ((0, 960), 0.0), ((100, 580), 0.5)])
def test_distance_cue(match, x, expected):
    assert distance_cue(frame(x=x), match) == expected


def test_first_frame_vector(match):
    ex = CueExtractor(match)
    assert ex.extract(frame(x=(480, 480))).values == (0, 0, 0, 0, 1, 1)


def test_quarter_damage_vector(match):
    ex = CueExtractor(match)
    assert ex.extract(frame(hp=(400, 300), x=(240, 720))).values == (0.25, 0, 0, 0, 0.5, 0.5)


def test_action_window_expires(match):
    ex = CueExtractor(match, window=3)
    acts = [A.SUPER_ATTACK, A.IDLE, A.IDLE, A.IDLE]
    got = [ex.extract(frame(k=k, action=(a, A.IDLE)))[CueId.P1_ACTION] for k, a in enumerate(acts, 1)]
    assert got == [1.0, 1.0, 1.0, 0.0]


@pytest.mark.parametrize(
    "weights",
    [{A.IDLE: 0.1}, {A.MOVE: 1.5}, {A.GUARD: 0.05}],
)
def test_bad_weight_tables(weights):
    with pytest.raises(ConfigError):
        ActionWeightTable(weights)


def test_extract_round_matches_online(match):
    rng = np.random.default_rng(3)
    n = 200
    hp = np.minimum.accumulate(rng.integers(0, 401, (n, 2)), axis=0)
    x = rng.integers(0, 961, (n, 2))
    act = rng.integers(0, 6, (n, 2))
    arrays = RoundArrays(1, hp, x, act, np.zeros((n, 2), dtype=np.int64), ("STAND",))
    batch = extract_round(arrays, match, ActionWeightTable(), 30)
    ex = CueExtractor(match)
    online = np.array([ex.extract(f).values for f in arrays.frames()])
    assert np.array_equal(batch, online)


frames_st = st.builds(
    lambda h1, h2, x1, x2, a1, a2: frame(hp=(h1, h2), x=(x1, x2), action=(a1, a2)),
    st.integers(0, 400), st.integers(0, 400), st.integers(0, 960), st.integers(0, 960),
    st.sampled_from(list(A)), st.sampled_from(list(A)),
)


@given(frames_st)
def test_cues_in_unit_range(f):
    values = CueExtractor(MatchConfig()).extract(f).values
    assert all(0.0 <= v <= 1.0 for v in values)


@given(frames_st)
def test_swapping_players_swaps_cues(f):
    cfg = MatchConfig()
    a = CueExtractor(cfg).extract(f).values
    b = CueExtractor(cfg).extract(f.swapped()).values
    assert (a[0], a[2], a[4]) == (b[1], b[3], b[5])
    assert (a[1], a[3]) == (b[0], b[2])


@given(st.integers(1, 400), st.integers(0, 400))
def test_score_grows_as_opponent_loses_hp(drop, hp):
    cfg = MatchConfig()
    lower = max(0, hp - drop)
    assert score_cue(frame(hp=(400, lower)), cfg, 1) >= score_cue(frame(hp=(400, hp)), cfg, 1)
