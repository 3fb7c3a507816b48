from __future__ import annotations

import pytest

from highlight_danmaku.config import EngineConfig, build_config, parse_config_text, read_config_file
from highlight_danmaku.errors import ConfigError
from highlight_danmaku.state import ActionClass


def test_defaults():
    cfg = build_config()
    assert cfg == EngineConfig()
    assert (cfg.detector.tau_high, cfg.detector.tau_low, cfg.detector.cooldown) == (0.6, 0.45, 180)
    assert cfg.triggers.lanes == 4 and cfg.match.fps == 60


def test_later_layers_win():
    cfg = build_config({"seed": "1", "trigger.cooldown": "10"}, {"seed": "2"})
    assert cfg.seed == 2 and cfg.triggers.cooldown == 10


def test_threshold_alone_moves_release():
    cfg = build_config({"detector.tau_high": "0.7"})
    assert cfg.detector.tau_low == pytest.approx(0.55)
    assert build_config({"detector.tau_high": "0.1"}).detector.tau_low == 0.0
    assert build_config({"detector.tau_high": "0.7", "detector.tau_low": "0.2"}).detector.tau_low == 0.2


def test_action_map_and_weights():
    cfg = build_config({"action.map.TAUNT": "SpecialAttack", "action.weight.Guard": "0.3"})
    assert cfg.actions()("TAUNT") is ActionClass.SPECIAL_ATTACK
    assert cfg.weight_table()[ActionClass.GUARD] == 0.3


def test_items_roundtrip_through_text():
    cfg = build_config({"seed": "5", "action.map.X": "Guard", "normalization": "batch"})
    assert build_config(parse_config_text(cfg.dumps())) == cfg


@pytest.mark.parametrize(
    "layer",
    [
        {"nope": "1"},
        {"seed": "x"},
        {"seed": "-1"},
        {"detector.tau_high": "nan"},
        {"detector.tau_high": "0.3", "detector.tau_low": "0.4"},
        {"normalization": "fancy"},
        {"action.weight.Idle": "0.1"},
        {"action.map.X": "Jump"},
        {"comment.lanes": "0"},
        {"match.fps": "0"},
        {"sim.aggression": "2"},
    ],
)
def test_invalid_values(layer):
    with pytest.raises(ConfigError):
        build_config(layer)


def test_config_file(tmp_path):
    path = tmp_path / "engine.conf"
    path.write_text("# tuned\nseed = 3\n\ntrigger.big_damage=0.2\n", encoding="utf-8")
    cfg = build_config(read_config_file(path))
    assert cfg.seed == 3 and cfg.triggers.big_damage == 0.2
    path.write_text("seed 3\n", encoding="utf-8")
    with pytest.raises(ConfigError, match=":1:"):
        read_config_file(path)
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "missing.conf")
