"""Engine configuration: defaults, flat ``key=value`` files, CLI overrides.

Precedence is CLI > file > defaults.  ``EngineConfig.items()`` is the
canonical echo written into every output header.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .comments import TriggerParams
from .cues import ActionWeightTable
from .errors import ConfigError
from .highlight import DetectorConfig
from .state import DEFAULT_RAW_ACTIONS, ActionClass, ActionMap, MatchConfig

NORMALIZATION_MODES = ("streaming", "batch")
DEFAULT_RELEASE_GAP = 0.15


@dataclass(frozen=True)
class EngineConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    triggers: TriggerParams = field(default_factory=TriggerParams)
    action_weights: tuple[float, ...] = tuple(ActionWeightTable().array.tolist())
    action_window: int = 30
    action_map: tuple[tuple[str, str], ...] = ()
    move_names: str = "class"
    seed: int = 0
    match: MatchConfig = field(default_factory=MatchConfig)
    aggression: float = 0.5
    round_length: int = 3600
    normalization: str = "streaming"

    def weight_table(self) -> ActionWeightTable:
        return ActionWeightTable(dict(zip(ActionClass, self.action_weights)))

    def actions(self) -> ActionMap:
        table = dict(DEFAULT_RAW_ACTIONS)
        table.update({raw: ActionClass.from_key(cls) for raw, cls in self.action_map})
        return ActionMap(table)

    def items(self) -> list[tuple[str, str]]:
        d, t = self.detector, self.triggers
        out = [
            ("detector.tau_high", repr(d.tau_high)),
            ("detector.tau_low", repr(d.tau_low)),
            ("detector.cooldown", str(d.cooldown)),
            ("trigger.big_damage", repr(t.big_damage)),
            ("trigger.close_combat", repr(t.close_combat)),
            ("trigger.low_health", repr(t.low_health)),
            ("trigger.cooldown", str(t.cooldown)),
            ("comment.duplicate_window", str(t.duplicate_window)),
            ("comment.lanes", str(t.lanes)),
            ("comment.move_names", self.move_names),
            ("action.window", str(self.action_window)),
        ]
        out += [(f"action.weight.{c.key}", repr(w)) for c, w in zip(ActionClass, self.action_weights)]
        out += [(f"action.map.{raw}", cls) for raw, cls in self.action_map]
        out += [
            ("seed", str(self.seed)),
            ("match.max_hp", str(self.match.max_hp)),
            ("match.stage_width", str(self.match.stage_width)),
            ("match.fps", str(self.match.fps)),
            ("sim.aggression", repr(self.aggression)),
            ("sim.round_length", str(self.round_length)),
            ("normalization", self.normalization),
        ]
        return out

    def as_dict(self) -> dict[str, str]:
        return dict(self.items())

    def dumps(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.items())


def parse_config_text(text: str, source: str | None = None) -> dict[str, str]:
    """Read ``key=value`` lines; ``#`` starts a comment line."""
    out: dict[str, str] = {}
    where = f"{source}:" if source else "line "
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{where}{lineno}: expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out


def read_config_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def _num(key: str, value: str, kind: type):
    try:
        v = kind(value)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None
    if kind is float and v != v:
        raise ConfigError(f"{key}: NaN is not allowed")
    return v


def build_config(*layers: Mapping[str, str]) -> EngineConfig:
    """Merge override layers (later wins) onto the defaults."""
    merged: dict[str, str] = {}
    for layer in layers:
        merged.update(layer)
    base = EngineConfig()
    d, t = base.detector, base.triggers
    det = {"tau_high": d.tau_high, "tau_low": d.tau_low, "cooldown": d.cooldown}
    trig = {f: getattr(t, f) for f in ("big_damage", "close_combat", "low_health", "cooldown", "duplicate_window", "lanes")}
    weights = list(base.action_weights)
    amap: list[tuple[str, str]] = []
    match = {"max_hp": base.match.max_hp, "stage_width": base.match.stage_width, "fps": base.match.fps}
    other = {
        "seed": base.seed,
        "aggression": base.aggression,
        "round_length": base.round_length,
        "normalization": base.normalization,
        "move_names": base.move_names,
        "action_window": base.action_window,
    }
    for key, value in merged.items():
        if key in ("detector.tau_high", "detector.tau_low"):
            det[key.split(".")[1]] = _num(key, value, float)
        elif key == "detector.cooldown":
            det["cooldown"] = _num(key, value, int)
        elif key in ("trigger.big_damage", "trigger.close_combat", "trigger.low_health"):
            trig[key.split(".")[1]] = _num(key, value, float)
        elif key == "trigger.cooldown":
            trig["cooldown"] = _num(key, value, int)
        elif key in ("comment.duplicate_window", "comment.lanes"):
            trig[key.split(".")[1]] = _num(key, value, int)
        elif key == "comment.move_names":
            other["move_names"] = value
        elif key == "action.window":
            other["action_window"] = _num(key, value, int)
        elif key.startswith("action.weight."):
            try:
                cls = ActionClass.from_key(key[len("action.weight."):])
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
            weights[cls] = _num(key, value, float)
        elif key.startswith("action.map."):
            raw = key[len("action.map."):]
            try:
                ActionClass.from_key(value)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
            if not raw:
                raise ConfigError(f"{key}: empty raw action id")
            amap.append((raw, value))
        elif key == "seed":
            other["seed"] = _num(key, value, int)
        elif key.startswith("match.") and key[6:] in match:
            match[key[6:]] = _num(key, value, int)
        elif key == "sim.aggression":
            other["aggression"] = _num(key, value, float)
        elif key == "sim.round_length":
            other["round_length"] = _num(key, value, int)
        elif key == "normalization":
            other["normalization"] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if "detector.tau_high" in merged and "detector.tau_low" not in merged:
        det["tau_low"] = max(0.0, det["tau_high"] - DEFAULT_RELEASE_GAP)
    if other["normalization"] not in NORMALIZATION_MODES:
        raise ConfigError(f"normalization must be one of {NORMALIZATION_MODES}")
    if other["move_names"] not in ("class", "raw"):
        raise ConfigError("comment.move_names must be 'class' or 'raw'")
    if other["action_window"] < 1:
        raise ConfigError("action.window must be >= 1")
    if not 0.0 <= other["aggression"] <= 1.0:
        raise ConfigError("sim.aggression must be in [0, 1]")
    if other["round_length"] < 1:
        raise ConfigError("sim.round_length must be >= 1")
    if not 0 <= other["seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    cfg = EngineConfig(
        detector=DetectorConfig(**det),
        triggers=TriggerParams(**trig),
        action_weights=tuple(weights),
        action_window=other["action_window"],
        action_map=tuple(sorted(dict(amap).items())),
        move_names=other["move_names"],
        seed=other["seed"],
        match=MatchConfig(**match),
        aggression=other["aggression"],
        round_length=other["round_length"],
        normalization=other["normalization"],
    )
    cfg.weight_table()  # validates the weights
    return cfg
