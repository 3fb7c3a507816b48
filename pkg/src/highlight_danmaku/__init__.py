"""Highlight-driven bullet comments for fighting-game live streams."""

from .comments import CommentBank, CommentEngine, CommentEvent, Trigger, default_bank, load_bank, read_bank
from .config import EngineConfig, build_config
from .cues import ActionWeightTable, CueExtractor, CueId, CueVector
from .highlight import CueSeries, DetectorConfig, HighlightDetector, HighlightEngine, HighlightEvent, combine
from .pipeline import StreamPipeline, process_round, run_pipeline
from .simulator import SimConfig, load_replay, read_replay, simulate, write_replay
from .state import ActionClass, GameFrame, MatchConfig, PlayerState, RoundArrays, validate_frame

__version__ = "0.1.0"

__all__ = [
    "ActionClass",
    "ActionWeightTable",
    "CommentBank",
    "CommentEngine",
    "CommentEvent",
    "CueExtractor",
    "CueId",
    "CueSeries",
    "CueVector",
    "DetectorConfig",
    "EngineConfig",
    "GameFrame",
    "HighlightDetector",
    "HighlightEngine",
    "HighlightEvent",
    "MatchConfig",
    "PlayerState",
    "RoundArrays",
    "SimConfig",
    "StreamPipeline",
    "Trigger",
    "build_config",
    "combine",
    "default_bank",
    "load_bank",
    "load_replay",
    "process_round",
    "read_bank",
    "read_replay",
    "run_pipeline",
    "simulate",
    "validate_frame",
    "write_replay",
]
