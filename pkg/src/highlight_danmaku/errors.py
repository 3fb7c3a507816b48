"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class HighlightDanmakuError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(HighlightDanmakuError):
    """A frame broke a state-model invariant; the round's ingestion aborts."""


class SequenceGap(InvariantViolation):
    def __init__(self, k: int, prev_k: int | None) -> None:
        expected = 1 if prev_k is None else prev_k + 1
        super().__init__(f"frame k={k} out of sequence (expected k={expected})")
        self.k = k
        self.prev_k = prev_k


class OutOfRange(InvariantViolation):
    def __init__(self, field: str, value: int, low: int, high: int) -> None:
        super().__init__(f"{field}={value} outside [{low}, {high}]")
        self.field = field
        self.value = value


class NonFiniteInput(HighlightDanmakuError, ValueError):
    """A cue or score value was NaN or infinite."""


class ParseError(HighlightDanmakuError):
    """Malformed bank, replay or config content.

    ``line`` is 1-based; ``column`` is the 1-based character offset within
    the line where the problem was found (1 when the whole line is bad).
    """

    def __init__(self, message: str, line: int, column: int = 1, source: str | None = None) -> None:
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{column}: {message}")
        self.reason = message
        self.line = line
        self.column = column
        self.source = source


class MissingTrigger(HighlightDanmakuError):
    def __init__(self, missing: list[str]) -> None:
        super().__init__("bank has no templates for trigger(s): " + ", ".join(missing))
        self.missing = missing


class EmptyLexicon(HighlightDanmakuError):
    def __init__(self) -> None:
        super().__init__("bank defines no lexicon words")


class UnresolvableSlot(HighlightDanmakuError):
    def __init__(self, slot: str, template: str) -> None:
        super().__init__(f"no value for slot «{slot}» in template {template!r}")
        self.slot = slot


class ConfigError(HighlightDanmakuError):
    """Invalid engine configuration (CLI exit code 2)."""
