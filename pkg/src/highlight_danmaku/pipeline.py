"""Frame stream -> cues -> highlight score -> comments, as NDJSON records.

Two drivers share one record vocabulary:

* :class:`StreamPipeline` handles one frame at a time (live ingest).
* :func:`process_round` handles a whole round of columns at once using the
  kernels; replay and simulate use it.

Both produce byte-identical records for the same input.
"""

from __future__ import annotations

import io
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, TextIO

import numpy as np

from . import kernels
from .comments import CommentBank, CommentEngine, Fired, Trigger, TriggerParams, match_triggers
from .config import EngineConfig
from .cues import CueExtractor, CueId, extract_round
from .errors import InvariantViolation
from .highlight import HighlightEngine, RoundScores, batch_normalize, score_round
from .state import ActionClass, GameFrame, MatchConfig, PlayerState, RoundArrays, validate_frame

log = logging.getLogger(__name__)

RECORD_TYPES = ("config", "comment", "highlight", "round", "heartbeat", "drop")
PROTOCOL_VERSION = 1


def encode(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n"


def frame_ms(k: int, fps: int) -> int:
    """Stream time of frame ``k`` in whole milliseconds."""
    return k * 1000 // fps


def config_record(config: EngineConfig, match: MatchConfig, k: int = 0, round_id: int = 0) -> dict:
    return {
        "type": "config",
        "k": k,
        "round_id": round_id,
        "version": PROTOCOL_VERSION,
        "match": {"max_hp": match.max_hp, "stage_width": match.stage_width, "fps": match.fps},
        "config": config.as_dict(),
    }


def _round_start(round_id: int) -> dict:
    return {"type": "round", "k": 1, "round_id": round_id, "event": "start"}


def _round_end(round_id: int, k: int, reason: str, highlights: int) -> dict:
    return {"type": "round", "k": k, "round_id": round_id, "event": "end", "reason": reason,
            "frames": k, "highlights": highlights}


def _onset(round_id: int, k: int, h: float) -> dict:
    return {"type": "highlight", "k": k, "round_id": round_id, "event": "onset", "h": h}


def _release(round_id: int, k: int, onset_k: int, peak_k: int, peak_h: float) -> dict:
    return {"type": "highlight", "k": k, "round_id": round_id, "event": "release",
            "onset_k": onset_k, "peak_k": peak_k, "peak_h": peak_h}


def _comment(ev, t_ms: int) -> dict:
    return {"type": "comment", "k": ev.k, "round_id": ev.round_id, "t_ms": t_ms, "kind": ev.kind,
            "trigger": ev.trigger.key, "text": ev.text, "score": ev.score, "lane": ev.lane}


# ---------------------------------------------------------------- per frame


class StreamPipeline:
    """Online driver.  Invalid frames abort their round instead of raising."""

    def __init__(self, config: EngineConfig, bank: CommentBank, match: MatchConfig | None = None) -> None:
        self.config = config
        self.match = match or config.match
        self.extractor = CueExtractor(self.match, config.weight_table(), config.action_window)
        self.engine = HighlightEngine(config.detector)
        self.comments = CommentEngine(bank, config.triggers, config.seed, config.move_names)
        self.round_id: int | None = None
        self.prev: GameFrame | None = None
        self.skip_round: int | None = None
        self.last_k = 0
        self.last_round_id = 0
        self.onsets = 0
        self.round_onsets = 0
        self.frames = 0
        self.rounds = 0
        self.aborted = 0

    @property
    def in_round(self) -> bool:
        return self.round_id is not None

    def end_round(self, reason: str = "complete") -> list[dict]:
        if self.round_id is None:
            return []
        rec = _round_end(self.round_id, self.prev.k, reason, self.round_onsets)
        self.round_id = None
        self.prev = None
        return [rec]

    def abort(self, reason: str = "aborted") -> list[dict]:
        """Close the open round (if any) and ignore the rest of its frames."""
        if self.round_id is not None:
            self.skip_round = self.round_id
            self.aborted += 1
        return self.end_round(reason)

    def push(self, frame: GameFrame) -> list[dict]:
        out: list[dict] = []
        if frame.round_id == self.skip_round:
            return out
        self.skip_round = None
        if self.round_id is not None and frame.round_id != self.round_id:
            out += self.end_round("complete")
        try:
            validate_frame(frame, self.match, None if self.prev is None else self.prev.k)
        except InvariantViolation as exc:
            log.warning("round %s aborted: %s", frame.round_id, exc)
            out += self.abort()
            self.skip_round = frame.round_id
            return out
        rid = frame.round_id
        if self.round_id is None:
            self.round_id = rid
            self.rounds += 1
            self.round_onsets = 0
            self.extractor.reset()
            self.engine.reset()
            self.comments.reset_round(rid)
            out.append(_round_start(rid))
        score = self.engine.push(self.extractor.extract(frame))
        if score.released is not None:
            ev = score.released
            out.append(_release(rid, frame.k, ev.onset_k, ev.peak_k, ev.peak_h))
        if score.onset is not None:
            self.onsets += 1
            self.round_onsets += 1
            out.append(_onset(rid, frame.k, score.h))
        fired = match_triggers(frame, self.prev, self.match, self.config.triggers)
        if fired or score.onset is not None:
            t = frame_ms(frame.k, self.match.fps)
            for ev in self.comments.generate(frame, fired, score.onset, score.h, t):
                out.append(_comment(ev, t))
        self.prev = frame
        self.last_k = frame.k
        self.last_round_id = rid
        self.frames += 1
        return out


# ---------------------------------------------------------------- per round


def round_triggers(arrays: RoundArrays, match: MatchConfig, params: TriggerParams) -> list[tuple[int, Trigger, int]]:
    """Vectorised ``match_triggers`` over a round: sorted ``(k, trigger, actor)``.

    ``actor`` is 0 when the trigger has none.
    """
    n = len(arrays)
    if n == 0:
        return []
    found: list[tuple[np.ndarray, Trigger, np.ndarray | int]] = [(np.array([0]), Trigger.ROUND_START, 0)]
    if n > 1:
        hp, x, act = arrays.hp, arrays.x, arrays.action
        max_hp = match.max_hp
        now, before = hp[1:], hp[:-1]
        for p in (0, 1):
            drop = (before[:, 1 - p] - now[:, 1 - p]) / max_hp >= params.big_damage
            found.append((np.flatnonzero(drop) + 1, Trigger.BIG_DAMAGE, p + 1))
        d = 1 - np.abs(x[:, 0] - x[:, 1]) / match.stage_width
        near = 1 - params.close_combat
        close = (d[1:] >= near) & (near > d[:-1])
        found.append((np.flatnonzero(close) + 1, Trigger.CLOSE_COMBAT, 0))
        for trig, cls in ((Trigger.SPECIAL_MOVE, ActionClass.SPECIAL_ATTACK), (Trigger.SUPER_MOVE, ActionClass.SUPER_ATTACK)):
            for p in (0, 1):
                into = (act[1:, p] == cls) & (act[:-1, p] != cls)
                found.append((np.flatnonzero(into) + 1, trig, p + 1))
        f = params.low_health
        for p in (0, 1):
            low = (now[:, p] / max_hp < f) & (f <= before[:, p] / max_hp)
            found.append((np.flatnonzero(low) + 1, Trigger.LOW_HEALTH, p + 1))
        ko = ((now == 0) & (before > 0)).any(axis=1)
        idx = np.flatnonzero(ko) + 1
        down = hp[idx] == 0
        winner = np.where(down.all(axis=1), 0, np.where(down[:, 0], 2, 1))
        found.append((idx, Trigger.ROUND_END, winner))
    out = []
    for idx, trig, actor in found:
        actors = np.broadcast_to(actor, idx.shape).tolist()
        out.extend((j + 1, trig, a) for j, a in zip(idx.tolist(), actors))
    out.sort()
    return out


def _frame_at(arrays: RoundArrays, j: int) -> GameFrame:
    h, x, a, r = arrays.hp[j], arrays.x[j], arrays.action[j], arrays.raw[j]
    v = arrays.vocab
    return GameFrame(
        j + 1,
        arrays.round_id,
        PlayerState(int(h[0]), int(x[0]), ActionClass(int(a[0])), v[r[0]]),
        PlayerState(int(h[1]), int(x[1]), ActionClass(int(a[1])), v[r[1]]),
    )


@dataclass(slots=True)
class RoundResult:
    round_id: int
    records: list[dict]
    scores: RoundScores
    onsets: int
    highlight_comments: int


def process_round(
    arrays: RoundArrays,
    match: MatchConfig,
    config: EngineConfig,
    comments: CommentEngine,
) -> RoundResult:
    """Batch twin of pushing every frame of a round through :class:`StreamPipeline`."""
    rid = arrays.round_id
    raw = extract_round(arrays, match, config.weight_table(), config.action_window)
    scores = score_round(raw, config.detector)
    comments.reset_round(rid)
    n = len(arrays)
    if n == 0:
        return RoundResult(rid, [], scores, 0, 0)

    cooldown = config.triggers.cooldown
    fired_at: dict[int, list[Fired]] = {}
    by_trigger: dict[Trigger, list[tuple[int, int]]] = {}
    for k, trig, actor in round_triggers(arrays, match, config.triggers):
        by_trigger.setdefault(trig, []).append((k, actor))
    for trig in sorted(by_trigger):
        items = by_trigger[trig]
        keep = kernels.ACTIVE.cooldown_select(np.array([k for k, _ in items], dtype=np.int64), cooldown)
        comments.metrics.suppressed_cooldown += int(len(items) - keep.sum())
        for (k, actor), ok in zip(items, keep.tolist()):
            if ok:
                fired_at.setdefault(k, []).append(Fired(trig, actor or None))
    for k in fired_at:
        fired_at[k].sort()

    onsets: dict[int, tuple] = {}
    releases: dict[int, tuple] = {}
    for onset_k, peak_k, peak_h, release_k in scores.events.tolist():
        onsets[int(onset_k)] = (int(onset_k), int(peak_k), peak_h)
        if release_k > 0:
            releases[int(release_k)] = (int(onset_k), int(peak_k), peak_h)

    h = scores.h
    fps = match.fps
    records = [_round_start(rid)]
    hl_comments = 0
    for k in sorted(set(fired_at) | set(onsets) | set(releases)):
        if k in releases:
            records.append(_release(rid, k, *releases[k]))
        onset = onsets.get(k)
        hk = float(h[k - 1])
        if onset is not None:
            records.append(_onset(rid, k, hk))
        fired = fired_at.get(k, [])
        if fired or onset is not None:
            t = frame_ms(k, fps)
            for ev in comments.generate(_frame_at(arrays, k - 1), fired, onset, hk, t):
                records.append(_comment(ev, t))
                hl_comments += ev.kind == "highlight"
    records.append(_round_end(rid, n, "complete", len(onsets)))
    return RoundResult(rid, records, scores, len(onsets), hl_comments)


# ---------------------------------------------------------------- timeline


TIMELINE_COLUMNS = (
    ["k"]
    + [f"raw_{c.column}" for c in CueId]
    + [f"smoothed_{c.column}" for c in CueId]
    + ["h", "highlight"]
)


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def timeline_lines(scores: RoundScores, mode: str = "streaming") -> list[str]:
    """One CSV line per frame: k, six raw cues, six smoothed cues, H, flag."""
    if mode == "batch" and scores.raw.shape[0]:
        smoothed, h = batch_normalize(scores.raw, scores.cma)
    else:
        smoothed, h = scores.smoothed, scores.h
    out = []
    rows = np.concatenate([scores.raw, smoothed, h[:, None]], axis=1).tolist()
    for j, (row, flag) in enumerate(zip(rows, scores.active.tolist()), 1):
        out.append(",".join([str(j), *map(_fmt, row), "true" if flag else "false"]))
    return out


def timeline_header(config: EngineConfig, match: MatchConfig, mode: str) -> list[str]:
    lines = [f"# {k}={v}" for k, v in config.items()]
    lines += [f"# timeline.mode={mode}", f"# match.fps_source={match.fps}", ",".join(TIMELINE_COLUMNS)]
    return lines


# ---------------------------------------------------------------- driver


@dataclass
class RunSummary:
    rounds: int = 0
    frames: int = 0
    onsets: int = 0
    highlight_comments: int = 0
    comments: int = 0
    records: int = 0
    metrics: dict = field(default_factory=dict)


class Emitter:
    """Writes records, optionally paced to wall-clock frame time.

    ``deterministic`` keeps the stream-clock ``t_ms``; otherwise ``t_ms`` is
    replaced by milliseconds since the first frame, from a monotonic clock.
    """

    def __init__(self, sink: TextIO, fps: int, deterministic: bool, throttle: bool,
                 clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep) -> None:
        self.sink = sink
        self.fps = fps
        self.deterministic = deterministic
        self.throttle = throttle
        self.clock = clock
        self.sleep = sleep
        self.t0 = clock()
        self.count = 0

    def emit(self, record: dict, stream_frame: int = 0) -> None:
        if self.throttle:
            due = self.t0 + stream_frame / self.fps
            wait = due - self.clock()
            if wait > 0:
                self.sleep(wait)
        if not self.deterministic and "t_ms" in record:
            record = dict(record, t_ms=int((self.clock() - self.t0) * 1000))
        self.sink.write(encode(record))
        self.count += 1


def run_pipeline(
    rounds: Iterable[RoundArrays],
    config: EngineConfig,
    bank: CommentBank,
    sink: TextIO | None = None,
    match: MatchConfig | None = None,
    timeline: TextIO | None = None,
    deterministic: bool = True,
    throttle: bool = False,
) -> RunSummary:
    """Drive every round through the batch path and write the feed to ``sink``."""
    match = match or config.match
    sink = sink if sink is not None else io.StringIO()
    emitter = Emitter(sink, match.fps, deterministic, throttle)
    engine = CommentEngine(bank, config.triggers, config.seed, config.move_names)
    summary = RunSummary()
    emitter.emit(config_record(config, match))
    mode = config.normalization
    if timeline is not None:
        timeline.write("\n".join(timeline_header(config, match, mode)) + "\n")
    offset = 0
    for arrays in rounds:
        arrays.validate(match)
        result = process_round(arrays, match, config, engine)
        for rec in result.records:
            emitter.emit(rec, offset + rec["k"])
        if timeline is not None and len(arrays):
            timeline.write("\n".join(timeline_lines(result.scores, mode)) + "\n")
        offset += len(arrays)
        summary.rounds += 1
        summary.frames += len(arrays)
        summary.onsets += result.onsets
        summary.highlight_comments += result.highlight_comments
    summary.records = emitter.count
    summary.metrics = engine.metrics.as_dict()
    summary.comments = summary.metrics["emitted"]
    return summary


def stream_frames(frames: Iterable[GameFrame], config: EngineConfig, bank: CommentBank,
                  match: MatchConfig | None = None) -> list[dict]:
    """Run frames through :class:`StreamPipeline`; returns all records."""
    pipe = StreamPipeline(config, bank, match)
    out = [config_record(config, pipe.match)]
    for frame in frames:
        out += pipe.push(frame)
    out += pipe.end_round()
    return out
