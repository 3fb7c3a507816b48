"""Live TCP service: one frame producer in, any number of feed consumers out.

A client's first line picks its role:

``ingest``
    then replay-format lines (optional ``#replay`` header, frame lines,
    optional ``#end`` trailer).
``feed``
    the client receives a ``config`` record, then every record broadcast
    from that moment on, as NDJSON.

Consumers have bounded queues.  When one is full its oldest records are
dropped and a ``drop`` record reports how many before the next delivery,
so a slow reader never holds up frame processing.
"""

from __future__ import annotations

import asyncio
import logging
import time
from collections import deque

import numpy as np

from .comments import CommentBank
from .config import EngineConfig
from .errors import ParseError
from .pipeline import StreamPipeline, config_record, encode
from .simulator import HEADER_TAG, TRAILER_TAG, parse_frame_line, parse_header

log = logging.getLogger(__name__)

HEARTBEAT_S = 5.0
QUEUE_SIZE = 1024


class Consumer:
    def __init__(self, writer: asyncio.StreamWriter, maxsize: int) -> None:
        self.writer = writer
        self.queue: deque[tuple[str, int, int]] = deque()
        self.maxsize = maxsize
        self.dropped = 0
        self.total_dropped = 0
        self.ready = asyncio.Event()
        self.closed = False

    def put(self, line: str, k: int, round_id: int) -> None:
        if len(self.queue) >= self.maxsize:
            self.queue.popleft()
            self.dropped += 1
            self.total_dropped += 1
        self.queue.append((line, k, round_id))
        self.ready.set()

    async def run(self) -> None:
        try:
            while not self.closed:
                await self.ready.wait()
                self.ready.clear()
                while self.queue:
                    if self.dropped:
                        _, k, rid = self.queue[0]
                        self.writer.write(encode({"type": "drop", "k": k, "round_id": rid, "dropped": self.dropped}).encode())
                        self.dropped = 0
                    line, _, _ = self.queue.popleft()
                    self.writer.write(line.encode())
                    await self.writer.drain()
        except (ConnectionError, OSError) as exc:
            log.info("feed consumer gone: %s", exc)
        finally:
            self.closed = True


class FeedService:
    def __init__(
        self,
        config: EngineConfig,
        bank: CommentBank,
        queue_size: int = QUEUE_SIZE,
        heartbeat_s: float = HEARTBEAT_S,
        deterministic: bool = False,
    ) -> None:
        self.config = config
        self.bank = bank
        self.queue_size = queue_size
        self.heartbeat_s = heartbeat_s
        self.deterministic = deterministic
        self.pipeline = StreamPipeline(config, bank)
        self.consumers: set[Consumer] = set()
        self.producer_active = False
        self.latencies_ms: deque[float] = deque(maxlen=1_000_000)
        self.frames = 0
        self.t0 = time.monotonic()
        self._last_send = self.t0
        self._server: asyncio.AbstractServer | None = None
        self._tasks: set[asyncio.Task] = set()
        self.port: int | None = None

    # -- broadcasting

    def broadcast(self, records: list[dict]) -> None:
        if not records:
            return
        now = time.monotonic()
        for rec in records:
            if not self.deterministic and "t_ms" in rec:
                rec = dict(rec, t_ms=int((now - self.t0) * 1000))
            line = encode(rec)
            k, rid = rec["k"], rec["round_id"]
            for c in list(self.consumers):
                if c.closed:
                    self.consumers.discard(c)
                else:
                    c.put(line, k, rid)
        self._last_send = now

    async def _heartbeat(self) -> None:
        while True:
            await asyncio.sleep(min(0.5, self.heartbeat_s / 4))
            now = time.monotonic()
            if now - self._last_send >= self.heartbeat_s:
                p = self.pipeline
                self.broadcast([{"type": "heartbeat", "k": p.last_k, "round_id": p.last_round_id,
                                 "t_ms": int((now - self.t0) * 1000)}])

    # -- connections

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            role = (await reader.readline()).decode("utf-8", "replace").strip()
            if role == "feed":
                await self._feed(writer)
            elif role == "ingest":
                await self._ingest(reader, writer)
            else:
                writer.write(b'{"type":"error","reason":"first line must be ingest or feed"}\n')
        except (ConnectionError, OSError) as exc:
            log.info("connection error: %s", exc)
        finally:
            try:
                writer.close()
            except Exception:  # pragma: no cover - transport already torn down
                pass

    async def _feed(self, writer: asyncio.StreamWriter) -> None:
        c = Consumer(writer, self.queue_size)
        p = self.pipeline
        c.put(encode(config_record(self.config, p.match, p.last_k, p.last_round_id)), p.last_k, p.last_round_id)
        self.consumers.add(c)
        try:
            await c.run()
        finally:
            self.consumers.discard(c)

    async def _ingest(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        if self.producer_active:
            writer.write(b'{"type":"error","reason":"another producer is connected"}\n')
            return
        self.producer_active = True
        pipe = self.pipeline
        actions = self.config.actions()
        lineno = 1
        finished = False
        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                t_start = time.perf_counter()
                lineno += 1
                line = raw.decode("utf-8", "replace").rstrip("\n")
                if not line:
                    continue
                if line.startswith(HEADER_TAG):
                    try:
                        match = parse_header(line, lineno)
                    except ParseError as exc:
                        log.warning("bad header from producer: %s", exc)
                        continue
                    self.broadcast(pipe.end_round())
                    pipe = self.pipeline = StreamPipeline(self.config, self.bank, match)
                    continue
                if line.startswith(TRAILER_TAG):
                    self.broadcast(pipe.end_round())
                    finished = True
                    continue
                try:
                    frame = parse_frame_line(line, lineno, actions)
                except ParseError as exc:
                    log.warning("malformed frame, aborting round: %s", exc)
                    self.broadcast(pipe.abort())
                    continue
                self.broadcast(pipe.push(frame))
                finished = False
                self.frames += 1
                self.latencies_ms.append((time.perf_counter() - t_start) * 1000)
        except (ConnectionError, OSError) as exc:
            log.info("producer connection error: %s", exc)
        finally:
            if pipe.in_round and not finished:
                last = pipe.prev
                ko = last is not None and (last.p1.hp == 0 or last.p2.hp == 0)
                self.broadcast(pipe.end_round("complete") if ko else pipe.abort("aborted"))
            self.producer_active = False

    # -- lifecycle

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self._server = await asyncio.start_server(self._handle, host, port)
        self.port = self._server.sockets[0].getsockname()[1]
        self._tasks.add(asyncio.ensure_future(self._heartbeat()))
        log.info("serving on %s:%s", host, self.port)

    async def stop(self) -> None:
        for t in self._tasks:
            t.cancel()
        for c in list(self.consumers):
            c.closed = True
            c.ready.set()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def serve_forever(self, host: str = "127.0.0.1", port: int = 0) -> None:
        await self.start(host, port)
        assert self._server is not None
        async with self._server:
            await self._server.serve_forever()

    def latency_stats(self) -> dict[str, float]:
        lat = np.array(self.latencies_ms)
        if lat.size == 0:
            return {"frames": 0, "median_ms": 0.0, "p99_ms": 0.0, "max_ms": 0.0}
        return {
            "frames": int(lat.size),
            "median_ms": float(np.median(lat)),
            "p99_ms": float(np.percentile(lat, 99)),
            "max_ms": float(lat.max()),
        }


def serve(port: int, config: EngineConfig, bank: CommentBank, host: str = "127.0.0.1",
          deterministic: bool = False) -> None:
    """Run the live service until interrupted."""
    service = FeedService(config, bank, deterministic=deterministic)
    try:
        asyncio.run(service.serve_forever(host, port))
    except KeyboardInterrupt:
        pass
