from __future__ import annotations

import asyncio
import json

from highlight_danmaku.comments import default_bank
from highlight_danmaku.config import build_config
from highlight_danmaku.service import Consumer, FeedService
from highlight_danmaku.simulator import SimConfig, format_header, load_replay, simulate, write_replay
from highlight_danmaku.state import MatchConfig


def replay_lines(rounds=1, length=600, seed=1):
    text = write_replay(simulate(SimConfig(seed=seed, rounds=rounds, round_length_frames=length)), MatchConfig())
    return text.splitlines()


async def connect(port, role):
    reader, writer = await asyncio.open_connection("127.0.0.1", port)
    writer.write(f"{role}\n".encode())
    await writer.drain()
    return reader, writer


async def read_until(reader, pred, timeout=5.0):
    out = []
    async def loop():
        while True:
            line = await reader.readline()
            if not line:
                return
            rec = json.loads(line)
            out.append(rec)
            if pred(rec):
                return
    await asyncio.wait_for(loop(), timeout)
    return out


def is_round_end(rec):
    return rec["type"] == "round" and rec["event"] == "end"


async def settle(service, frames):
    for _ in range(500):
        if service.pipeline.frames >= frames:
            return
        await asyncio.sleep(0.01)


def run(coro):
    return asyncio.run(asyncio.wait_for(coro, 30))


def make_service(**kw):
    return FeedService(build_config(), default_bank(), deterministic=True, **kw)


def test_two_consumers_identical_streams():
    async def scenario():
        svc = make_service()
        await svc.start()
        (r1, _), (r2, _) = await connect(svc.port, "feed"), await connect(svc.port, "feed")
        await asyncio.sleep(0.05)
        _, wp = await connect(svc.port, "ingest")
        wp.write(("\n".join(replay_lines()) + "\n").encode())
        await wp.drain()
        a = await read_until(r1, is_round_end)
        b = await read_until(r2, is_round_end)
        wp.close()
        await svc.stop()
        return a, b

    a, b = run(scenario())
    assert a == b
    assert a[0]["type"] == "config" and a[1] == {"type": "round", "k": 1, "round_id": 1, "event": "start"}
    assert a[-1]["reason"] == "complete"


def test_mid_round_join_gets_config_then_live_events():
    async def scenario():
        svc = make_service()
        await svc.start()
        lines = replay_lines(length=400)
        _, wp = await connect(svc.port, "ingest")
        wp.write(("\n".join(lines[:201]) + "\n").encode())
        await wp.drain()
        await settle(svc, 200)
        reader, _ = await connect(svc.port, "feed")
        await asyncio.sleep(0.05)
        wp.write(("\n".join(lines[201:]) + "\n").encode())
        await wp.drain()
        got = await read_until(reader, is_round_end)
        await svc.stop()
        return got

    got = run(scenario())
    assert got[0]["type"] == "config" and (got[0]["k"], got[0]["round_id"]) == (200, 1)
    assert all(r["k"] > 200 for r in got[1:])
    assert got[-1]["k"] == 400


def test_producer_disconnect_aborts_round_and_service_continues():
    async def scenario():
        svc = make_service()
        await svc.start()
        reader, _ = await connect(svc.port, "feed")
        await asyncio.sleep(0.05)
        lines = replay_lines(length=600)
        _, wp = await connect(svc.port, "ingest")
        wp.write(("\n".join(lines[:100]) + "\n").encode())
        await wp.drain()
        wp.close()
        first = await read_until(reader, is_round_end)
        _, wp = await connect(svc.port, "ingest")
        wp.write(("\n".join(lines) + "\n").encode())
        await wp.drain()
        second = await read_until(reader, is_round_end)
        await svc.stop()
        return first, second

    first, second = run(scenario())
    assert first[-1]["reason"] == "aborted" and first[-1]["k"] == 99
    assert second[0]["type"] == "round" and second[0]["event"] == "start"
    assert second[-1]["reason"] == "complete" and second[-1]["k"] == 600


def test_malformed_live_frame_aborts_only_that_round():
    async def scenario():
        svc = make_service()
        await svc.start()
        reader, _ = await connect(svc.port, "feed")
        await asyncio.sleep(0.05)
        lines = replay_lines(rounds=2, length=50)
        body = lines[1:-1]
        body[10] = "garbage"
        _, wp = await connect(svc.port, "ingest")
        wp.write(("\n".join([lines[0], *body, lines[-1]]) + "\n").encode())
        await wp.drain()
        got = await read_until(reader, lambda r: is_round_end(r) and r["round_id"] == 2)
        await svc.stop()
        return got

    ends = [r for r in run(scenario()) if r["type"] == "round" and r["event"] == "end"]
    assert [(e["round_id"], e["reason"], e["k"]) for e in ends] == [(1, "aborted", 10), (2, "complete", 50)]


def test_heartbeat_on_silence():
    async def scenario():
        svc = make_service(heartbeat_s=0.2)
        await svc.start()
        reader, _ = await connect(svc.port, "feed")
        got = await read_until(reader, lambda r: r["type"] == "heartbeat", timeout=3)
        await svc.stop()
        return got

    got = run(scenario())
    assert got[-1]["type"] == "heartbeat" and "k" in got[-1] and "round_id" in got[-1]


def test_unknown_role_is_rejected():
    async def scenario():
        svc = make_service()
        await svc.start()
        reader, _ = await connect(svc.port, "hello")
        line = await reader.readline()
        await svc.stop()
        return json.loads(line)

    assert run(scenario())["type"] == "error"


def test_second_producer_rejected():
    async def scenario():
        svc = make_service()
        await svc.start()
        _, w1 = await connect(svc.port, "ingest")
        await asyncio.sleep(0.05)
        r2, _ = await connect(svc.port, "ingest")
        line = await r2.readline()
        w1.close()
        await svc.stop()
        return json.loads(line)

    assert "another producer" in run(scenario())["reason"]


class StalledWriter:
    """A transport whose drain never completes, like a reader that stopped reading."""

    def __init__(self):
        self.data = []
        self.gate = asyncio.Event()

    def write(self, b):
        self.data.append(b)

    async def drain(self):
        await self.gate.wait()


def test_slow_consumer_drops_oldest_and_reports():
    async def scenario():
        svc = make_service(queue_size=3)
        writer = StalledWriter()
        consumer = Consumer(writer, svc.queue_size)
        svc.consumers.add(consumer)
        task = asyncio.ensure_future(consumer.run())
        await asyncio.sleep(0)
        lines = replay_lines(length=3600)
        frames = list(load_replay("\n".join(lines) + "\n").frames())
        for f in frames:
            svc.broadcast(svc.pipeline.push(f))
        assert svc.pipeline.frames == 3600  # processing never waited on the consumer
        writer.gate.set()
        await asyncio.sleep(0.05)
        consumer.closed = True
        consumer.ready.set()
        await task
        return [json.loads(b) for b in writer.data], consumer

    records, consumer = run(scenario())
    drops = [r for r in records if r["type"] == "drop"]
    assert consumer.total_dropped > 0
    assert sum(d["dropped"] for d in drops) == consumer.total_dropped
    assert is_round_end(records[-1]) or records[-1]["type"] == "comment"


def test_header_switches_match_config():
    async def scenario():
        svc = make_service()
        await svc.start()
        _, wp = await connect(svc.port, "ingest")
        wp.write((format_header(MatchConfig(100, 320, 30)) + "\n").encode())
        await wp.drain()
        await asyncio.sleep(0.1)
        match = svc.pipeline.match
        reader, _ = await connect(svc.port, "feed")
        first = await read_until(reader, lambda r: True)
        wp.close()
        await svc.stop()
        return match, first[0]

    match, config = run(scenario())
    assert match == MatchConfig(100, 320, 30)
    assert config["match"] == {"max_hp": 100, "stage_width": 320, "fps": 30}
