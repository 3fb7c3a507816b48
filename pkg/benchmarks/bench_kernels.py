"""Compare the numba and numpy kernel flavours.

    python benchmarks/bench_kernels.py [--frames N] [--repeat R] [--pipeline-rounds R]

Kernel timings are best-of-R after one warm-up call (which also pays the
numba compile).  ``--pipeline-rounds`` additionally times the full batch
pipeline in a subprocess per flavour, selected through the environment flag.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from highlight_danmaku import kernels
from highlight_danmaku.simulator import _CLS_COUNT, _CLS_START, ATTACK_RATE, _params
from highlight_danmaku.state import MatchConfig

PIPELINE_SNIPPET = """
import io, time
from highlight_danmaku import kernels
from highlight_danmaku.comments import default_bank
from highlight_danmaku.config import build_config
from highlight_danmaku.pipeline import run_pipeline
from highlight_danmaku.simulator import SimConfig, simulate
run_pipeline(simulate(SimConfig(seed=99, rounds=2)), build_config(), default_bank(), io.StringIO())
t = time.perf_counter()
s = run_pipeline(simulate(SimConfig(seed=1, rounds={rounds})), build_config(), default_bank(), io.StringIO())
print(kernels.ACTIVE.name, s.frames, time.perf_counter() - t)
"""


def best_of(fn, args, repeat: int) -> float:
    fn(*args)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_cases(n: int):
    rng = np.random.default_rng(0)
    cfg = MatchConfig()
    raw = rng.random((n, 6))
    h = rng.random(n)
    idx = np.sort(rng.choice(n * 4, size=n // 10, replace=False)).astype(np.int64)
    u = rng.random((n, 2, 4))
    return [
        ("window_max", lambda k: k.window_max, (rng.random(n), 30)),
        ("highlight_series", lambda k: k.highlight_series, (raw,)),
        ("detect", lambda k: k.detect, (h, 0.6, 0.45, 180)),
        ("cooldown_select", lambda k: k.cooldown_select, (idx, 300)),
        ("simulate_round", lambda k: k.simulate_round,
         (u, cfg.max_hp, cfg.stage_width, n, 0.5 * ATTACK_RATE, _CLS_START, _CLS_COUNT, _params(cfg))),
    ]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--frames", type=int, default=200_000, help="rows per kernel call")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--pipeline-rounds", type=int, default=0, help="also time the full pipeline on R rounds")
    args = parser.parse_args(argv)

    if kernels.NUMBA is None:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1
    print(f"{'kernel':<18}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, pick, fargs in kernel_cases(args.frames):
        t_np = best_of(pick(kernels.NUMPY), fargs, args.repeat)
        t_nb = best_of(pick(kernels.NUMBA), fargs, args.repeat)
        print(f"{name:<18}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")

    if args.pipeline_rounds:
        print()
        for flag in ("0", "1"):
            env = dict(os.environ, HIGHLIGHT_DANMAKU_NUMBA=flag)
            out = subprocess.run(
                [sys.executable, "-c", PIPELINE_SNIPPET.format(rounds=args.pipeline_rounds)],
                env=env, capture_output=True, text=True, check=True,
            ).stdout.split()
            name, frames, secs = out[0], int(out[1]), float(out[2])
            print(f"pipeline[{name}]: {frames} frames in {secs:.2f} s ({frames / secs:,.0f} frames/s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
