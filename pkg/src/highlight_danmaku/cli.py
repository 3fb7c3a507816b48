"""Command line entry point.

Exit codes: 0 success, 1 input error, 2 config error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from contextlib import ExitStack

from . import __version__
from .comments import default_bank, read_bank
from .config import build_config, read_config_file
from .errors import ConfigError, EmptyLexicon, InvariantViolation, MissingTrigger, ParseError
from .pipeline import run_pipeline
from .simulator import SimConfig, read_replay, simulate, write_replay

log = logging.getLogger("highlight_danmaku")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bank", help="comment bank file (default: bundled bank)")
    p.add_argument("--config", help="engine config file (key=value lines)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--threshold", type=float, help="highlight onset threshold (detector.tau_high)")
    p.add_argument("--seed", type=int, help="random seed for comment selection and simulation")
    p.add_argument("--export-timeline", metavar="FILE", help="write the per-frame cue/score CSV")
    p.add_argument("--batch-normalize", action="store_true", help="timeline uses whole-round maxima")
    p.add_argument("--deterministic", action="store_true",
                   help="stream-clock timestamps (k*1000/fps); implies --no-throttle")
    p.add_argument("--no-throttle", action="store_true", help="run flat out instead of at frame rate")
    p.add_argument("-o", "--output", help="write the feed here instead of stdout")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="highlight-danmaku", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("replay", help="run a replay file through the engine")
    p.add_argument("file")
    _shared(p)

    p = sub.add_parser("simulate", help="run simulated rounds through the engine")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--aggression", type=float)
    p.add_argument("--round-length", type=int)
    p.add_argument("--save-replay", metavar="FILE", help="also write the simulated frames as a replay")
    _shared(p)

    p = sub.add_parser("serve", help="accept live frames and broadcast the feed over TCP")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    _shared(p)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    if args.threshold is not None:
        out["detector.tau_high"] = repr(args.threshold)
    if args.seed is not None:
        out["seed"] = str(args.seed)
    if args.batch_normalize:
        out["normalization"] = "batch"
    if getattr(args, "aggression", None) is not None:
        out["sim.aggression"] = repr(args.aggression)
    if getattr(args, "round_length", None) is not None:
        out["sim.round_length"] = str(args.round_length)
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        layers = [read_config_file(args.config)] if args.config else []
        config = build_config(*layers, _overrides(args))
        if args.command == "serve" and args.export_timeline:
            raise ConfigError("--export-timeline is not available with serve")
        if args.command == "simulate" and args.rounds < 0:
            raise ConfigError("--rounds must be >= 0")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        bank = read_bank(args.bank) if args.bank else default_bank()
        if args.command == "serve":
            from .service import serve

            serve(args.port, config, bank, args.host, deterministic=args.deterministic)
            return EXIT_OK
        if args.command == "replay":
            replay = read_replay(args.file, config.actions())
            match, rounds = replay.cfg, replay.rounds
        else:
            sim = SimConfig(args.seed if args.seed is not None else config.seed, args.rounds,
                            config.round_length, config.aggression, config.match)
            match = config.match
            rounds = simulate(sim)
            if args.save_replay:
                rounds = list(rounds)
                write_replay(rounds, match, args.save_replay)
        throttle = not (args.no_throttle or args.deterministic)
        with ExitStack() as stack:
            if args.output:
                sink = stack.enter_context(open(args.output, "w", encoding="utf-8", newline="\n"))
            else:
                sys.stdout.reconfigure(encoding="utf-8")
                sink = sys.stdout
            timeline = (
                stack.enter_context(open(args.export_timeline, "w", encoding="utf-8", newline="\n"))
                if args.export_timeline
                else None
            )
            summary = run_pipeline(rounds, config, bank, sink, match, timeline, args.deterministic, throttle)
        log.info("%s", summary)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, InvariantViolation, MissingTrigger, EmptyLexicon, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
