"""Command line: recognize, batch, bench and gen."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline, synthgen
from .config import ConfigError, PipelineConfig
from .pnm import CodecError, read_image

EXIT_ACCEPTED, EXIT_ERROR, EXIT_REJECTED = 0, 1, 2


def _config(path: Optional[str]) -> PipelineConfig:
    return PipelineConfig.load(path) if path else PipelineConfig()


def parse_mix(text: str) -> dict[str, float]:
    """``"blur=0.1,angle=0.2"`` to a fraction map; ``clean`` is the remainder."""
    mix: dict[str, float] = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"bad mix entry {part!r}; expected name=fraction")
        try:
            mix[key.strip()] = float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad fraction in {part!r}") from None
    mix.pop("clean", None)
    return mix


def cmd_recognize(args) -> int:
    cfg = _config(args.config)
    try:
        img = read_image(args.image)
    except (OSError, CodecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    res = pipeline.run_single(img, cfg, debug_dir=args.debug_dir)
    print(res.summary())
    return EXIT_ACCEPTED if res.accepted else EXIT_REJECTED


def cmd_batch(args) -> int:
    cfg = _config(args.config)
    report = pipeline.run_dataset(
        args.manifest,
        cfg,
        workers=args.workers,
        out_csv=args.out,
        check_value=args.check_value,
        include_timing=not args.no_timing,
    )
    print(report.table())
    return EXIT_ACCEPTED


def cmd_bench(args) -> int:
    cfg = _config(args.config)
    report = pipeline.bench(args.manifest, cfg, args.reps, args.single_thread, args.limit)
    print(report.table())
    return EXIT_ACCEPTED


def cmd_gen(args) -> int:
    mix = None if args.mix is None else args.mix
    manifest = synthgen.generate_dataset(args.n, args.out, mix=mix, seed=args.seed, workers=args.workers)
    print(manifest)
    return EXIT_ACCEPTED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pricetag", description="Price tag recognition.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("recognize", help="read the price on one image")
    r.add_argument("image")
    r.add_argument("--config")
    r.add_argument("--debug-dir", help="write annotated intermediate images here")
    r.set_defaults(func=cmd_recognize)

    b = sub.add_parser("batch", help="run a manifest and report metrics")
    b.add_argument("manifest")
    b.add_argument("--config")
    b.add_argument("--out", default="results.csv")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--check-value", action="store_true", help="a true positive must also read the right price")
    b.add_argument("--no-timing", action="store_true", help="leave total_us blank for byte-stable output")
    b.set_defaults(func=cmd_batch)

    m = sub.add_parser("bench", help="per-stage latency over a manifest")
    m.add_argument("manifest")
    m.add_argument("--config")
    m.add_argument("--reps", type=int, default=5)
    m.add_argument("--single-thread", action="store_true")
    m.add_argument("--limit", type=int, help="use only the first N images")
    m.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen", help="write a synthetic dataset")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--mix", type=parse_mix, help="e.g. blur=0.13,angle=0.11,absent=0.04")
    g.add_argument("--workers", type=int, default=1)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
