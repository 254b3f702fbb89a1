"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import config as config_mod
from .config import ScenarioConfig
from .errors import ConfigInvalid, InvariantViolation, ShapeMismatch
from .simulation import compare_runs, run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INVARIANT = 4


def atomic_write(path: str | Path, text: str) -> None:
    """Write ``text`` to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _resolve(path: str) -> Path:
    """A file path, or the name of a bundled scenario such as ``default``."""
    p = Path(path)
    if not p.exists() and not p.suffix and config_mod.bundled_path(path).exists():
        return config_mod.bundled_path(path)
    return p


def _load(path: str, seed: Optional[int]) -> ScenarioConfig:
    cfg = config_mod.load(_resolve(path))
    return cfg.with_seed(seed) if seed is not None else cfg


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _guard(fn):
    """Map the error taxonomy onto exit codes."""

    def wrapped(args) -> int:
        try:
            return fn(args)
        except ConfigInvalid as exc:
            _err(f"config error: {exc}")
            return EXIT_CONFIG
        except ShapeMismatch as exc:
            _err(f"config error: {exc}")
            return EXIT_CONFIG
        except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
            _err(f"I/O error: {exc}")
            return EXIT_IO
        except InvariantViolation as exc:
            _err(f"invariant violation: {exc}")
            for event in exc.trace[-50:]:
                _err(f"  {event}")
            return EXIT_INVARIANT

    return wrapped


@_guard
def cmd_validate(args) -> int:
    cfg = config_mod.load(_resolve(args.config))
    print(f"OK {cfg.name}")
    return EXIT_OK


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


@_guard
def cmd_run(args) -> int:
    cfg = _load(args.config, args.seed)
    report = run_scenario(cfg)
    _emit(report.to_jsonl(), args.out)
    if args.out:
        print(report.summary_table())
    return EXIT_OK


@_guard
def cmd_compare(args) -> int:
    variant_cfg = _load(args.config, args.seed)
    if args.baseline:
        baseline_cfg = _load(args.baseline, args.seed)
    else:
        baseline_cfg = variant_cfg.baseline()
    baseline = run_scenario(baseline_cfg)
    variant = run_scenario(variant_cfg)
    diff = compare_runs(baseline, variant)
    record = {
        "record": "compare",
        "baseline": baseline_cfg.name,
        "variant": variant_cfg.name,
        "seed": variant_cfg.seed,
        **diff.as_dict(),
        "variant_adversary": variant.adversary,
    }
    _emit(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n", args.out)
    if args.out:
        print(f"adversary share delta: {record['adversary_share_delta']}")
    return EXIT_OK


@_guard
def cmd_bench(args) -> int:
    cfg = _load(args.config, args.seed)
    if args.ticks is not None:
        cfg = replace(cfg, ticks=args.ticks)
    report = run_scenario(cfg)
    cycles = report.orders["confirmed"]
    rate = report.cycles_per_second
    line = {
        "record": "bench",
        "scenario": cfg.name,
        "cycles": cycles,
        "wall_seconds": round(report.wall_seconds, 6),
        "cycles_per_second": round(rate, 3),
    }
    print(f"{cycles} full task cycles in {report.wall_seconds:.3f} s: {rate:.1f} cycles/sec")
    if args.out:
        atomic_write(args.out, json.dumps(line, sort_keys=True) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aimarket", description="Marketplace protocol simulator")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("config", help="scenario TOML path or bundled scenario name")
    p.set_defaults(func=cmd_validate)

    for verb, fn, helptext in (
        ("run", cmd_run, "run a scenario and write the metrics report"),
        ("compare", cmd_compare, "run a baseline and an adversarial variant and diff them"),
        ("bench", cmd_bench, "measure full task cycles per second"),
    ):
        p = sub.add_parser(verb, help=helptext)
        p.add_argument("config", help="scenario TOML path or bundled scenario name")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--out", "-o", default=None, help="output path (default: stdout)")
        if verb == "compare":
            p.add_argument("--baseline", default=None, help="baseline scenario (default: variant minus adversaries)")
        if verb == "bench":
            p.add_argument("--ticks", type=int, default=None, help="override the tick count")
        p.set_defaults(func=fn)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
