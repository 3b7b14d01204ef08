"""Command-line entry point: ``curvlab validate|run|gallery|invariant``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, gallery
from .config import SEED_ENV, InvariantRequest, build_config, load_config
from .errors import ConfigError, CurvlabError, GeometryError
from .invariants import KINDS, canonical_partition
from .runner import EXIT_CONFIG, EXIT_ENGINE, EXIT_PASS, evaluate_request, run


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curvlab", description=__doc__)
    p.add_argument("--version", action="version", version=f"curvlab {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    v = sub.add_parser("validate", help="parse and validate a configuration file")
    v.add_argument("config", type=Path)

    r = sub.add_parser("run", help="run invariant requests and checks from a configuration")
    r.add_argument("config", type=Path)
    r.add_argument("--out", type=Path, help="write the JSON report here")
    r.add_argument("--seed", type=int, help=f"override the seed (default: settings, ${SEED_ENV})")
    r.add_argument("--jobs", type=int, help="worker processes")
    r.add_argument("--resolution", type=int, help="quadrature resolution per axis")
    r.add_argument("--quiet", action="store_true", help="suppress the summary table")

    g = sub.add_parser("gallery", help="write the built-in gallery configurations")
    g.add_argument("directory", type=Path)

    i = sub.add_parser("invariant", help="one-shot invariant query")
    i.add_argument("manifold", help="gallery manifold name (or one from --config)")
    i.add_argument("point", type=_floats, help="comma-separated coordinates")
    i.add_argument("partition", type=_ints, help="comma-separated block sizes")
    i.add_argument("kind", choices=KINDS)
    i.add_argument("--config", type=Path, help="resolve the manifold from this configuration")
    i.add_argument("--distributions", default="",
                   help="comma-separated distributions spanning the host (default: T_xM)")
    i.add_argument("--seed", type=int)
    return p


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    reg = cfg.registry
    print(f"{args.config}: ok ({len(reg.charts)} manifolds, {len(reg.distributions)} "
          f"distributions, {len(reg.immersions)} immersions, {len(cfg.invariants)} invariant "
          f"requests, {len(cfg.checks)} checks)")
    return EXIT_PASS


def _cmd_run(args) -> int:
    cfg = load_config(args.config).with_overrides(args.seed, args.resolution, args.jobs)
    report = run(cfg)
    text = report.to_json()
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    if not args.quiet:
        print(report.summary_table())
    if not args.out and args.quiet:
        sys.stdout.write(text)
    return report.exit_code


def _cmd_gallery(args) -> int:
    for path in gallery.write_gallery(args.directory):
        print(path)
    return EXIT_PASS


def _cmd_invariant(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = build_config(gallery.suite())
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    names = tuple(n for n in args.distributions.split(",") if n)
    try:
        req = InvariantRequest(args.manifold, args.point, canonical_partition(args.partition),
                               args.kind, names)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    chart = cfg.registry.chart(args.manifold)
    if len(req.point) != chart.dim:
        raise ConfigError(f"point needs {chart.dim} coordinates")
    try:
        chart.check_points(np.asarray(req.point))
    except GeometryError as exc:
        raise ConfigError(str(exc)) from None
    result = evaluate_request(cfg, req)
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_PASS


COMMANDS = {"validate": _cmd_validate, "run": _cmd_run, "gallery": _cmd_gallery,
            "invariant": _cmd_invariant}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CurvlabError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"engine error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser"]
