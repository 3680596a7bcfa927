"""Command-line front end.

Exit status: 0 when every check ran (whatever the verdicts), 1 for
configuration errors, 2 for internal errors.
"""

from __future__ import annotations

import argparse
import random
import sys

import numpy as np

from . import __version__
from .config import FORMATS, ConfigError, parse_config
from .holomorphic import QuadratureSpec, cross_validate, dump_coefficients, extract_theta
from .report import Report, emit, run, run_sweep, write


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration file")
    common.add_argument("--format", choices=FORMATS, help="output format (overrides output.format)")
    common.add_argument("--out", help="output path (overrides output.path; '-' for stdout)")
    common.add_argument("--N", type=int, help="truncation length")
    common.add_argument("--tol", type=float, help="absolute tolerance")
    common.add_argument("--seed", type=int, help="seed for randomized fixture selection")
    common.add_argument("--workers", type=int, default=1, help="worker threads for independent checks")
    common.add_argument("--no-timing", action="store_true", help="omit timing fields from the report")

    ap = argparse.ArgumentParser(prog="rhaly", description="Continuity, compactness and dynamics certificates for Rhaly matrices.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="run the configured checks")
    sub.add_parser("extract", parents=[common], help="Taylor coefficients of g by circle quadrature")
    sub.add_parser("validate", parents=[common], help="compare integral and series forms of R_g")
    sub.add_parser("sweep", parents=[common], help="run the checks over a theta parameter grid")
    return ap


def _load(args):
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {args.config}: {err.strerror}") from None
    return parse_config(text, {"N": args.N, "tol": args.tol, "seed": args.seed,
                               "output.format": args.format})


def _extract(cfg) -> str:
    if cfg.g is None:
        raise ConfigError("extract needs key 'g'")
    spec = cfg.quad or QuadratureSpec()
    vals = extract_theta(cfg.g, cfg.n_max, spec).values(cfg.n_max + 1)
    if cfg.output_format == "text":
        return dump_coefficients(vals)
    if cfg.output_format == "csv":
        return "n,re,im\n" + "".join(f"{n},{float(v.real)!r},{float(v.imag)!r}\n" for n, v in enumerate(vals))
    report = Report(__version__, dict(cfg.raw), [{"name": "extract", "outcome": "Values",
                                                  "values": {"theta": [[float(v.real), float(v.imag)]
                                                                       for v in vals]}}])
    return emit(report, "json", timing=False)


def _validate(cfg, timing: bool) -> str:
    if cfg.g is None or cfg.f is None or cfg.quad is None or cfg.quad.r0 is None:
        raise ConfigError("validate needs keys 'g', 'f' and 'quad.r0'")
    points = cfg.points or (0.5,)
    rep = cross_validate(cfg.g, cfg.f, points, cfg.quad)
    rows = [{"z": r.z, "integral": r.integral, "series": r.series, "difference": r.difference,
             "passed": r.passed, "note": r.note} for r in rep.rows]
    record = {"name": "cross_validate", "outcome": "Values",
              "values": {"passed": rep.passed, "adapter_error": rep.adapter_error, "rows": rows}}
    return emit(Report(__version__, dict(cfg.raw), [record]), cfg.output_format, timing=False)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
        random.seed(cfg.seed)
        np.random.seed(cfg.seed)
        timing = not args.no_timing
        if args.command == "check":
            out = emit(run(cfg, args.workers), cfg.output_format, timing)
        elif args.command == "sweep":
            if not cfg.sweep_theta or not cfg.sweep_values:
                raise ConfigError("sweep needs keys 'sweep.theta' and 'sweep.values'")
            out = emit(run_sweep(cfg, args.workers), cfg.output_format, timing)
        elif args.command == "extract":
            out = _extract(cfg)
        else:
            out = _validate(cfg, timing)
        write(out, args.out if args.out is not None else cfg.output_path)
    except ConfigError as err:
        print(f"rhaly: config error: {err}", file=sys.stderr)
        return 1
    except Exception as err:
        print(f"rhaly: internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
