"""Command line: ``run <config>``, ``validate <config>``, ``list-experiments``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 property violation.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import config as cfgmod
from .errors import (
    BlowUpError,
    ConfigError,
    ConvergenceError,
    DegenerateVarianceError,
    FitError,
    PreconditionError,
    PropertyViolation,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PROPERTY = 0, 2, 3, 4

_NUMERIC = (ConvergenceError, BlowUpError, FitError, DegenerateVarianceError)


def _load(path):
    try:
        return cfgmod.load(path)
    except (OSError, ValueError) as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc


def cmd_validate(args):
    cfg = _load(args.config)
    errs = cfgmod.validate(cfg)
    if errs:
        for e in errs:
            print(f"violation: {e}")
        return EXIT_CONFIG
    print("ok: no violations")
    return EXIT_OK


def cmd_list(args):
    width = max(map(len, cfgmod.EXPERIMENTS))
    for k, v in cfgmod.EXPERIMENTS.items():
        print(f"{k:<{width}}  {v}")
    return EXIT_OK


def cmd_run(args):
    from .experiments import run  # heavy imports only when running

    cfg = _load(args.config)
    kind = cfg.get("experiment", {}).get("kind", "?")
    try:
        manifest = run(cfg, args.output)
    except ConfigError:
        raise
    except Exception as exc:
        # attach the experiment context and re-raise for the exit-code mapping
        exc.args = (f"experiment {kind} ({args.config}): {exc}",) + tuple(exc.args[1:])
        raise
    out = cfgmod.output_dir(cfg, args.output)
    print(f"wrote {', '.join(manifest.outputs.values())} and manifest.json to {out}")
    for k, v in manifest.derived.items():
        if not isinstance(v, (dict, list)):
            print(f"  {k} = {v}")
    failed = [k for k, ok in manifest.checks.items() if not ok]
    for k, ok in manifest.checks.items():
        print(f"  [{'PASS' if ok else 'FAIL'}] {k}")
    if failed:
        print(f"property violation: {', '.join(failed)}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="lorenz-stability", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a TOML config or a manifest.json")
    r.add_argument("config")
    r.add_argument("-o", "--output", default=None,
                   help=f"output directory (default: experiment.output, else ${cfgmod.OUTPUT_ENV})")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="list violated preconditions without running")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    ls = sub.add_parser("list-experiments", help="list experiment kinds")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for e in exc.violations:
            print(f"violation: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateVarianceError as exc:
        print(f"degenerate variance: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _NUMERIC as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PropertyViolation as exc:
        print(f"property violation: {exc}", file=sys.stderr)
        return EXIT_PROPERTY


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
