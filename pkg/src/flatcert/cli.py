"""Command-line interface: ``flatcert check | plan | catalog``.

Exit codes: 0 criterion satisfied / plan verified, 1 criterion failed or
plan residual breached, 2 spec or usage error, 3 inconclusive.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .catalog import ENTRIES, describe, write_entry
from .certify import run_check, run_plan
from .errors import FlatcertError, UnknownCatalogEntry
from .report import jsonable
from .specfile import load_spec

EXIT_OK, EXIT_FAIL, EXIT_SPEC, EXIT_INCONCLUSIVE = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flatcert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"flatcert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="verify the flatness criterion for a spec file")
    check.add_argument("spec")
    check.add_argument("--samples", type=int)
    check.add_argument("--seed", type=int)
    check.add_argument("--tol", type=float)
    check.add_argument("--json", metavar="PATH")

    plan = sub.add_parser("plan", help="plan and verify a flat trajectory")
    plan.add_argument("spec")
    plan.add_argument("--T", type=float, dest="horizon")
    plan.add_argument("--grid", type=int)
    plan.add_argument("--csv", metavar="PATH")
    plan.add_argument("--json", metavar="PATH")

    cat = sub.add_parser("catalog", help="list built-in systems or write one as a spec file")
    cat.add_argument("name", nargs="?")
    cat.add_argument("--dir", default=".")
    return parser


def _check(args) -> int:
    spec = load_spec(args.spec)
    opts = spec.check
    if args.samples is not None:
        opts.samples = args.samples
    if args.seed is not None:
        opts.seed = args.seed
    if args.tol is not None:
        opts.tol = args.tol
    report = run_check(spec, opts)
    print(report.render_text())
    if args.json:
        Path(args.json).write_text(report.to_json(), encoding="utf-8")
    return report.exit_code


def _plan(args) -> int:
    spec = load_spec(args.spec)
    traj, block = run_plan(spec, args.horizon, args.grid)
    print(f"{block.name}: {block.status.upper()}  {block.verdict}")
    if args.csv:
        Path(args.csv).write_text(traj.to_csv(), encoding="utf-8")
    if args.json:
        payload = {"schema": "flatcert.trajectory.v1", "system": spec.name, "plan": block.to_dict(), "trajectory": traj.to_dict()}
        Path(args.json).write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK if block.passed else EXIT_FAIL


def _catalog(args) -> int:
    if args.name is None:
        for name in ENTRIES:
            print(f"{name:<20} {describe(name)}")
        return EXIT_OK
    path = write_entry(args.name, args.dir)
    print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_SPEC
    handler = {"check": _check, "plan": _plan, "catalog": _catalog}[args.command]
    try:
        return handler(args)
    except UnknownCatalogEntry as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (FlatcertError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except Exception as exc:  # exit-code contract: every path maps to 0-3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
