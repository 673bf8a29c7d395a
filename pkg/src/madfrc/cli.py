"""Command-line entry point: ``madfrc run|validate|presets``."""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .experiments import (
    PRESETS,
    SpecError,
    apply_overrides,
    load_spec,
    run_experiment,
    summary_table,
    write_outputs,
)

EXIT_OK, EXIT_SPEC, EXIT_INFEASIBLE = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="madfrc", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def overrides(sp):
        sp.add_argument("--seeds", help="seed count (e.g. 20), range (3-7) or list (1,4,9)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--scheme", action="append",
                        help="scheme to run (repeatable): proposed, fpa, rpa, random_ris, gas")
        sp.add_argument("--scale", choices=["paper", "desk"],
                        help="desk shrinks users, antennas and RIS size")

    run = sub.add_parser("run", help="run an experiment spec")
    run.add_argument("spec", type=Path)
    overrides(run)
    run.add_argument("--no-plots", action="store_true", help="skip the SVG figures")
    run.add_argument("-v", "--verbose", action="store_true", help="log each finished trial")

    val = sub.add_parser("validate", help="check a spec and print its normalized form")
    val.add_argument("spec", type=Path)
    overrides(val)

    pre = sub.add_parser("presets", help="list or write the built-in specs")
    pre_sub = pre.add_subparsers(dest="action", required=True)
    pre_sub.add_parser("list", help="show preset names")
    w = pre_sub.add_parser("write", help="write a preset spec file")
    w.add_argument("name", choices=sorted(PRESETS))
    w.add_argument("-o", "--output", type=Path, help="destination file (default: stdout)")
    return p


def _load(args):
    scheme = None
    if args.scheme:
        scheme = [s.strip() for item in args.scheme for s in item.split(",") if s.strip()]
    over = apply_overrides(seeds=args.seeds, out=args.out, schemes=scheme, scale=args.scale)
    return load_spec(args.spec, over)


def _cmd_run(args) -> int:
    try:
        spec = _load(args)
    except SpecError as exc:
        for err in exc.errors:
            print(f"spec error: {err}", file=sys.stderr)
        return EXIT_SPEC

    def progress(outcome, done, total):
        if args.verbose:
            state = "infeasible" if outcome.row is None else f"{outcome.row.radar_sinr_db:.2f} dB"
            logging.info("[%d/%d] %s seed=%d sweep=%s: %s", done, total, outcome.scheme,
                         outcome.seed, outcome.sweep, state)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        result = run_experiment(spec, progress=progress)
    write_outputs(result, spec.out, plots=not args.no_plots)
    print(summary_table(result))
    print(f"wrote results to {spec.out}")
    if not result.rows:
        print("every trial was infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        spec = _load(args)
    except SpecError as exc:
        for err in exc.errors:
            print(f"spec error: {err}", file=sys.stderr)
        return EXIT_SPEC
    sys.stdout.write(spec.canonical)
    print(f"# sha256 {spec.sha256}")
    return EXIT_OK


def _cmd_presets(args) -> int:
    if args.action == "list":
        for name in sorted(PRESETS):
            print(f"{name:<6} {PRESETS[name][0]}")
        return EXIT_OK
    text = PRESETS[args.name][1]
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(message)s")
    return {"run": _cmd_run, "validate": _cmd_validate, "presets": _cmd_presets}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
