"""Command-line interface.

Exit status is 0 when every check passes, 1 when some check fails and 2 for
unusable input (bad spec file, bad grid, ...).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import PotnormalsError
from .geometry import ToleranceConfig
from .report import (
    envelope,
    parse_grid,
    parse_point,
    render_text,
    run_analyze,
    run_dualize,
    run_realize,
    run_wdvv,
    to_json,
)
from .specfile import corpus_names, corpus_path, load_spec

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _resolve_spec(arg: str):
    # "corpus:circle" names a bundled spec
    if arg.startswith("corpus:"):
        return load_spec(corpus_path(arg.split(":", 1)[1]))
    return load_spec(arg)


def _tolerances(args) -> ToleranceConfig:
    kwargs = {}
    if getattr(args, "tol", None) is not None:
        kwargs["residual_tol"] = args.tol
    if getattr(args, "frame_condition_max", None) is not None:
        kwargs["frame_condition_max"] = args.frame_condition_max
    if getattr(args, "fd_check", False):
        kwargs["fd_check"] = True
    if getattr(args, "step", None) is not None:
        kwargs["integration_step"] = args.step
    return ToleranceConfig(**kwargs)


def _add_output(p):
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")


def _add_tol(p):
    p.add_argument("--tol", type=float, help="residual tolerance (default 1e-8)")
    p.add_argument("--frame-condition-max", type=float, help="frame condition limit (default 1e8)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="potnormals",
        description="Local theory of submanifolds with potential of normals, "
        "duality checks and flat Frobenius realizations.",
        epilog="Negative numbers in --grid/--from/--to need the '=' form, e.g. --grid=-1:1:8.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analyze a spec over a grid")
    p.add_argument("spec", help="spec file, or corpus:<name>")
    p.add_argument("--grid", required=True, help="min:max:count per parameter, comma separated")
    _add_tol(p)
    p.add_argument("--fd-check", action="store_true", help="cross-check against finite differences")
    p.add_argument("--tensors", action="store_true", help="include g, h, a, b, c, d per point")
    _add_output(p)

    p = sub.add_parser("dualize", help="compare a submanifold spec with its dual")
    p.add_argument("spec")
    p.add_argument("--grid", required=True)
    _add_tol(p)
    _add_output(p)

    p = sub.add_parser("wdvv", help="WDVV residual of a Frobenius spec over a grid")
    p.add_argument("spec")
    p.add_argument("--grid", required=True)
    _add_tol(p)
    _add_output(p)

    p = sub.add_parser("realize", help="integrate the flat frame along a polyline")
    p.add_argument("spec")
    p.add_argument("--from", dest="start", required=True, help="start point, comma separated")
    p.add_argument("--to", dest="end", required=True)
    p.add_argument("--via", action="append", default=[], help="intermediate waypoint (repeatable)")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--tol", type=float, help="WDVV gate and defect tolerance (default 1e-8)")
    _add_output(p)

    p = sub.add_parser("report", help="re-render a saved structured report")
    p.add_argument("report", help="structured report file")
    _add_output(p)

    p = sub.add_parser("corpus", help="list bundled spec files, or print one")
    p.add_argument("name", nargs="?")
    return parser


def _run(args):
    if args.command == "corpus":
        if args.name is None:
            return None, "\n".join(corpus_names()) + "\n"
        return None, corpus_path(args.name).read_text()
    if args.command == "report":
        try:
            report = json.loads(Path(args.report).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise PotnormalsError(f"cannot read report {args.report}: {exc}") from exc
        if "data" not in report:
            report = envelope(report)
        return report, None

    spec = _resolve_spec(args.spec)
    tol = _tolerances(args)
    if args.command == "realize":
        via = [parse_point(v) for v in args.via]
        data = run_realize(spec, parse_point(args.start), parse_point(args.end), via, tol)
    else:
        grid = parse_grid(args.grid, spec.N)
        if args.command == "analyze":
            data = run_analyze(spec, grid, tol, tensors=args.tensors)
        elif args.command == "dualize":
            data = run_dualize(spec, grid, tol)
        else:
            data = run_wdvv(spec, grid, tol)
    return envelope(data), None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report, text = _run(args)
    except (PotnormalsError, FileNotFoundError, ValueError) as exc:
        print(f"potnormals: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if report is not None:
        text = to_json(report) if args.format == "structured" else render_text(report)
    if getattr(args, "output", None):
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if report is None:
        return EXIT_PASS
    return EXIT_PASS if report["data"]["verdict"] == "PASS" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
