"""Command-line front end: render --in DIR --panels a,b --out image.png"""

import argparse
import sys

from .render import render_convergence
from .traces import TraceFormatError, load_panels


def _parse_grid(text):
    try:
        rows, cols = text.lower().split("x")
        return (int(rows), int(cols))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"grid must look like 2x2, got {text!r}"
        ) from None


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="render",
        description="Draw per-block convergence curves from trace CSVs, "
        "one panel per trace set.",
    )
    parser.add_argument("--in", dest="root", required=True,
                        help="directory holding <panel>/trace_avg.csv sets")
    parser.add_argument("--panels", required=True,
                        help="comma-separated panel names (subdirectories)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--linear", action="store_true",
                        help="linear y axis (default: log scale)")
    parser.add_argument("--grid", type=_parse_grid,
                        help="panel layout ROWSxCOLS (default: near-square)")
    parser.add_argument("--dpi", type=int, default=150,
                        help="output resolution (default 150)")
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    names = [s.strip() for s in args.panels.split(",") if s.strip()]
    if not names:
        print("[render:input] --panels names nothing", file=sys.stderr)
        return 1
    try:
        traces = load_panels(args.root, names, layout=args.grid)
        render_convergence(traces, log_scale=not args.linear,
                           out_image_path=args.out, dpi=args.dpi)
    except (TraceFormatError, ValueError) as e:
        print(f"[render:input] {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"[render:io] {e}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} ({len(names)} panels)")
    return 0


def entry():
    sys.exit(main())
