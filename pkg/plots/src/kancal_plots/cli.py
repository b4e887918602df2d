"""Command line for rendering kancal artifact CSVs to images."""

from __future__ import annotations

import argparse
import sys

from .render import (
    SchemaError,
    plot_logit_hist,
    plot_reliability,
    plot_sweep,
    plot_tau_curve,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kancal-plot",
        description="Render experiment artifact CSVs to PNG/SVG figures.",
    )
    sub = parser.add_subparsers(dest="kind", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="artifact CSV path")
    common.add_argument("-o", "--output", required=True,
                        help="output image path (.png or .svg)")
    common.add_argument("--title")

    sub.add_parser("reliability", parents=[common],
                   help="bar-vs-diagonal reliability diagram")
    sub.add_parser("tau-curve", parents=[common],
                   help="calibration error vs temperature")
    sub.add_parser("logit-hist", parents=[common],
                   help="logit value histogram")
    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="metric distributions over a sweep axis")
    p_sweep.add_argument("--axis", required=True,
                         help="summary.csv column to group by")
    p_sweep.add_argument("--value", default="final_ece",
                         help="summary.csv metric column (default final_ece)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.kind == "reliability":
            out = plot_reliability(args.input, args.output, title=args.title)
        elif args.kind == "tau-curve":
            out = plot_tau_curve(args.input, args.output, title=args.title)
        elif args.kind == "logit-hist":
            out = plot_logit_hist(args.input, args.output, title=args.title)
        else:
            out = plot_sweep(args.input, args.axis, args.output,
                             value=args.value, title=args.title)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
