"""Command-line entry points: one figure per invocation, plus a summary table."""

from __future__ import annotations

import argparse
import sys

from .render import BAR_KINDS, SWEEP_KINDS, FigureSpec, PlotError, render, summary_table


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="leonoma-plots")
    sub = parser.add_subparsers(dest="command", required=True)

    p_render = sub.add_parser("render", help="Render one figure from a benchmark CSV.")
    p_render.add_argument("--kind", required=True, choices=SWEEP_KINDS + BAR_KINDS)
    p_render.add_argument("--csv", required=True, dest="csv_path")
    p_render.add_argument("--out", required=True, dest="out_path")
    p_render.add_argument("--strategy", action="append", default=[],
                          help="Repeatable strategy filter; default: all in the file.")
    p_render.add_argument("--metric", default=None)
    p_render.add_argument("--trial", type=int, default=0)

    p_summary = sub.add_parser("summary", help="Write a capacity/gap summary table.")
    p_summary.add_argument("--csv", required=True, dest="csv_path")
    p_summary.add_argument("--out", default=None, dest="out_path",
                           help="Output text file; stdout when omitted.")
    p_summary.add_argument("--strategy", action="append", default=[])

    args = parser.parse_args(argv)
    try:
        if args.command == "render":
            spec = FigureSpec(
                kind=args.kind,
                csv_path=args.csv_path,
                out_path=args.out_path,
                strategies=tuple(args.strategy),
                metric=args.metric,
                trial=args.trial,
            )
            path = render(spec)
            print(f"wrote {path}")
        else:
            text = summary_table(args.csv_path, tuple(args.strategy))
            if args.out_path:
                with open(args.out_path, "w") as fh:
                    fh.write(text)
                print(f"wrote {args.out_path}")
            else:
                sys.stdout.write(text)
    except (PlotError, OSError) as exc:
        parser.exit(2, f"error: {exc}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
