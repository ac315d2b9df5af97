"""CLI: figure-plots render --in <dir> --figure <name> --out <path>."""
from __future__ import annotations

import argparse
import sys

from .render import FIGURE_LAYOUTS, figure_panel_specs, render_figure


def main(argv=None):
    parser = argparse.ArgumentParser(prog="figure-plots")
    sub = parser.add_subparsers(dest="command", required=True)
    render = sub.add_parser("render", help="render one figure from results CSVs")
    render.add_argument("--in", dest="in_dir", required=True, help="directory with figure_*.csv files")
    render.add_argument("--figure", required=True, choices=sorted(FIGURE_LAYOUTS))
    render.add_argument("--out", required=True, help="output path; .png and .svg are written")
    args = parser.parse_args(argv)

    try:
        specs = figure_panel_specs(args.figure, args.in_dir)
        rendered = render_figure(specs, args.out)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    total_excluded = sum(p["excluded"] for p in rendered)
    note = f" ({total_excluded} failed rows excluded)" if total_excluded else ""
    print(f"rendered {args.figure}: {args.out} [.png/.svg]{note}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
