"""CLI: render experiment results CSVs into figures.

    cg-plot ratio-curves --in results.csv --out fig1.png
    cg-plot sphere-panel --in results.csv --out fig2.png

Each command writes the named raster plus a sibling .svg vector file.
"""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cg-plot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command, kind in (("ratio-curves", "ratio_curves"), ("sphere-panel", "sphere_panel")):
        p = sub.add_parser(command)
        p.set_defaults(kind=kind)
        p.add_argument("--in", dest="csv_path", required=True, help="results CSV")
        p.add_argument("--out", dest="out_path", required=True, help="output raster image (.png)")
        p.add_argument("--metrics", default=None, help="comma-separated metric columns")
        p.add_argument("--methods", default=None, help="comma-separated method filter")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            csv_path=args.csv_path,
            kind=args.kind,
            out_path=args.out_path,
            metrics=[m for m in (args.metrics or "").split(",") if m],
            methods=[m for m in (args.methods or "").split(",") if m],
        )
        raster, vector = render(spec)
    except (SchemaError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {raster} and {vector}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
