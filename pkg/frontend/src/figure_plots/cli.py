"""Command line: one CSV in, one image out."""
from __future__ import annotations

import argparse
import sys

from .figures import PRESETS, PlotError, plot, spec_for

__all__ = ["cli_main", "main"]


def cli_main(argv) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render an experiment CSV as a line figure (.png or .svg).",
    )
    parser.add_argument("--csv", required=True, help="experiment CSV table")
    parser.add_argument("--figure", required=True, choices=sorted(PRESETS),
                        help="which figure preset to apply")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        plot(spec_for(args.figure, args.csv, args.out))
    except PlotError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
