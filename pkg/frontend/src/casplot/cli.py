"""casplot command line: render one figure from metrics CSV logs."""

from __future__ import annotations

import argparse
import sys

from .figures import DEFAULT_TABLE_EPISODES, FIGURES, PlotSpec, render

EXIT_OK = 0
EXIT_DATA = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="casplot",
        description="Render experiment figures from metrics CSV logs.")
    parser.add_argument("--figure", required=True, choices=FIGURES)
    parser.add_argument("--in", dest="inputs", required=True, nargs="+",
                        metavar="CSV", help="one or more metrics CSV files")
    parser.add_argument("--out", required=True,
                        help="output image (or text file for actions-table)")
    parser.add_argument("--episodes", default=None,
                        help="comma-separated episodes for the actions "
                             "table (default "
                             f"{','.join(map(str, DEFAULT_TABLE_EPISODES))})")
    parser.add_argument("--title", default=None)
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    episodes = list(DEFAULT_TABLE_EPISODES)
    if args.episodes is not None:
        try:
            episodes = [int(tok) for tok in args.episodes.split(",") if tok]
        except ValueError:
            print(f"data error: bad --episodes {args.episodes!r}",
                  file=sys.stderr)
            return EXIT_DATA
    spec = PlotSpec(inputs=args.inputs, figure=args.figure, out=args.out,
                    episodes=episodes, title=args.title, dpi=args.dpi)
    try:
        text = render(spec)
    except (OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if text is not None:
        sys.stdout.write(text)
    return EXIT_OK


def entry():  # console-script shim
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
