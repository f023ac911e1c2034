"""Command-line entry point: ``mimodist-plot psd|evm --in CSV --out IMG``."""
from __future__ import annotations

import argparse
import sys

from .render import PlotError, render_evm, render_psd


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="mimodist-plot",
        description="Render figures from mimodist CSV result files")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, helptext in (("psd", "PSD overlay figure"),
                           ("evm", "EVM-vs-sweep figure")):
        p = sub.add_parser(kind, help=helptext)
        p.add_argument("--in", dest="input", required=True,
                       help="input CSV file")
        p.add_argument("--out", dest="output", required=True,
                       help="output image (png or svg)")
        p.add_argument("--title", default="", help="figure title")
    args = parser.parse_args(argv)

    render = render_psd if args.kind == "psd" else render_evm
    try:
        render(args.input, args.output, title=args.title)
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
