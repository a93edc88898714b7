"""plotgen command line: render one figure preset from curve CSVs."""

import argparse
import sys

from .curves import SchemaError
from .plots import STYLE_PRESETS, plot_curves


def build_parser():
    parser = argparse.ArgumentParser(prog="plotgen")
    parser.add_argument("--preset", required=True, choices=sorted(STYLE_PRESETS))
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--labels", nargs="*", help="legend labels, one per input")
    parser.add_argument("--rescale", nargs="*", type=float,
                        help="per-input force scale factors (per-modulus normalization)")
    parser.add_argument("curves", nargs="+", help="curve CSV files")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        meta = plot_curves(args.curves, args.preset, args.out,
                           labels=args.labels, rescale=args.rescale)
    except (SchemaError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{args.out}: {len(meta)} curves")
    return 0


if __name__ == "__main__":
    sys.exit(main())
