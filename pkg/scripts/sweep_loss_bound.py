#!/usr/bin/env python3
"""CSV of the product-state bound R(L) with constant quantum lines for chosen dimensions."""
import argparse
import sys

from weakdiqkd.cli import sweep_rows, write_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lo", type=float, default=0.0)
    ap.add_argument("--hi", type=float, default=0.1)
    ap.add_argument("--steps", type=int, default=101)
    ap.add_argument("--dim", type=int, action="append", help="repeatable; default 2, 4, 32")
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    header, rows = sweep_rows("loss", args.lo, args.hi, args.steps, tuple(args.dim or (2, 4, 32)))
    if args.out == "-":
        write_csv(header, rows, sys.stdout)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_csv(header, rows, fh)


if __name__ == "__main__":
    main()
