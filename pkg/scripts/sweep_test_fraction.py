#!/usr/bin/env python3
"""CSV of the minimal observed violation needed at each linear test fraction f.

Also prints f_max for the quantum value of each requested dimension.
"""
import argparse
import sys

from weakdiqkd.cglmp_engine import optimize_quantum_value
from weakdiqkd.cli import sweep_rows, write_csv
from weakdiqkd.sampling import solve_secure_fraction


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--loss", type=float, default=0.03)
    ap.add_argument("--steps", type=int, default=999)
    ap.add_argument("--dim", type=int, action="append", help="repeatable; default 2, 4")
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    header, rows = sweep_rows("fraction", 0.001, 0.999, args.steps, loss=args.loss)
    if args.out == "-":
        write_csv(header, rows, sys.stdout)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_csv(header, rows, fh)
    for d in args.dim or (2, 4):
        q = optimize_quantum_value(d).value
        print(f"# d={d} R_Q={q:.6f} f_max={solve_secure_fraction(args.loss, q):.6f}",
              file=sys.stderr)


if __name__ == "__main__":
    main()
