#!/usr/bin/env python3
"""Quantum values of the normalized game for the maximally entangled and the optimal state."""
import argparse

from weakdiqkd.bounds import critical_loss_rate, critical_min_entropy
from weakdiqkd.cglmp_engine import MAX_STATE_OPT_DIM, optimize_quantum_value, optimize_state_value


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("dims", type=int, nargs="*", default=[2, 3, 4, 5, 8, 16, 32])
    args = ap.parse_args(argv)
    print("d,max_entangled,optimal_state,critical_loss_rate,critical_min_entropy")
    for d in args.dims:
        q = optimize_quantum_value(d).value
        s = f"{optimize_state_value(d).value:.6f}" if d <= MAX_STATE_OPT_DIM else ""
        print(f"{d},{q:.6f},{s},{critical_loss_rate(q):.6f},{critical_min_entropy(q):.6f}")


if __name__ == "__main__":
    main()
