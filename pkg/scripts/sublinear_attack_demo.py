#!/usr/bin/env python3
"""Sublinear test sample confined to Eve's prepared rounds.

Prints the loss of the attack for growing N, then runs the attack once at the
chosen N and reports what Bob sees and what Eve knows.
"""
import argparse

from weakdiqkd.attack_sim import ProtocolConfig, build_sublinear_attack, run_protocol
from weakdiqkd.cglmp_engine import optimize_quantum_value
from weakdiqkd.sampling import sublinear_loss


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=10 ** 6)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--k", type=float, default=0.01)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    for N in (10 ** 4, 10 ** 5, 10 ** 6, 10 ** 7, 10 ** 8):
        try:
            print(f"N={N:>10}  loss={sublinear_loss(N, args.alpha, args.k):.6f}")
        except ValueError as exc:
            print(f"N={N:>10}  {exc}")

    n = round(args.N ** (1 - args.alpha))
    cfg = ProtocolConfig(N=args.N, f=n / args.N, d=args.dim, test_size=n)
    rep = run_protocol(cfg, build_sublinear_attack(cfg, args.alpha, args.k, args.seed), args.seed)
    q = optimize_quantum_value(args.dim).value
    print(f"test rounds={rep.test_count}  R_obs={rep.R_obs_hat:.4f} +- {rep.sigma:.4f} "
          f"(honest {q:.4f})  verdict={rep.verdict}")
    print(f"sifted={rep.sift_count}  eve_guess={rep.eve_guess_fraction:.4f}  "
          f"eve_known={rep.eve_known_fraction:.4f}  loss={rep.realized_loss:.4f}")


if __name__ == "__main__":
    main()
