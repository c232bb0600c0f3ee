#!/usr/bin/env python3
"""Scaling study for the criss-cross pairing constant on the diamond."""

import argparse

from anfem import scaling_study


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, nargs="+", default=[5, 11, 21, 41, 81])
    args = ap.parse_args()

    study = scaling_study(args.n)
    print(f"{'N':>4} {'boundary_sum':>16} {'closed_form':>16} "
          f"{'grad_norm_sq':>14} {'C':>10}")
    for r in study["rows"]:
        print(f"{r['N']:>4} {r['boundary_sum']:>16.10f} "
              f"{r['closed_form']:>16.10f} {r['grad_norm_sq']:>14.6f} "
              f"{r['C']:>10.5f}")
    print(f"fitted exponent of C(N): {study['exponent']:.4f}")


if __name__ == "__main__":
    main()
