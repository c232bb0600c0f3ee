#!/usr/bin/env python3
"""Uniform-refinement convergence study for the manufactured smooth flow:
velocity error, pressure error, estimator and consistency error per level."""

import argparse

import numpy as np

from anfem import (consistency_error, estimate, get_solution, solve,
                   unit_square)
from anfem.mesh import uniform_refine
from anfem.spaces import compute_stress, pressure_error_sq, velocity_error_sq


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", type=int, default=5)
    ap.add_argument("--mu", type=float, default=1.0)
    args = ap.parse_args()

    load = get_solution("smooth1", args.mu)
    mesh = unit_square(3)
    print(f"{'nelems':>8} {'h':>10} {'err_u':>12} {'err_p':>12} "
          f"{'eta':>12} {'consis':>12}")
    prev = None
    for _ in range(args.levels):
        sol = solve(mesh, load, args.mu)
        report = estimate(sol, load)
        err_u = np.sqrt(velocity_error_sq(sol, load))
        err_p = np.sqrt(pressure_error_sq(sol, load))
        eta = np.sqrt(report.total_eta_sq)
        consis = consistency_error(load.stress(args.mu), mesh, load)
        h = mesh.h.max()
        row = (err_u, err_p, eta, consis)
        print(f"{mesh.num_triangles:>8} {h:>10.4g} " +
              " ".join(f"{v:>12.5g}" for v in row), end="")
        if prev is not None:
            print("   ratios " + " ".join(
                f"{p / v:.2f}" for p, v in zip(prev, row)))
        else:
            print()
        prev = row
        mesh = uniform_refine(mesh, 1)


if __name__ == "__main__":
    main()
