"""Command-line entry point: adaptive runs, verification suites, and the
criss-cross scaling study.  All commands are deterministic for a fixed seed.

Exit codes: 0 success/convergence, 1 verification failure, 2 usage error,
3 adaptive run truncated at the element cap.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

# honor the thread cap before any BLAS pool spins up
_threads = os.environ.get("AFEM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import numpy as np  # noqa: E402

from . import adaptive, counterexample, transfer  # noqa: E402
from .domains import get_domain  # noqa: E402
from .mesh import read_mesh, uniform_refine  # noqa: E402
from .problems import get_solution  # noqa: E402

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_TRUNCATED = 3


def _add_common(p):
    p.add_argument("--domain", default="square",
                   choices=["square", "lshape", "diamond"])
    p.add_argument("--mesh", default=None,
                   help="mesh file overriding --domain")
    p.add_argument("--theta", type=float, default=0.3)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--beta1", type=float, default=1.0)
    p.add_argument("--gamma1", type=float, default=1.0)
    p.add_argument("--gamma2", type=float, default=1.0)
    p.add_argument("--dof-cap", type=int, default=200_000)
    p.add_argument("--solution", default="smooth1",
                   choices=["smooth1", "constant", "zero"])
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="anfem",
        description="Adaptive nonconforming FEM for the 2D Stokes problem")
    sub = ap.add_subparsers(dest="command", required=True)

    p_adapt = sub.add_parser("adapt", help="run the adaptive loop")
    _add_common(p_adapt)
    p_adapt.add_argument("--max-iterations", type=int, default=60)

    p_verify = sub.add_parser("verify", help="run the property suites")
    _add_common(p_verify)
    p_verify.add_argument("--suite", default="all",
                          choices=["all", "operators", "estimator",
                                   "quasi-orthogonality", "counterexample"])

    p_ce = sub.add_parser("counterexample",
                          help="criss-cross scaling study")
    p_ce.add_argument("--n", type=int, nargs="+", default=[5, 11, 21, 41],
                      help="odd grid parameters (need at least 4)")
    p_ce.add_argument("--out", default=".")
    return ap


def _initial_mesh(args):
    if args.mesh:
        return read_mesh(args.mesh)
    return get_domain(args.domain)


def _validate(args, ap):
    if not 0.0 < args.theta < 1.0:
        ap.error(f"--theta must be in (0, 1), got {args.theta}")
    if args.eps < 0:
        ap.error(f"--eps must be nonnegative, got {args.eps}")
    if args.mu <= 0:
        ap.error(f"--mu must be positive, got {args.mu}")
    for name in ("beta1", "gamma1", "gamma2"):
        if getattr(args, name) <= 0:
            ap.error(f"--{name} must be positive")
    if args.dof_cap <= 0:
        ap.error("--dof-cap must be positive")


def cmd_adapt(args) -> int:
    mesh0 = _initial_mesh(args)
    load = get_solution(args.solution, args.mu)
    params = adaptive.LoopParams(
        theta=args.theta, eps=args.eps, mu=args.mu, beta1=args.beta1,
        gamma1=args.gamma1, gamma2=args.gamma2, element_cap=args.dof_cap,
        max_iterations=args.max_iterations)
    trace = adaptive.anfem_loop(mesh0, load, params)

    os.makedirs(args.out, exist_ok=True)
    trace.to_csv(os.path.join(args.out, "trace.csv"))
    final = trace.records[-1]
    summary = {"schema": "anfem-summary-v1",
               "converged": trace.converged, "truncated": trace.truncated,
               "iterations": len(trace.records),
               "final_nelems": final.nelems, "final_ndofs": final.ndofs,
               "final_eta": float(np.sqrt(final.eta2))}
    try:
        summary["rate"] = adaptive.rate_fit(trace)
    except ValueError:
        summary["rate"] = None
    with open(os.path.join(args.out, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2)
    print(f"iterations={summary['iterations']} "
          f"nelems={final.nelems} eta={summary['final_eta']:.6g} "
          f"rate={summary['rate']}")
    return EXIT_TRUNCATED if trace.truncated else EXIT_OK


# ---------------------------------------------------------------------------
# verification suites


def _suite_operators(args):
    rng = np.random.default_rng(args.seed)
    mesh = uniform_refine(get_domain("square"), 1)
    checks = []
    for trial in range(20):
        a = rng.normal(size=(2, 6))

        def field(x, y, a=a):
            basis = np.stack([np.ones_like(x), x, y, x * y,
                              np.sin(x), np.cos(y)], axis=-1)
            return np.stack([basis @ a[0], basis @ a[1]], axis=-1)

        v = transfer.conservative_interpolation(field, mesh)
        means = transfer.edge_means_of_field(field, mesh)
        got = v.reshape(-1, 2)
        want = means[mesh.interior_edges]
        checks.append(float(np.abs(got - want).max()))
    worst = max(checks)
    ok = worst <= 1e-12
    return ok, f"conservative interpolation worst edge-mean defect {worst:.2e}"


def _suite_estimator(args):
    load = get_solution("constant", args.mu)
    params = adaptive.LoopParams(theta=args.theta, mu=args.mu,
                                 beta1=args.beta1, max_iterations=15,
                                 element_cap=args.dof_cap)
    try:
        adaptive.anfem_loop(get_domain("lshape"), load, params)
    except AssertionError as exc:
        return False, f"estimator reduction failed: {exc}"
    return True, "estimator reduction held on a 15-step run"


def _suite_qo(args):
    load = get_solution("smooth1", args.mu)
    params = adaptive.LoopParams(theta=args.theta, mu=args.mu,
                                 max_iterations=12, element_cap=args.dof_cap)
    trace = adaptive.anfem_loop(get_domain("square"), load, params)
    qv = trace.column("qo_velocity")
    qp = trace.column("qo_pressure")
    vals = np.concatenate([qv[np.isfinite(qv)], qp[np.isfinite(qp)]])
    if len(vals) == 0:
        return False, "no quasi-orthogonality constants recorded"
    ok = bool(np.all(np.isfinite(vals)))
    return ok, (f"quasi-orthogonality constants in "
                f"[{vals.min():.3g}, {vals.max():.3g}]")


def _suite_counterexample(args):
    fam = counterexample.build_family(11)
    nodal = counterexample.build_test_pair(fam)
    got = counterexample.boundary_sum(fam, nodal)
    want = counterexample.closed_form(11)
    ok = abs(got - want) <= 1e-10
    return ok, f"boundary sum {got:.12g} vs closed form {want:.12g}"


def cmd_verify(args) -> int:
    suites = {"operators": _suite_operators,
              "estimator": _suite_estimator,
              "quasi-orthogonality": _suite_qo,
              "counterexample": _suite_counterexample}
    names = list(suites) if args.suite == "all" else [args.suite]
    report = []
    failed = False
    for name in names:
        ok, msg = suites[name](args)
        report.append({"suite": name, "pass": bool(ok), "detail": msg})
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {msg}")
        failed |= not ok
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "verify.json"), "w") as f:
        json.dump({"schema": "anfem-verify-v1", "suites": report}, f,
                  indent=2)
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def cmd_counterexample(args) -> int:
    ns = args.n
    if any(n % 2 == 0 or n < 1 for n in ns):
        print("error: grid parameters must be odd positive integers",
              file=sys.stderr)
        return EXIT_USAGE
    if len(ns) < 4:
        print("error: need at least 4 grid parameters for the exponent fit",
              file=sys.stderr)
        return EXIT_USAGE
    study = counterexample.scaling_study(ns)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "counterexample.csv")
    with open(path, "w") as f:
        f.write("anfem-counterexample-v1\n")
        f.write("N,boundary_sum,grad_norm_sq,C,closed_form\n")
        for r in study["rows"]:
            f.write(f"{r['N']},{r['boundary_sum']:.17g},"
                    f"{r['grad_norm_sq']:.17g},{r['C']:.17g},"
                    f"{r['closed_form']:.17g}\n")
    print(f"exponent={study['exponent']:.6g} rows={len(study['rows'])} "
          f"csv={path}")
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command in ("adapt", "verify"):
        _validate(args, ap)
    if args.command == "adapt":
        return cmd_adapt(args)
    if args.command == "verify":
        return cmd_verify(args)
    return cmd_counterexample(args)


if __name__ == "__main__":
    sys.exit(main())
