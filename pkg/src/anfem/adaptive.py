"""Bulk marking, the adaptive solve-estimate-mark-refine loop, and monitors
for estimator reduction, contraction, quasi-orthogonality, discrete
reliability and empirical convergence rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quadrature as quad
from .estimator import (EstimatorReport, estimate, estimate_frozen,
                        modified_eta)
from .mesh import Triangulation, bisect, nesting_sets, refinement_ratio
from .problems import LoadFunction
from .spaces import (DiscreteSolution, assemble_saddle, broken_grad_norm_sq,
                     cr_gradients, galerkin_residual, max_element_divergence,
                     num_velocity_dofs, pressure_error_sq, solve_saddle,
                     velocity_error_sq)

ESTIMATOR_REDUCTION_RHO = 1.0 - 2.0 ** -0.5


class MarkingError(ValueError):
    pass


@dataclass
class MarkingParams:
    theta: float = 0.3
    tie_break: str = "element-id"   # descending eta_K^2, then ascending id

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise MarkingError(f"theta must be in (0, 1), got {self.theta}")


@dataclass
class ContractionParams:
    gamma1: float = 1.0
    gamma2: float = 1.0
    beta1: float = 1.0

    def __post_init__(self):
        if min(self.gamma1, self.gamma2, self.beta1) <= 0.0:
            raise ValueError("contraction weights must be positive")


def dorfler_mark(report: EstimatorReport, theta: float) -> np.ndarray:
    """Minimal element set with eta^2(M) >= theta * eta^2(T).

    Sorted by descending eta_K^2, ties by ascending element id.
    """
    if not 0.0 < theta < 1.0:
        raise MarkingError(f"theta must be in (0, 1), got {theta}")
    eta_sq = report.eta_sq
    total = eta_sq.sum()
    if total <= 0.0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((np.arange(len(eta_sq)), -eta_sq))
    csum = np.cumsum(eta_sq[order])
    m = int(np.searchsorted(csum, theta * total - 1e-14 * total) + 1)
    marked = order[:m]
    # minimality: dropping the last element must fall below the threshold
    assert m == 1 or csum[m - 2] < theta * total
    return np.sort(marked)


@dataclass
class IterationRecord:
    iteration: int
    nelems: int
    ndofs: int
    eta2: float
    eta_tilde2: float
    osc2: float
    vol2: float
    nmarked: int
    gamma: float              # refinement ratio vs the previous mesh
    err_u2: float = np.nan
    err_p2: float = np.nan
    lam: float = np.nan       # contraction quantity Lambda
    alpha: float = np.nan     # Lambda ratio vs previous step
    qo_velocity: float = np.nan
    qo_pressure: float = np.nan
    reduction_lhs: float = np.nan   # eta^2 of frozen solution on refined mesh
    reduction_rhs: float = np.nan   # allowed bound from the coarse mesh


@dataclass
class AdaptiveTrace:
    records: list[IterationRecord] = field(default_factory=list)
    truncated: bool = False
    converged: bool = False
    final_mesh: Triangulation | None = None
    final_solution: DiscreteSolution | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path):
        cols = ["iteration", "nelems", "ndofs", "eta2", "eta_tilde2", "osc2",
                "vol2", "nmarked", "gamma", "err_u2", "err_p2", "lam",
                "alpha"]
        with open(path, "w") as f:
            f.write("anfem-trace-v1\n")
            f.write("iter,nelems,ndofs,eta2,eta_tilde2,osc2,vol2,nmarked,"
                    "gamma,err_u2,err_p2,Lambda,alpha\n")
            for r in self.records:
                f.write(",".join(
                    f"{getattr(r, c):.17g}" if isinstance(getattr(r, c), float)
                    else str(getattr(r, c)) for c in cols) + "\n")


@dataclass
class LoopParams:
    theta: float = 0.3
    eps: float = 0.0
    mu: float = 1.0
    beta1: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    element_cap: int = 200_000
    max_iterations: int = 100
    check_reduction: bool = True
    reduction_slack: float = 1e-9


def _exact_velocity_inner(mesh: Triangulation, load: LoadFunction,
                          grads: np.ndarray) -> float:
    """(grad u_exact, grad w) for element-wise constant grad w."""
    gu_int = quad.integrate(
        mesh, lambda x, y: load.grad_velocity(x, y))     # (nt, 2, 2)
    return float(np.einsum("tij,tij->", gu_int, grads))


def _exact_pressure_inner(mesh: Triangulation, load: LoadFunction,
                          q: np.ndarray) -> float:
    p_int = quad.integrate(mesh, lambda x, y: load.pressure(x, y))
    return float((p_int * q).sum())


def anfem_loop(mesh0: Triangulation, load: LoadFunction,
               params: LoopParams | None = None) -> AdaptiveTrace:
    """Solve -> estimate -> mark -> refine until eta < eps or a size cap."""
    p = params or LoopParams()
    if p.eps < 0:
        raise ValueError("eps must be nonnegative")
    trace = AdaptiveTrace()
    mesh = mesh0
    prev: tuple[DiscreteSolution, EstimatorReport] | None = None
    prev_lam = np.nan
    gamma = 1.0

    for it in range(p.max_iterations):
        system = assemble_saddle(mesh, load, p.mu)
        sol = solve_saddle(system)
        _check_solve_invariants(system, sol)
        report = estimate(sol, load, p.beta1)

        rec = IterationRecord(
            iteration=it, nelems=mesh.num_triangles,
            ndofs=num_velocity_dofs(mesh) + mesh.num_triangles,
            eta2=report.total_eta_sq,
            eta_tilde2=modified_eta(report),
            osc2=report.total_osc_sq, vol2=report.total_vol_sq,
            nmarked=0, gamma=gamma)

        if load.has_exact:
            rec.err_u2 = velocity_error_sq(sol, load)
            rec.err_p2 = pressure_error_sq(sol, load)
            rec.lam = rec.err_u2 + p.gamma1 * rec.err_p2 \
                + p.gamma2 * rec.eta_tilde2
            if np.isfinite(prev_lam) and prev_lam > 0:
                rec.alpha = rec.lam / prev_lam
            prev_lam = rec.lam

        if prev is not None:
            _cross_level_monitors(prev, sol, mesh, load, rec)
        trace.records.append(rec)

        eta = np.sqrt(report.total_eta_sq)
        if eta < p.eps or eta == 0.0:
            trace.converged = True
            break
        if mesh.num_triangles >= p.element_cap:
            trace.truncated = True
            break

        marked = dorfler_mark(report, p.theta)
        rec.nmarked = len(marked)
        refined = bisect(mesh, marked)
        ns = nesting_sets(mesh, refined)
        gamma = refinement_ratio(mesh, refined, ns)

        if p.check_reduction:
            frozen = estimate_frozen(sol, refined, load, ns.ancestors)
            lhs = frozen.total_eta_sq
            rhs = report.total_eta_sq - ESTIMATOR_REDUCTION_RHO * float(
                report.eta_sq[ns.refined].sum())
            rec.reduction_lhs = lhs
            rec.reduction_rhs = rhs
            if lhs > rhs + p.reduction_slack * max(1.0, rhs):
                raise AssertionError(
                    f"estimator reduction violated at step {it}: "
                    f"{lhs:.16g} > {rhs:.16g}")
            # volume-term reduction with the same factor
            vol_lhs = frozen.total_vol_sq
            vol_rhs = report.total_vol_sq - ESTIMATOR_REDUCTION_RHO * float(
                report.vol_sq[ns.refined].sum())
            if vol_lhs > vol_rhs + p.reduction_slack * max(1.0, vol_rhs):
                raise AssertionError(
                    f"volume-term reduction violated at step {it}")

        prev = (sol, report)
        mesh = refined
    else:
        trace.truncated = mesh.num_triangles >= p.element_cap

    trace.final_mesh = mesh
    trace.final_solution = sol
    return trace


def _check_solve_invariants(system, sol):
    gn = np.sqrt(broken_grad_norm_sq(sol.mesh, sol.u))
    maxdiv = max_element_divergence(sol)
    if maxdiv > 1e-10 * (1.0 + gn):
        raise AssertionError(f"discrete divergence too large: {maxdiv:.3e}")
    res = galerkin_residual(system, sol)
    scale = max(1.0, float(np.abs(system.F).max()))
    if res > 1e-10 * scale:
        raise AssertionError(f"Galerkin identity violated: {res:.3e}")


def _cross_level_monitors(prev, sol, mesh, load, rec):
    """Empirical quasi-orthogonality constants between consecutive levels."""
    sol_prev, report_prev = prev
    ns = nesting_sets(sol_prev.mesh, mesh)
    vol_refined = float(report_prev.vol_sq[ns.refined].sum())
    G_cur = cr_gradients(mesh, sol.u)
    G_prev = cr_gradients(sol_prev.mesh, sol_prev.u)[ns.ancestors]
    W = G_cur - G_prev                       # grad(u_k - u_{k-1}) on T_k
    wnorm = float(np.sqrt((mesh.area * np.einsum(
        "tij,tij->t", W, W)).sum()))
    if not load.has_exact:
        return
    mu = sol.mu
    # a_k(u - u_k, u_k - u_{k-1})
    a_exact = _exact_velocity_inner(mesh, load, W)
    a_disc = float((mesh.area * np.einsum("tij,tij->t", G_cur, W)).sum())
    qo_num = abs(mu * (a_exact - a_disc))
    err_u = np.sqrt(rec.err_u2)
    den = err_u * np.sqrt(vol_refined)
    rec.qo_velocity = qo_num / den if den > 0 else np.nan
    # (p - p_k, p_k - p_{k-1})
    dp = sol.p - sol_prev.p[ns.ancestors]
    p_exact = _exact_pressure_inner(mesh, load, dp)
    p_disc = float((mesh.area * sol.p * dp).sum())
    qp_num = abs(p_exact - p_disc)
    err_p = np.sqrt(rec.err_p2)
    den_p = (np.sqrt(vol_refined) + wnorm) * err_p
    rec.qo_pressure = qp_num / den_p if den_p > 0 else np.nan


# ---------------------------------------------------------------------------
# uniform-refinement baseline


def uniform_trace(mesh0: Triangulation, load: LoadFunction, levels: int,
                  rounds_per_level: int = 2, mu: float = 1.0,
                  beta1: float = 1.0) -> AdaptiveTrace:
    trace = AdaptiveTrace()
    mesh = mesh0
    for it in range(levels):
        system = assemble_saddle(mesh, load, mu)
        sol = solve_saddle(system)
        report = estimate(sol, load, beta1)
        rec = IterationRecord(
            iteration=it, nelems=mesh.num_triangles,
            ndofs=num_velocity_dofs(mesh) + mesh.num_triangles,
            eta2=report.total_eta_sq, eta_tilde2=modified_eta(report),
            osc2=report.total_osc_sq, vol2=report.total_vol_sq,
            nmarked=mesh.num_triangles, gamma=2.0 ** (rounds_per_level / 2.0))
        if load.has_exact:
            rec.err_u2 = velocity_error_sq(sol, load)
            rec.err_p2 = pressure_error_sq(sol, load)
        trace.records.append(rec)
        if it + 1 < levels:
            for _ in range(rounds_per_level):
                mesh = bisect(mesh, np.arange(mesh.num_triangles))
    trace.final_mesh = mesh
    trace.final_solution = sol
    trace.converged = True
    return trace


# ---------------------------------------------------------------------------
# analysis of traces


def rate_fit(trace: AdaptiveTrace, n0: int | None = None) -> float:
    """Slope of log(eta + osc) vs log(#T_k - #T_0) over the trailing half."""
    recs = trace.records
    if len(recs) < 5:
        raise ValueError("need at least 5 trace points for a rate fit")
    n_start = n0 if n0 is not None else recs[0].nelems
    xs, ys = [], []
    for r in recs:
        extra = r.nelems - n_start
        if extra <= 0:
            continue
        xs.append(np.log(extra))
        ys.append(np.log(np.sqrt(r.eta2) + np.sqrt(r.osc2)))
    half = len(xs) // 2
    xs, ys = np.array(xs[half:]), np.array(ys[half:])
    if len(xs) < 2:
        raise ValueError("not enough growing trace points")
    return float(np.polyfit(xs, ys, 1)[0])


def error_rate_fit(nelems, errors) -> float:
    """Slope of log(error) vs log(1/h) with h = nelems^(-1/2)."""
    x = 0.5 * np.log(np.asarray(nelems, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def contraction_monitor(trace: AdaptiveTrace):
    """Per-step ratios alpha_k = Lambda_k / Lambda_{k-1} plus a summary."""
    alphas = trace.column("alpha")
    alphas = alphas[np.isfinite(alphas)]
    return {"alphas": alphas, **contraction_summary(trace)}


def contraction_summary(trace: AdaptiveTrace):
    alphas = trace.column("alpha")
    alphas = alphas[np.isfinite(alphas)]
    if len(alphas) == 0:
        return {"count": 0, "max": np.nan, "geomean": np.nan}
    return {"count": int(len(alphas)), "max": float(alphas.max()),
            "geomean": float(np.exp(np.mean(np.log(alphas))))}


def discrete_reliability_check(sol_coarse: DiscreteSolution,
                               sol_fine: DiscreteSolution,
                               load: LoadFunction,
                               nesting=None) -> float:
    """Empirical constant of the discrete reliability bound."""
    coarse, fine = sol_coarse.mesh, sol_fine.mesh
    ns = nesting if nesting is not None else nesting_sets(coarse, fine)
    Gf = cr_gradients(fine, sol_fine.u)
    Gc = cr_gradients(coarse, sol_coarse.u)[ns.ancestors]
    d = Gf - Gc
    du = np.sqrt(float((fine.area * np.einsum("tij,tij->t", d, d)).sum()))
    dp = np.sqrt(float((fine.area * (
        sol_fine.p - sol_coarse.p[ns.ancestors]) ** 2).sum()))
    report = estimate(sol_coarse, load)
    eta_m = np.sqrt(float(report.eta_sq[ns.neighborhood].sum()))
    if eta_m == 0.0:
        if du + dp > 1e-12:
            raise AssertionError(
                "discrete reliability violated: zero estimator on the "
                "refined neighborhood but nonzero solution difference")
        return 0.0
    return (du + dp) / eta_m


def marking_threshold_check(mesh0: Triangulation, load: LoadFunction,
                            thetas=(0.1, 0.3, 0.5, 0.7),
                            max_iterations: int = 12,
                            element_cap: int = 60_000) -> list[dict]:
    """Run the loop at several marking parameters and tabulate the outcomes."""
    rows = []
    for theta in thetas:
        if not 0.0 < theta < 1.0:
            raise MarkingError(f"theta must be in (0, 1), got {theta}")
        p = LoopParams(theta=theta, max_iterations=max_iterations,
                       element_cap=element_cap)
        trace = anfem_loop(mesh0, load, p)
        row = {"theta": theta,
               "iterations": len(trace.records),
               "final_nelems": trace.records[-1].nelems,
               "final_eta": float(np.sqrt(trace.records[-1].eta2)),
               "marked_fraction": float(np.mean(
                   [r.nmarked / r.nelems for r in trace.records[:-1]]))
               if len(trace.records) > 1 else 0.0}
        row.update({f"alpha_{k}": v
                    for k, v in contraction_summary(trace).items()})
        try:
            row["rate"] = rate_fit(trace)
        except ValueError:
            row["rate"] = np.nan
        rows.append(row)
    return rows
