"""Residual-based a posteriori estimator, oscillation and consistency error.

Per element: eta_K = h_K ||g||_K + (sum_{E in dK} h_K ||[grad u tau_E]||_E^2)^{1/2}.
Boundary edges contribute the full tangential trace (jump against zero).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from . import quadrature as quad
from .mesh import Triangulation, ancestor_map
from .problems import LoadFunction
from .spaces import (DiscreteSolution, _local_dofs, cr_gradients,
                     edge_dof_map, num_velocity_dofs)


@dataclass
class EstimatorReport:
    mesh: Triangulation
    volume: np.ndarray        # (nt,) h_K ||g||_K
    jump_sq: np.ndarray       # (nt,) sum over dK of h_K ||[grad u tau]||_E^2
    eta: np.ndarray           # (nt,) volume + sqrt(jump_sq)
    osc_sq: np.ndarray        # (nt,) h_K^2 ||g - g_K||_K^2
    vol_sq: np.ndarray        # (nt,) h_K^2 ||g||_K^2
    beta1: float = 1.0

    @property
    def eta_sq(self) -> np.ndarray:
        return self.eta ** 2

    @property
    def total_eta_sq(self) -> float:
        return float(self.eta_sq.sum())

    @property
    def total_osc_sq(self) -> float:
        return float(self.osc_sq.sum())

    @property
    def total_vol_sq(self) -> float:
        return float(self.vol_sq.sum())

    def to_csv(self, path):
        with open(path, "w") as f:
            f.write("anfem-estimator-v1\n")
            f.write("element,volume,jump,eta2,osc2\n")
            for k in range(len(self.eta)):
                f.write(f"{k},{self.volume[k]:.17g},"
                        f"{np.sqrt(self.jump_sq[k]):.17g},"
                        f"{self.eta_sq[k]:.17g},{self.osc_sq[k]:.17g}\n")


def tangential_jumps(mesh: Triangulation, grads: np.ndarray) -> np.ndarray:
    """Per edge: |[grad u tau_E]|^2 of element-wise constant gradients, (ne,)."""
    tau = mesh.edge_tangent
    k0 = mesh.edge_tris[:, 0]
    k1 = mesh.edge_tris[:, 1]
    gt0 = np.einsum("eij,ej->ei", grads[k0], tau)
    gt1 = np.where(mesh.boundary_edge[:, None], 0.0,
                   np.einsum("eij,ej->ei", grads[np.maximum(k1, 0)], tau))
    d = gt0 - gt1
    return np.einsum("ei,ei->e", d, d)


def _element_jump_sq(mesh: Triangulation, grads: np.ndarray) -> np.ndarray:
    """sum_{E subset dK} h_K ||[grad u tau_E]||^2_{L2(E)} per element."""
    jump_e = tangential_jumps(mesh, grads) * mesh.edge_length
    per_elem = jump_e[mesh.tri_edges].sum(axis=1)
    return mesh.h * per_elem


def _volume_terms(mesh: Triangulation, load: LoadFunction):
    def gsq(x, y):
        v = load.g(x, y)
        return np.einsum("...c,...c->...", v, v)

    g_l2sq = quad.integrate(mesh, gsq)
    g_mean = quad.integrate(mesh, load.g) / mesh.area[:, None]
    osc_sq = g_l2sq - mesh.area * np.einsum("tc,tc->t", g_mean, g_mean)
    osc_sq = np.maximum(osc_sq, 0.0)
    return g_l2sq, osc_sq


def estimator_from_grads(mesh: Triangulation, grads: np.ndarray,
                         load: LoadFunction,
                         beta1: float = 1.0) -> EstimatorReport:
    g_l2sq, osc_raw = _volume_terms(mesh, load)
    volume = mesh.h * np.sqrt(np.maximum(g_l2sq, 0.0))
    jump_sq = _element_jump_sq(mesh, grads)
    eta = volume + np.sqrt(jump_sq)
    return EstimatorReport(mesh=mesh, volume=volume, jump_sq=jump_sq,
                           eta=eta, osc_sq=mesh.h ** 2 * osc_raw,
                           vol_sq=mesh.h ** 2 * g_l2sq, beta1=beta1)


def estimate(sol: DiscreteSolution, load: LoadFunction,
             beta1: float = 1.0) -> EstimatorReport:
    grads = cr_gradients(sol.mesh, sol.u)
    return estimator_from_grads(sol.mesh, grads, load, beta1)


def estimate_frozen(sol_coarse: DiscreteSolution, fine: Triangulation,
                    load: LoadFunction, ancestors: np.ndarray | None = None,
                    beta1: float = 1.0) -> EstimatorReport:
    """Estimator of the frozen coarse solution evaluated on a nested fine mesh."""
    if ancestors is None:
        ancestors = ancestor_map(sol_coarse.mesh, fine, check=False)
    coarse_grads = cr_gradients(sol_coarse.mesh, sol_coarse.u)
    return estimator_from_grads(fine, coarse_grads[ancestors], load, beta1)


def eta_K(sol: DiscreteSolution, k: int, load: LoadFunction) -> float:
    return float(estimate(sol, load).eta[k])


def eta_set(report: EstimatorReport, elements) -> float:
    """Squared estimator total over an element set."""
    elements = np.asarray(elements, dtype=np.int64)
    return float(report.eta_sq[elements].sum()) if elements.size else 0.0


def oscillation(load: LoadFunction, mesh: Triangulation):
    """(total osc^2, per-element osc_K^2)."""
    g_l2sq, osc_raw = _volume_terms(mesh, load)
    per = mesh.h ** 2 * osc_raw
    return float(per.sum()), per


def modified_eta(report: EstimatorReport, beta1: float | None = None) -> float:
    """Squared modified estimator sum_K (beta1 h_K^2 ||g||^2 + eta_K^2)."""
    b1 = report.beta1 if beta1 is None else beta1
    if b1 <= 0:
        raise ValueError("beta1 must be positive")
    return float((b1 * report.vol_sq + report.eta_sq).sum())


# ---------------------------------------------------------------------------
# residual functional on a finer mesh


def residual_functional(sol_coarse: DiscreteSolution, fine: Triangulation,
                        v: np.ndarray, load: LoadFunction,
                        ancestors: np.ndarray | None = None) -> float:
    """Res(v) = (g, v) - a(u_c, v) - b(v, p_c), broken operators on `fine`.

    v is a CR coefficient vector on `fine`; the coarse solution enters through
    its piecewise-constant stress on the fine mesh.
    """
    if ancestors is None:
        ancestors = ancestor_map(sol_coarse.mesh, fine, check=False)
    mu = sol_coarse.mu
    Gc = cr_gradients(sol_coarse.mesh, sol_coarse.u)[ancestors]
    Gv = cr_gradients(fine, v)
    a_term = mu * float((fine.area * np.einsum(
        "tij,tij->t", Gc, Gv)).sum())
    divv = Gv[:, 0, 0] + Gv[:, 1, 1]
    b_term = float((fine.area * divv * sol_coarse.p[ancestors]).sum())
    g_term = _load_inner(fine, v, load)
    return g_term - a_term - b_term


def _load_inner(mesh: Triangulation, v: np.ndarray, load: LoadFunction
                ) -> float:
    # same edge-midpoint rule as assembly, so Res vanishes on the coarse
    # space exactly in floating point
    from .spaces import cr_values
    mids = quad.tri_points(mesh, quad.MIDPOINT_BARY)
    gv = load.g(mids[..., 0], mids[..., 1])
    vv = cr_values(mesh, v, quad.MIDPOINT_BARY)
    return float((mesh.area / 3.0 * np.einsum(
        "tqc,tqc->t", gv, vv)).sum())


# ---------------------------------------------------------------------------
# computable consistency error


def consistency_error(sigma, mesh: Triangulation, load: LoadFunction) -> float:
    """Dual norm sup_v [(g,v) - (sigma, grad v)] / ||grad v|| over the CR space.

    Computed by solving (grad w, grad v) = (g, v) - (sigma, grad v) and
    returning ||grad w||.  `sigma` is a callable (x, y) -> (..., 2, 2).
    """
    nu = num_velocity_dofs(mesh)
    if nu == 0:
        return 0.0
    ldof = _local_dofs(mesh)
    gpsi = -2.0 * mesh.bary_grads
    S = mesh.area[:, None, None] * np.einsum("tid,tjd->tij", gpsi, gpsi)
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            mask = (ldof[:, i] >= 0) & (ldof[:, j] >= 0)
            for c in range(2):
                rows.append(2 * ldof[mask, i] + c)
                cols.append(2 * ldof[mask, j] + c)
                vals.append(S[mask, i, j])
    A0 = sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nu, nu))

    # rhs: (g, psi_i e_c) - (sigma, grad(psi_i e_c))
    mids = quad.tri_points(mesh, quad.MIDPOINT_BARY)
    gvals = load.g(mids[..., 0], mids[..., 1])
    sigma_int = quad.integrate(
        mesh, lambda x, y: np.asarray(sigma(x, y)))     # (nt, 2, 2)
    rhs = np.zeros(nu)
    for i in range(3):
        mask = ldof[:, i] >= 0
        gl = (mesh.area[mask] / 3.0)[:, None] * gvals[mask, i]
        sl = np.einsum("tcd,td->tc", sigma_int[mask], gpsi[mask, i])
        for c in range(2):
            np.add.at(rhs, 2 * ldof[mask, i] + c, gl[:, c] - sl[:, c])
    w = spla.splu(A0).solve(rhs)
    return float(np.sqrt(max(w @ (A0 @ w), 0.0)))
