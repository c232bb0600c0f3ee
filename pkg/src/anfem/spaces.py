"""Crouzeix-Raviart / P0 spaces, saddle-point assembly and solve.

Velocity dofs: two components per interior edge (edge-mean values); boundary
edge means are zero and carry no dof.  Pressure: one value per element with
the zero-mean constraint imposed through a single Lagrange multiplier row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from . import quadrature as quad
from .mesh import Triangulation
from .problems import LoadFunction


class SolverError(RuntimeError):
    pass


def edge_dof_map(mesh: Triangulation) -> np.ndarray:
    """edge id -> interior-edge dof index, -1 on the boundary."""
    dof = np.full(mesh.num_edges, -1, dtype=np.int64)
    interior = mesh.interior_edges
    dof[interior] = np.arange(len(interior))
    return dof


def num_velocity_dofs(mesh: Triangulation) -> int:
    return 2 * len(mesh.interior_edges)


@dataclass
class SaddleSystem:
    mesh: Triangulation
    A: sparse.csr_matrix          # velocity block, SPD on the CR space
    B: sparse.csr_matrix          # divergence coupling, (nt, nu)
    F: np.ndarray                 # load vector, (nu,)
    mu: float
    load: LoadFunction

    @property
    def nu(self) -> int:
        return self.A.shape[0]


@dataclass
class DiscreteSolution:
    mesh: Triangulation
    u: np.ndarray                 # (2 * n_interior_edges,)
    p: np.ndarray                 # (nt,)
    mu: float

    def velocity_coeffs(self) -> np.ndarray:
        """(n_interior_edges, 2) edge-mean values."""
        return self.u.reshape(-1, 2)


def _local_dofs(mesh: Triangulation):
    """Per element: dof index of local edge i (or -1), shape (nt, 3)."""
    return edge_dof_map(mesh)[mesh.tri_edges]


def assemble_saddle(mesh: Triangulation, load: LoadFunction,
                    mu: float = 1.0) -> SaddleSystem:
    if mu <= 0:
        raise ValueError("viscosity mu must be positive")
    nt = mesh.num_triangles
    nu = num_velocity_dofs(mesh)
    ldof = _local_dofs(mesh)                    # (nt, 3)
    gpsi = -2.0 * mesh.bary_grads               # (nt, 3, 2) grad of CR basis

    # scalar stiffness S_ij = mu |K| gpsi_i . gpsi_j, same for both components
    S = mu * mesh.area[:, None, None] * np.einsum(
        "tid,tjd->tij", gpsi, gpsi)
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            mask = (ldof[:, i] >= 0) & (ldof[:, j] >= 0)
            for c in range(2):
                rows.append(2 * ldof[mask, i] + c)
                cols.append(2 * ldof[mask, j] + c)
                vals.append(S[mask, i, j])
    A = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nu, nu))

    # divergence coupling b(v, q) = sum_K q_K |K| div v|_K
    brows, bcols, bvals = [], [], []
    elem_ids = np.arange(nt)
    for i in range(3):
        mask = ldof[:, i] >= 0
        for c in range(2):
            brows.append(elem_ids[mask])
            bcols.append(2 * ldof[mask, i] + c)
            bvals.append(mesh.area[mask] * gpsi[mask, i, c])
    B = sparse.csr_matrix(
        (np.concatenate(bvals), (np.concatenate(brows), np.concatenate(bcols))),
        shape=(nt, nu))

    # load vector by the edge-midpoint rule: psi_i(m_j) = delta_ij
    mids = quad.tri_points(mesh, quad.MIDPOINT_BARY)   # (nt, 3, 2)
    gvals = load.g(mids[..., 0], mids[..., 1])         # (nt, 3, 2)
    F = np.zeros(nu)
    for i in range(3):
        mask = ldof[:, i] >= 0
        contrib = (mesh.area[mask] / 3.0)[:, None] * gvals[mask, i]
        np.add.at(F, 2 * ldof[mask, i], contrib[:, 0])
        np.add.at(F, 2 * ldof[mask, i] + 1, contrib[:, 1])

    return SaddleSystem(mesh=mesh, A=A, B=B, F=F, mu=mu, load=load)


def solve_saddle(system: SaddleSystem) -> DiscreteSolution:
    mesh = system.mesh
    nu, nt = system.nu, mesh.num_triangles
    if nu == 0:
        raise SolverError("mesh has no interior edges; system is singular")
    areas = mesh.area
    a_col = sparse.csr_matrix(
        (areas, (np.arange(nt), np.zeros(nt, dtype=np.int64))),
        shape=(nt, 1))
    K = sparse.bmat(
        [[system.A, system.B.T, None],
         [system.B, None, a_col],
         [None, a_col.T, None]], format="csc")
    rhs = np.concatenate([system.F, np.zeros(nt + 1)])
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SolverError(f"saddle-point factorization failed: {exc}") from exc
    sol = lu.solve(rhs)
    # a couple of iterative-refinement sweeps keep the discrete divergence
    # at machine precision on larger meshes
    for _ in range(2):
        r = rhs - K @ sol
        sol = sol + lu.solve(r)
    resid = np.linalg.norm(K @ sol - rhs)
    scale = max(np.linalg.norm(rhs), 1.0)
    if not np.isfinite(resid) or resid > 1e-10 * scale:
        raise SolverError(f"linear solve residual too large: {resid:.3e}")
    u = sol[:nu]
    p = sol[nu:nu + nt]
    p = p - (areas @ p) / areas.sum()   # exact zero mean
    return DiscreteSolution(mesh=mesh, u=u, p=p, mu=system.mu)


def solve(mesh: Triangulation, load: LoadFunction,
          mu: float = 1.0) -> DiscreteSolution:
    return solve_saddle(assemble_saddle(mesh, load, mu))


# ---------------------------------------------------------------------------
# elementwise evaluation of CR functions


def cr_gradients(mesh: Triangulation, u: np.ndarray) -> np.ndarray:
    """Per-element gradient tensor G[t, i, j] = d u_i / d x_j, (nt, 2, 2)."""
    ldof = _local_dofs(mesh)
    coeffs = np.zeros((mesh.num_triangles, 3, 2))
    mask = ldof >= 0
    coeffs[mask] = u.reshape(-1, 2)[ldof[mask]]
    gpsi = -2.0 * mesh.bary_grads
    return np.einsum("tic,tid->tcd", coeffs, gpsi)


def cr_element_coeffs(mesh: Triangulation, u: np.ndarray) -> np.ndarray:
    """(nt, 3, 2) edge-mean values per element (zeros on boundary edges)."""
    ldof = _local_dofs(mesh)
    coeffs = np.zeros((mesh.num_triangles, 3, 2))
    mask = ldof >= 0
    coeffs[mask] = u.reshape(-1, 2)[ldof[mask]]
    return coeffs


def cr_values(mesh: Triangulation, u: np.ndarray, bary: np.ndarray
              ) -> np.ndarray:
    """Values at barycentric points: (nt, nq, 2).  psi_i = 1 - 2 lambda_i."""
    coeffs = cr_element_coeffs(mesh, u)
    basis = 1.0 - 2.0 * bary                        # (nq, 3)
    return np.einsum("qi,tic->tqc", basis, coeffs)


def cr_vertex_values(mesh: Triangulation, u: np.ndarray) -> np.ndarray:
    """One-sided values at element corners, (nt, 3, 2)."""
    return cr_values(mesh, u, np.eye(3))


def compute_stress(sol: DiscreteSolution) -> np.ndarray:
    """sigma_K = mu grad(u_k) + p_k Id, piecewise constant (nt, 2, 2)."""
    sigma = sol.mu * cr_gradients(sol.mesh, sol.u)
    sigma[:, 0, 0] += sol.p
    sigma[:, 1, 1] += sol.p
    return sigma


# ---------------------------------------------------------------------------
# broken norms


def broken_grad_norm_sq(mesh: Triangulation, u: np.ndarray,
                        elements=None) -> float:
    G = cr_gradients(mesh, u)
    contrib = mesh.area * np.einsum("tij,tij->t", G, G)
    if elements is not None:
        contrib = contrib[elements]
    return float(contrib.sum())


def broken_div(mesh: Triangulation, u: np.ndarray) -> np.ndarray:
    G = cr_gradients(mesh, u)
    return G[:, 0, 0] + G[:, 1, 1]


def broken_div_norm_sq(mesh: Triangulation, u: np.ndarray) -> float:
    d = broken_div(mesh, u)
    return float((mesh.area * d ** 2).sum())


def l2_norm_sq(mesh: Triangulation, u: np.ndarray) -> float:
    # midpoint rule is exact for squares of element-wise linears
    vals = cr_values(mesh, u, quad.MIDPOINT_BARY)
    return float((mesh.area / 3.0 * np.einsum("tqc,tqc->t", vals, vals)).sum())


def energy_norm_sq(mesh: Triangulation, u: np.ndarray, q: np.ndarray,
                   gamma1: float = 1.0) -> float:
    """Triple norm squared: ||grad v||^2 + gamma1 ||q||^2."""
    return broken_grad_norm_sq(mesh, u) + gamma1 * float(
        (mesh.area * q ** 2).sum())


# ---------------------------------------------------------------------------
# errors against a manufactured solution


def velocity_error_sq(sol: DiscreteSolution, load: LoadFunction) -> float:
    """Broken H1 seminorm error squared, degree-4 quadrature."""
    mesh = sol.mesh
    G = cr_gradients(mesh, sol.u)
    pts = quad.tri_points(mesh, quad.DEG4_BARY)
    gu = load.grad_velocity(pts[..., 0], pts[..., 1])   # (nt, nq, 2, 2)
    diff = gu - G[:, None, :, :]
    per_pt = np.einsum("tqij,tqij->tq", diff, diff)
    return float((mesh.area * (per_pt @ quad.DEG4_WEIGHTS)).sum())


def pressure_error_sq(sol: DiscreteSolution, load: LoadFunction) -> float:
    mesh = sol.mesh
    pts = quad.tri_points(mesh, quad.DEG4_BARY)
    pe = load.pressure(pts[..., 0], pts[..., 1])
    diff = (pe - sol.p[:, None]) ** 2
    return float((mesh.area * (diff @ quad.DEG4_WEIGHTS)).sum())


def max_element_divergence(sol: DiscreteSolution) -> float:
    return float(np.abs(broken_div(sol.mesh, sol.u)).max())


def galerkin_residual(system: SaddleSystem, sol: DiscreteSolution) -> float:
    """max |Res_k(phi_i)| over all same-level CR basis functions."""
    r = system.F - system.A @ sol.u - system.B.T @ sol.p
    return float(np.abs(r).max()) if len(r) else 0.0
