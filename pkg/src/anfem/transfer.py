"""Inter-mesh operators: conservative interpolation, restriction, the naive
prolongation, nodal averaging onto conforming P1, and the mixed prolongation
that switches between averaging on the refined region and identity elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature as quad
from .mesh import (NestingSets, Triangulation, ancestor_map, barycentric,
                   nesting_sets)
from .spaces import cr_element_coeffs, cr_gradients, edge_dof_map


@dataclass
class FineFunction:
    """A CR or conforming-P1 vector field tied to one mesh."""
    kind: str                 # "cr" | "p1"
    coeffs: np.ndarray        # cr: (2 * n_interior_edges,); p1: (2 * nv,)
    mesh: Triangulation

    def __post_init__(self):
        expected = (2 * len(self.mesh.interior_edges) if self.kind == "cr"
                    else 2 * self.mesh.num_vertices)
        if len(self.coeffs) != expected:
            raise ValueError("coefficient length does not match space")


# ---------------------------------------------------------------------------
# conservative interpolation


def conservative_interpolation(field, mesh: Triangulation,
                               npts: int = 10) -> np.ndarray:
    """CR coefficients with the same edge means as `field` (interior edges)."""
    s, w = quad.gauss_edge(npts)
    p0 = mesh.vertices[mesh.edges[:, 0]]
    p1 = mesh.vertices[mesh.edges[:, 1]]
    pts = p0[:, None, :] * (1.0 - s)[None, :, None] \
        + p1[:, None, :] * s[None, :, None]          # (ne, nq, 2)
    vals = field(pts[..., 0], pts[..., 1])            # (ne, nq, 2)
    means = np.einsum("q,eqc->ec", w, vals)
    return means[mesh.interior_edges].ravel()


def edge_means_of_field(field, mesh: Triangulation, npts: int = 16):
    """Edge means of an arbitrary field over all edges (oracle helper)."""
    s, w = quad.gauss_edge(npts)
    p0 = mesh.vertices[mesh.edges[:, 0]]
    p1 = mesh.vertices[mesh.edges[:, 1]]
    pts = p0[:, None, :] * (1.0 - s)[None, :, None] \
        + p1[:, None, :] * s[None, :, None]
    vals = field(pts[..., 0], pts[..., 1])
    return np.einsum("q,eqc->ec", w, vals)


# ---------------------------------------------------------------------------
# geometric classification of fine edges relative to a coarse mesh


def classify_fine_edges(coarse: Triangulation, fine: Triangulation,
                        ancestors: np.ndarray, tol: float = 1e-10):
    """For each fine edge: the coarse elements of its patch omega_{E,k}.

    Returns (host, coarse_edge) where host[e] is a list of coarse element ids
    and coarse_edge[e] is the coarse edge the fine edge lies on (-1 if the
    edge is interior to a single coarse element).
    """
    mids = fine.edge_midpoints()
    ne = fine.num_edges
    host = [None] * ne
    coarse_edge = np.full(ne, -1, dtype=np.int64)
    for e in range(ne):
        t0 = fine.edge_tris[e, 0]
        k = ancestors[t0]
        lam = barycentric(coarse, k, mids[e])
        onedge = np.flatnonzero(np.abs(lam) <= tol)
        if onedge.size == 0:
            host[e] = [k]
        else:
            ce = coarse.tri_edges[k, onedge[0]]
            coarse_edge[e] = ce
            host[e] = [t for t in coarse.edge_tris[ce] if t >= 0]
    return host, coarse_edge


def _cr_eval_in_element(coarse: Triangulation, coeffs_elem: np.ndarray,
                        k: int, point) -> np.ndarray:
    lam = barycentric(coarse, k, point)
    basis = 1.0 - 2.0 * lam
    return basis @ coeffs_elem[k]


# ---------------------------------------------------------------------------
# restriction to a coarser mesh


def restriction(v_fine: np.ndarray, fine: Triangulation,
                coarse: Triangulation,
                ancestors: np.ndarray | None = None) -> np.ndarray:
    """Coarse CR function whose edge integrals are the summed fine-edge
    integrals of v_fine."""
    if ancestors is None:
        ancestors = ancestor_map(coarse, fine, check=False)
    _, coarse_edge = classify_fine_edges(coarse, fine, ancestors)
    fdof = edge_dof_map(fine)
    fmeans = np.zeros((fine.num_edges, 2))
    has = fdof >= 0
    fmeans[has] = v_fine.reshape(-1, 2)[fdof[has]]

    integrals = np.zeros((coarse.num_edges, 2))
    covered = np.zeros(coarse.num_edges)
    for e in range(fine.num_edges):
        ce = coarse_edge[e]
        if ce >= 0:
            integrals[ce] += fmeans[e] * fine.edge_length[e]
            covered[ce] += fine.edge_length[e]
    if np.any(np.abs(covered - coarse.edge_length) >
              1e-9 * coarse.edge_length):
        raise ValueError("fine edges do not tile the coarse edges; "
                         "meshes are not nested")
    means = integrals / coarse.edge_length[:, None]
    return means[coarse.interior_edges].ravel()


# ---------------------------------------------------------------------------
# naive prolongation I'


def naive_prolongation(v_coarse: np.ndarray, coarse: Triangulation,
                       fine: Triangulation,
                       ancestors: np.ndarray | None = None) -> np.ndarray:
    """Fine-edge means set to the patch average of the one-sided coarse traces."""
    if ancestors is None:
        ancestors = ancestor_map(coarse, fine, check=False)
    host, _ = classify_fine_edges(coarse, fine, ancestors)
    coeffs_elem = cr_element_coeffs(coarse, v_coarse)
    mids = fine.edge_midpoints()
    out = np.zeros((len(fine.interior_edges), 2))
    for idx, e in enumerate(fine.interior_edges):
        vals = [_cr_eval_in_element(coarse, coeffs_elem, k, mids[e])
                for k in host[e]]
        out[idx] = np.mean(vals, axis=0)
    return out.ravel()


# ---------------------------------------------------------------------------
# nodal averaging onto the conforming P1 space


def nodal_averaging(v: np.ndarray, mesh: Triangulation) -> np.ndarray:
    """Average the one-sided vertex values; zero at boundary vertices.

    Returns (2 * nv,) nodal values of a continuous piecewise linear field.
    """
    from .spaces import cr_vertex_values
    vv = cr_vertex_values(mesh, v)                  # (nt, 3, 2)
    sums = np.zeros((mesh.num_vertices, 2))
    counts = np.zeros(mesh.num_vertices)
    for i in range(3):
        np.add.at(sums, mesh.triangles[:, i], vv[:, i])
        np.add.at(counts, mesh.triangles[:, i], 1.0)
    nodal = sums / np.maximum(counts, 1.0)[:, None]
    nodal[mesh.boundary_vertices] = 0.0
    return nodal.ravel()


def p1_eval(nodal: np.ndarray, mesh: Triangulation, k: int,
            point) -> np.ndarray:
    lam = barycentric(mesh, k, point)
    return lam @ nodal.reshape(-1, 2)[mesh.triangles[k]]


def p1_gradients(nodal: np.ndarray, mesh: Triangulation) -> np.ndarray:
    """(nt, 2, 2) gradients of a P1 nodal field."""
    vals = nodal.reshape(-1, 2)[mesh.triangles]     # (nt, 3, 2)
    return np.einsum("tic,tid->tcd", vals, mesh.bary_grads)


def p1_to_cr(nodal: np.ndarray, mesh: Triangulation) -> np.ndarray:
    """Edge midpoint values of a continuous P1 field as CR coefficients."""
    nod = nodal.reshape(-1, 2)
    e = mesh.edges[mesh.interior_edges]
    return (0.5 * (nod[e[:, 0]] + nod[e[:, 1]])).ravel()


def broken_l2_error_sq(mesh: Triangulation, v: np.ndarray,
                       field, deg_bary=None, deg_w=None) -> float:
    """||v - field||_{L2}^2 of a CR function against a callable field."""
    from .spaces import cr_values
    bary = quad.DEG4_BARY if deg_bary is None else deg_bary
    w = quad.DEG4_WEIGHTS if deg_w is None else deg_w
    pts = quad.tri_points(mesh, bary)
    fv = field(pts[..., 0], pts[..., 1])
    vv = cr_values(mesh, v, bary)
    diff = np.einsum("tqc,tqc->tq", fv - vv, fv - vv)
    return float((mesh.area * (diff @ w)).sum())


# ---------------------------------------------------------------------------
# mixed prolongation J


def mixed_prolongation(v_coarse: np.ndarray, coarse: Triangulation,
                       fine: Triangulation,
                       nesting: NestingSets | None = None) -> np.ndarray:
    """Averaged values on the refined region, identity on the common region.

    Per fine interior edge: if any incident fine element descends from a
    refined coarse element (the edge lies in the refined region or on the
    boundary of the common region), take the edge mean of the averaged
    conforming field; otherwise keep the coarse edge mean.
    """
    if nesting is None:
        nesting = nesting_sets(coarse, fine)
    anc = nesting.ancestors
    refined_mask = np.zeros(coarse.num_triangles, dtype=bool)
    refined_mask[nesting.refined] = True

    nodal = nodal_averaging(v_coarse, coarse)
    coeffs_elem = cr_element_coeffs(coarse, v_coarse)
    mids = fine.edge_midpoints()
    out = np.zeros((len(fine.interior_edges), 2))
    for idx, e in enumerate(fine.interior_edges):
        t0, t1 = fine.edge_tris[e]
        k0 = anc[t0]
        k1 = anc[t1] if t1 >= 0 else k0
        if refined_mask[k0] or refined_mask[k1]:
            out[idx] = p1_eval(nodal, coarse, k0, mids[e])
        else:
            v0 = _cr_eval_in_element(coarse, coeffs_elem, k0, mids[e])
            v1 = _cr_eval_in_element(coarse, coeffs_elem, k1, mids[e])
            out[idx] = 0.5 * (v0 + v1)
    return out.ravel()


# ---------------------------------------------------------------------------
# empirical constants for the prolongation bounds


def prolongation_defect_constant(coarse: Triangulation, fine: Triangulation,
                                 v_coarse: np.ndarray,
                                 nesting: NestingSets | None = None,
                                 operator: str = "mixed") -> float:
    """||grad(P v - v)||^2 over the jump estimator on the refined neighborhood.

    P is the mixed prolongation for operator="mixed", the naive one for
    operator="naive".
    """
    from .estimator import _element_jump_sq
    if nesting is None:
        nesting = nesting_sets(coarse, fine)
    if operator == "mixed":
        pv = mixed_prolongation(v_coarse, coarse, fine, nesting)
    elif operator == "naive":
        pv = naive_prolongation(v_coarse, coarse, fine, nesting.ancestors)
    else:
        raise ValueError("operator must be 'mixed' or 'naive'")
    Gp = cr_gradients(fine, pv)
    Gc = cr_gradients(coarse, v_coarse)[nesting.ancestors]
    diff = Gp - Gc
    num = float((fine.area * np.einsum("tij,tij->t", diff, diff)).sum())
    jumps = _element_jump_sq(coarse, cr_gradients(coarse, v_coarse))
    den = float(jumps[nesting.neighborhood].sum())
    if den == 0.0:
        return 0.0 if num < 1e-24 else np.inf
    return num / den
