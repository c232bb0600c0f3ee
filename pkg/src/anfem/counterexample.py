"""Criss-cross mesh family on the diamond and the sqrt(N) scaling witness.

The diamond |x|+|y| <= 1 is cut by N lines parallel to each pair of sides
into an N x N grid of sub-diamonds; each sub-diamond is split by its vertical
diagonal, giving 2 N^2 triangles.  A coarse jump [u] = y across the vertical
diagonal AC paired with an alternating-sign conforming hat combination
produces a boundary pairing that defeats any gamma-independent bound for the
naive prolongation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Triangulation, build_initial
from .domains import diamond


@dataclass
class CrissCrossFamily:
    n: int                      # odd
    coarse: Triangulation       # two triangles ABC, ACD
    fine: Triangulation         # 2 N^2 triangles
    sign_nodes: np.ndarray      # fine vertex ids of Z_i, i = -k..k (in order)
    ac_vertex_col: np.ndarray   # fine vertex ids on segment AC, bottom to top


def build_family(n: int) -> CrissCrossFamily:
    if n < 1 or n % 2 == 0:
        raise ValueError("family parameter must be an odd integer >= 1")
    k = (n - 1) // 2
    # lattice in rotated coordinates u = x + y, v = y - x, both in [-1, 1]
    # vertex (i, j) at u = -1 + 2i/n, v = -1 + 2j/n
    vid = {}
    verts = []
    for i in range(n + 1):
        for j in range(n + 1):
            u = -1.0 + 2.0 * i / n
            v = -1.0 + 2.0 * j / n
            vid[(i, j)] = len(verts)
            verts.append(((u - v) / 2.0, (u + v) / 2.0))
    tris = []
    for i in range(n):
        for j in range(n):
            p00 = vid[(i, j)]
            p10 = vid[(i + 1, j)]
            p01 = vid[(i, j + 1)]
            p11 = vid[(i + 1, j + 1)]
            # vertical diagonal p00 - p11 (equal x, differing y)
            tris.append((p00, p10, p11))
            tris.append((p00, p11, p01))
    fine = build_initial(np.array(verts), np.array(tris))

    sign_nodes = np.array([vid[(k + 1 + i, k + i)] for i in range(-k, k + 1)])
    ac_col = np.array([vid[(a, a)] for a in range(n + 1)])
    # reindex through build_initial: vertices are passed through unchanged
    fam = CrissCrossFamily(n=n, coarse=diamond(), fine=fine,
                           sign_nodes=sign_nodes, ac_vertex_col=ac_col)
    _validate(fam)
    return fam


def _validate(fam: CrissCrossFamily):
    n = fam.n
    assert fam.fine.num_triangles == 2 * n * n
    zx = fam.fine.vertices[fam.sign_nodes]
    k = (n - 1) // 2
    expected = np.stack([np.full(n, 1.0 / n),
                         2.0 * np.arange(-k, k + 1) / n], axis=1)
    assert np.allclose(zx, expected, atol=1e-12)


def build_test_pair(fam: CrissCrossFamily) -> np.ndarray:
    """Nodal values of v = sum_i sign(i) phi_{Z_i}, (2 * nv,) P1 field.

    The coarse function enters only through its jump [u] = y across AC and
    needs no explicit representation.
    """
    k = (fam.n - 1) // 2
    nodal = np.zeros((fam.fine.num_vertices, 2))
    for i, z in zip(range(-k, k + 1), fam.sign_nodes):
        nodal[z, 0] = float(np.sign(i))
    return nodal.ravel()


def _p1_gradients(fam: CrissCrossFamily, nodal: np.ndarray) -> np.ndarray:
    vals = nodal.reshape(-1, 2)[fam.fine.triangles]
    return np.einsum("tic,tid->tcd", vals, fam.fine.bary_grads)


def ac_segments(fam: CrissCrossFamily):
    """Fine edges along AC with their left/right incident elements."""
    fine = fam.fine
    on_ac = set()
    col = set(fam.ac_vertex_col.tolist())
    segs = []
    for e in range(fine.num_edges):
        a, b = fine.edges[e]
        if a in col and b in col:
            segs.append(e)
            on_ac.add(e)
    assert len(segs) == fam.n
    out = []
    for e in segs:
        t0, t1 = fine.edge_tris[e]
        c0 = fine.centroids()[t0]
        if t1 < 0:
            raise RuntimeError("AC segment on the boundary")
        left, right = (t0, t1) if c0[0] < 0 else (t1, t0)
        ymid = fine.edge_midpoints()[e][1]
        out.append((e, left, right, ymid))
    out.sort(key=lambda r: r[3])
    return out


def boundary_sum(fam: CrissCrossFamily, nodal: np.ndarray) -> float:
    """int_AC [u] {dv/dnu} ds with [u] = y and nu = (1, 0).

    The normal-derivative average is constant per fine segment; the jump is
    linear, so per-segment exact integration is midpoint * length.
    """
    grads = _p1_gradients(fam, nodal)
    total = 0.0
    for e, left, right, ymid in ac_segments(fam):
        avg = 0.5 * (grads[left][0, 0] + grads[right][0, 0])
        total += avg * ymid * fam.fine.edge_length[e]
    return float(total)


def grad_norm_sq(fam: CrissCrossFamily, nodal: np.ndarray) -> float:
    g = _p1_gradients(fam, nodal)
    return float((fam.fine.area * np.einsum("tij,tij->t", g, g)).sum())


def closed_form(n: int) -> float:
    return n / 2.0 - 1.0 / (2.0 * n)


def coarse_jump_term() -> float:
    """sum over coarse-only edges of h_E^{-1} ||[u]||^2 with [u] = y on AC.

    AC has length 2 and int_{-1}^{1} y^2 dy = 2/3, so the value is 1/3;
    it carries no fine-mesh quantity and is constant in N.
    """
    return (2.0 / 3.0) / 2.0


def pairing_constant(fam: CrissCrossFamily) -> float:
    nodal = build_test_pair(fam)
    gsq = grad_norm_sq(fam, nodal)
    if gsq == 0.0:
        return 0.0
    return boundary_sum(fam, nodal) / (
        np.sqrt(coarse_jump_term()) * np.sqrt(gsq))


def scaling_study(n_values) -> dict:
    """Fit the growth exponent of the pairing constant against N."""
    n_values = sorted(int(n) for n in n_values)
    if len(n_values) < 4:
        raise ValueError("need at least 4 odd N values")
    rows = []
    for n in n_values:
        fam = build_family(n)
        nodal = build_test_pair(fam)
        bs = boundary_sum(fam, nodal)
        gsq = grad_norm_sq(fam, nodal)
        rows.append({"N": n, "boundary_sum": bs, "grad_norm_sq": gsq,
                     "C": pairing_constant(fam), "closed_form": closed_form(n)})
    logn = np.log([r["N"] for r in rows])
    logc = np.log([r["C"] for r in rows])
    exponent = float(np.polyfit(logn, logc, 1)[0])
    return {"rows": rows, "exponent": exponent}
