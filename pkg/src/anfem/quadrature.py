"""Quadrature rules on triangles (barycentric) and edges (Gauss-Legendre)."""

from __future__ import annotations

import numpy as np

# edge midpoints: exact for quadratics, and the natural rule for the
# nonconforming P1 basis (each basis function is 1 at one midpoint)
MIDPOINT_BARY = np.array([[0.0, 0.5, 0.5],    # row i: midpoint of the edge
                          [0.5, 0.0, 0.5],    # opposite local vertex i
                          [0.5, 0.5, 0.0]])
MIDPOINT_WEIGHTS = np.full(3, 1.0 / 3.0)

# 6-point rule, exact for degree 4
_a1, _b1 = 0.816847572980459, 0.091576213509771
_a2, _b2 = 0.108103018168070, 0.445948490915965
DEG4_BARY = np.array([
    [_a1, _b1, _b1], [_b1, _a1, _b1], [_b1, _b1, _a1],
    [_a2, _b2, _b2], [_b2, _a2, _b2], [_b2, _b2, _a2]])
DEG4_WEIGHTS = np.array([0.109951743655322] * 3 + [0.223381589678011] * 3)


def tri_points(mesh, bary):
    """Physical quadrature points, shape (nt, nq, 2)."""
    corners = mesh.vertices[mesh.triangles]         # (nt, 3, 2)
    return np.einsum("qi,tid->tqd", bary, corners)


def integrate(mesh, f, bary=DEG4_BARY, weights=DEG4_WEIGHTS):
    """Elementwise integrals of f(x, y); returns (nt, ...) array."""
    pts = tri_points(mesh, bary)
    vals = f(pts[..., 0], pts[..., 1])              # (nt, nq, ...)
    extra = vals.shape[2:]
    w = weights.reshape((1, -1) + (1,) * len(extra))
    sums = (vals * w).sum(axis=1)
    return sums * mesh.area.reshape((-1,) + (1,) * len(extra))


def gauss_edge(npts: int = 4):
    """Nodes in [0, 1] and weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def edge_mean(p0, p1, f, npts: int = 4):
    """Mean of a vector field over the segment p0-p1."""
    s, w = gauss_edge(npts)
    pts = np.outer(1.0 - s, p0) + np.outer(s, p1)
    vals = np.asarray(f(pts[:, 0], pts[:, 1]))
    return np.tensordot(w, vals, axes=(0, 0))
