"""Conforming triangulations with newest-vertex-bisection refinement.

A triangle is stored as an ordered vertex triple (v0, v1, v2) with positive
signed area.  The refinement edge is always (v0, v1); v2 plays the role of
the newest vertex.  Bisection inserts the midpoint m of (v0, v1) and produces
the children (v2, v0, m) and (v1, v2, m), so the new vertex becomes the peak
of both children and the remaining parent edges become their refinement edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    pass


# local edge i is opposite local vertex i
_LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


@dataclass
class Triangulation:
    vertices: np.ndarray            # (nv, 2) float
    triangles: np.ndarray           # (nt, 3) int, refinement edge = (t0, t1)
    level: np.ndarray               # (nt,) generation count (bisections from root)
    parent: np.ndarray | None = None  # (nt,) index into the mesh bisect() was called on
    root: np.ndarray | None = None    # (nt,) index of the initial-mesh ancestor

    # derived connectivity, filled by _build_topology
    edges: np.ndarray = field(init=False)        # (ne, 2) vertex pairs, sorted
    tri_edges: np.ndarray = field(init=False)    # (nt, 3) edge id of local edge i
    edge_tris: np.ndarray = field(init=False)    # (ne, 2) incident elements, -1 pad
    boundary_edge: np.ndarray = field(init=False)  # (ne,) bool
    edge_length: np.ndarray = field(init=False)
    edge_normal: np.ndarray = field(init=False)  # (ne, 2) unit, fixed orientation
    edge_tangent: np.ndarray = field(init=False)
    area: np.ndarray = field(init=False)         # (nt,)
    h: np.ndarray = field(init=False)            # (nt,) h_K = |K|^{1/2}
    bary_grads: np.ndarray = field(init=False)   # (nt, 3, 2) gradients of the
    # barycentric coordinate functions

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.level = np.asarray(self.level, dtype=np.int64)
        if self.root is None:
            self.root = np.arange(len(self.triangles))
        self._build_topology()

    # -- basic counts ------------------------------------------------------
    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_edge)

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.edges[self.boundary_edge])

    def _build_topology(self):
        if not np.all(np.isfinite(self.vertices)):
            raise MeshError("non-finite vertex coordinates")
        tris = self.triangles
        v = self.vertices
        e1 = v[tris[:, 1]] - v[tris[:, 0]]
        e2 = v[tris[:, 2]] - v[tris[:, 0]]
        self.area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        bad = np.flatnonzero(self.area <= 0)
        if bad.size:
            raise MeshError(f"degenerate or misoriented triangle {bad[0]}")
        self.h = np.sqrt(self.area)

        # unique edges
        raw = np.concatenate(
            [tris[:, [a, b]] for a, b in _LOCAL_EDGES], axis=0)
        raw_sorted = np.sort(raw, axis=1)
        self.edges, inverse = np.unique(raw_sorted, axis=0,
                                        return_inverse=True)
        self.tri_edges = inverse.reshape(3, -1).T.copy()

        ne = len(self.edges)
        counts = np.bincount(inverse, minlength=ne)
        if counts.max() > 2:
            raise MeshError("edge shared by more than two triangles")
        self.edge_tris = np.full((ne, 2), -1, dtype=np.int64)
        # fill incident triangles, ascending triangle id per edge
        order = np.argsort(inverse, kind="stable")
        tri_of_row = np.tile(np.arange(len(tris)), 3)[order]
        eid = inverse[order]
        first = np.ones(ne, dtype=bool)
        for t, e in zip(tri_of_row, eid):
            if first[e]:
                self.edge_tris[e, 0] = t
                first[e] = False
            else:
                if t < self.edge_tris[e, 0]:
                    self.edge_tris[e, 1] = self.edge_tris[e, 0]
                    self.edge_tris[e, 0] = t
                else:
                    self.edge_tris[e, 1] = t
        self.boundary_edge = self.edge_tris[:, 1] < 0

        # hanging-node check: every vertex of an interior edge must be a
        # triangle corner of both incident elements (guaranteed by unique
        # matching above); conformity violations show up as count == 1 edges
        # that are not on the outer boundary, which we cannot detect without
        # geometry, so we additionally verify the area identity in builders.

        vec = v[self.edges[:, 1]] - v[self.edges[:, 0]]
        self.edge_length = np.linalg.norm(vec, axis=1)
        if np.any(self.edge_length <= 0):
            raise MeshError("zero-length edge")
        t = vec / self.edge_length[:, None]
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        # orientation: nu points from the lower- to the higher-id incident
        # element; outward on the boundary
        mid = 0.5 * (v[self.edges[:, 0]] + v[self.edges[:, 1]])
        k0 = self.edge_tris[:, 0]
        cent0 = v[tris[k0]].mean(axis=1)
        into_k0 = np.einsum("ij,ij->i", n, cent0 - mid) > 0
        flip = np.where(self.boundary_edge, ~into_k0, into_k0)
        n[flip] *= -1.0
        self.edge_normal = n
        self.edge_tangent = np.stack([-n[:, 1], n[:, 0]], axis=1)

        self.bary_grads = _barycentric_gradients(v, tris, self.area)

    # -- queries -----------------------------------------------------------
    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]]
                      + self.vertices[self.edges[:, 1]])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def min_angle(self) -> float:
        v = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            a = v[:, (i + 1) % 3] - v[:, i]
            b = v[:, (i + 2) % 3] - v[:, i]
            cosang = np.einsum("ij,ij->i", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return float(np.min(angles))


def _barycentric_gradients(v, tris, area):
    # grad lambda_i is the inward normal of the opposite edge scaled by 1/(2|K|)
    p = v[tris]                                   # (nt, 3, 2)
    g = np.empty((len(tris), 3, 2))
    for i in range(3):
        a, b = _LOCAL_EDGES[i]
        e = p[:, b] - p[:, a]
        g[:, i, 0] = -e[:, 1]
        g[:, i, 1] = e[:, 0]
    g /= (2.0 * area)[:, None, None]
    return g


def build_initial(vertices, triangle_connectivity) -> Triangulation:
    """Build an oriented initial mesh with refinement edges assigned.

    The refinement edge of each triangle is its longest edge; ties are broken
    by the smallest opposite-vertex id.  Triangles given with negative area
    are reordered.
    """
    v = np.asarray(vertices, dtype=float)
    tris = np.asarray(triangle_connectivity, dtype=np.int64).copy()
    if tris.ndim != 2 or tris.shape[1] != 3:
        raise MeshError("connectivity must be (nt, 3)")
    for k, t in enumerate(tris):
        if len(set(t.tolist())) != 3:
            raise MeshError(f"degenerate triangle {k}: repeated vertex")
        a = _signed_area(v, t)
        if a == 0:
            raise MeshError(f"degenerate triangle {k}: zero area")
        if a < 0:
            tris[k] = t[[0, 2, 1]]
    # rotate so that the refinement edge (longest; tie -> smallest opposite
    # vertex id) sits at local positions (0, 1)
    for k, t in enumerate(tris):
        p = v[t]
        lengths = np.array([np.linalg.norm(p[(i + 2) % 3] - p[(i + 1) % 3])
                            for i in range(3)])
        best = min(range(3),
                   key=lambda i: (-round(lengths[i], 14), t[i]))
        # refinement edge opposite local vertex `best`; want it as (v0, v1)
        tris[k] = np.roll(t, -((best + 1) % 3))
    mesh = Triangulation(v, tris, np.zeros(len(tris), dtype=np.int64))
    _check_cover(mesh)
    return mesh


def _signed_area(v, t):
    e1 = v[t[1]] - v[t[0]]
    e2 = v[t[2]] - v[t[0]]
    return 0.5 * (e1[0] * e2[1] - e1[1] * e2[0])


def _check_cover(mesh: Triangulation):
    # conformity cross-check: the boundary edges must form closed loops,
    # i.e. each boundary vertex has exactly two incident boundary edges
    bnd = mesh.edges[mesh.boundary_edge]
    if len(bnd):
        counts = np.bincount(bnd.ravel())
        deg = counts[counts > 0]
        if np.any(deg != 2):
            raise MeshError("non-conforming input: open boundary chain "
                            "(hanging node or inconsistent connectivity)")


def bisect(tri: Triangulation, marked) -> Triangulation:
    """Refine all marked elements by newest vertex bisection with completion."""
    marked = np.asarray(sorted(set(int(m) for m in np.atleast_1d(marked))),
                        dtype=np.int64) if len(np.atleast_1d(marked)) else \
        np.empty(0, dtype=np.int64)
    if len(marked) and (marked.min() < 0 or marked.max() >= tri.num_triangles):
        raise MeshError("marked set contains invalid element ids")
    if len(marked) == 0:
        return Triangulation(tri.vertices.copy(), tri.triangles.copy(),
                             tri.level.copy(),
                             parent=np.arange(tri.num_triangles),
                             root=tri.root.copy())

    nt = tri.num_triangles
    refine_edge = np.zeros(tri.num_edges, dtype=bool)
    refine_edge[tri.tri_edges[marked, 2]] = True
    # completion: any triangle with a marked edge must have its refinement
    # edge marked too; iterate to a fixpoint
    cap = 10 * nt + 10
    for _ in range(cap):
        tri_touched = refine_edge[tri.tri_edges].any(axis=1)
        need = tri.tri_edges[tri_touched, 2]
        before = refine_edge.sum()
        refine_edge[need] = True
        if refine_edge.sum() == before:
            break
    else:  # pragma: no cover - NVB completion always terminates
        raise MeshError("refinement-edge completion did not terminate")

    # new vertices at midpoints of refined edges
    new_vid = np.full(tri.num_edges, -1, dtype=np.int64)
    ref_ids = np.flatnonzero(refine_edge)
    mids = tri.edge_midpoints()[ref_ids]
    new_vid[ref_ids] = tri.num_vertices + np.arange(len(ref_ids))
    vertices = np.vstack([tri.vertices, mids])

    out_tris, out_level, out_parent, out_root = [], [], [], []

    def emit(t, lvl, par, root):
        out_tris.append(t)
        out_level.append(lvl)
        out_parent.append(par)
        out_root.append(root)

    for k in range(nt):
        t = tri.triangles[k]
        e = tri.tri_edges[k]
        lvl = tri.level[k]
        root = tri.root[k]
        if not refine_edge[e].any():
            emit(t.copy(), lvl, k, root)
            continue
        m2 = new_vid[e[2]]          # refinement edge midpoint (always refined)
        # children: (v2, v0, m2) and (v1, v2, m2)
        for child, child_edge in (((t[2], t[0], m2), e[1]),
                                  ((t[1], t[2], m2), e[0])):
            if refine_edge[child_edge]:
                mm = new_vid[child_edge]
                a, b, c = child
                emit((c, a, mm), lvl + 2, k, root)
                emit((b, c, mm), lvl + 2, k, root)
            else:
                emit(child, lvl + 1, k, root)

    mesh = Triangulation(vertices,
                         np.array(out_tris, dtype=np.int64),
                         np.array(out_level, dtype=np.int64),
                         parent=np.array(out_parent, dtype=np.int64),
                         root=np.array(out_root, dtype=np.int64))
    _check_cover(mesh)
    return mesh


def uniform_refine(tri: Triangulation, rounds: int = 1) -> Triangulation:
    for _ in range(rounds):
        tri = bisect(tri, np.arange(tri.num_triangles))
    return tri


# ---------------------------------------------------------------------------
# nesting queries between two meshes


@dataclass
class NestingSets:
    common: np.ndarray       # coarse element ids present in both meshes
    refined: np.ndarray      # coarse element ids that were subdivided
    neighborhood: np.ndarray  # coarse elements touching the refined region
    region_r: np.ndarray     # == refined
    region_c: np.ndarray     # common elements not touching the refined region
    ancestors: np.ndarray    # (nt_fine,) coarse ancestor of each fine element


class _TriLocator:
    """Uniform-grid point location for a fixed triangulation."""

    def __init__(self, mesh: Triangulation, cells_per_axis: int | None = None):
        self.mesh = mesh
        pts = mesh.vertices[mesh.triangles]
        self.lo = pts.reshape(-1, 2).min(axis=0)
        hi = pts.reshape(-1, 2).max(axis=0)
        n = cells_per_axis or max(1, int(np.sqrt(mesh.num_triangles)))
        self.n = n
        self.size = np.maximum(hi - self.lo, 1e-300) / n
        self.buckets: dict[tuple[int, int], list[int]] = {}
        bmin = np.floor((pts.min(axis=1) - self.lo) / self.size).astype(int)
        bmax = np.floor((pts.max(axis=1) - self.lo) / self.size).astype(int)
        bmin = np.clip(bmin, 0, n - 1)
        bmax = np.clip(bmax, 0, n - 1)
        for k in range(mesh.num_triangles):
            for i in range(bmin[k, 0], bmax[k, 0] + 1):
                for j in range(bmin[k, 1], bmax[k, 1] + 1):
                    self.buckets.setdefault((i, j), []).append(k)

    def locate(self, point, tol=1e-10) -> int:
        cell = np.clip(np.floor((point - self.lo) / self.size).astype(int),
                       0, self.n - 1)
        for k in self.buckets.get((cell[0], cell[1]), ()):
            if self._contains(k, point, tol):
                return k
        for k in range(self.mesh.num_triangles):  # rare fallback
            if self._contains(k, point, tol):
                return k
        return -1

    def _contains(self, k, point, tol):
        lam = barycentric(self.mesh, k, point)
        return lam.min() >= -tol


def barycentric(mesh: Triangulation, k: int, point) -> np.ndarray:
    p = mesh.vertices[mesh.triangles[k]]
    T = np.column_stack([p[1] - p[0], p[2] - p[0]])
    ab = np.linalg.solve(T, np.asarray(point) - p[0])
    return np.array([1.0 - ab[0] - ab[1], ab[0], ab[1]])


def ancestor_map(coarse: Triangulation, fine: Triangulation,
                 check: bool = True) -> np.ndarray:
    """Map each fine element to the coarse element containing it."""
    loc = _TriLocator(coarse)
    cent = fine.centroids()
    anc = np.empty(fine.num_triangles, dtype=np.int64)
    for t in range(fine.num_triangles):
        k = loc.locate(cent[t])
        if k < 0:
            raise MeshError("fine mesh not nested in coarse mesh")
        anc[t] = k
    if check:
        for t in range(fine.num_triangles):
            for vtx in fine.vertices[fine.triangles[t]]:
                if barycentric(coarse, anc[t], vtx).min() < -1e-9:
                    raise MeshError("fine mesh not nested in coarse mesh")
    return anc


def nesting_sets(coarse: Triangulation, fine: Triangulation) -> NestingSets:
    anc = ancestor_map(coarse, fine)
    counts = np.bincount(anc, minlength=coarse.num_triangles)
    if counts.min() == 0:
        raise MeshError("fine mesh does not cover the coarse mesh")
    fine_area = np.zeros(coarse.num_triangles)
    np.add.at(fine_area, anc, fine.area)
    if np.any(np.abs(fine_area - coarse.area) > 1e-12 * coarse.area):
        raise MeshError("fine mesh not nested: ancestor areas do not match")
    common_mask = counts == 1
    refined = np.flatnonzero(~common_mask)
    common = np.flatnonzero(common_mask)

    # touching = sharing at least one vertex with a refined coarse element
    refined_verts = np.unique(coarse.triangles[refined]) if len(refined) \
        else np.empty(0, dtype=np.int64)
    touch = np.isin(coarse.triangles, refined_verts).any(axis=1)
    neighborhood = np.flatnonzero(touch | ~common_mask)
    region_c = np.flatnonzero(common_mask & ~touch)
    return NestingSets(common=common, refined=refined,
                       neighborhood=neighborhood, region_r=refined,
                       region_c=region_c, ancestors=anc)


def refinement_ratio(coarse: Triangulation, fine: Triangulation,
                     nesting: NestingSets | None = None) -> float:
    """max over refined coarse K of max over fine T inside K of h_K / h_T."""
    ns = nesting if nesting is not None else nesting_sets(coarse, fine)
    if len(ns.refined) == 0:
        return 1.0
    refined_mask = np.zeros(coarse.num_triangles, dtype=bool)
    refined_mask[ns.refined] = True
    sel = refined_mask[ns.ancestors]
    return float(np.max(coarse.h[ns.ancestors[sel]] / fine.h[sel]))


# ---------------------------------------------------------------------------
# patches


def patches(tri: Triangulation):
    """Return (omega_K, omega_E, omega_Z) adjacency tables.

    omega_K[k]: elements sharing an edge with k (k included);
    omega_E[e]: elements having edge e; omega_Z[z]: elements containing z.
    """
    nt, ne, nv = tri.num_triangles, tri.num_edges, tri.num_vertices
    omega_e = [
        [t for t in tri.edge_tris[e] if t >= 0] for e in range(ne)]
    omega_k = []
    for k in range(nt):
        nbrs = {k}
        for e in tri.tri_edges[k]:
            nbrs.update(omega_e[e])
        omega_k.append(sorted(nbrs))
    omega_z = [[] for _ in range(nv)]
    for k in range(nt):
        for z in tri.triangles[k]:
            omega_z[z].append(k)
    return omega_k, omega_e, omega_z


# ---------------------------------------------------------------------------
# plain-text mesh IO
#
# line 1: `nv nt`; then nv lines `x y`; then nt lines `v0 v1 v2 refedge`
# (refedge is the local index of the refinement edge; always written as 2
# since the internal storage keeps the refinement edge at (v0, v1))


def write_mesh(tri: Triangulation, path):
    with open(path, "w") as f:
        f.write(f"{tri.num_vertices} {tri.num_triangles}\n")
        for x, y in tri.vertices:
            f.write(f"{x:.17g} {y:.17g}\n")
        for t in tri.triangles:
            f.write(f"{t[0]} {t[1]} {t[2]} 2\n")


def read_mesh(path) -> Triangulation:
    with open(path) as f:
        tokens = f.read().split()
    it = iter(tokens)
    nv, nt = int(next(it)), int(next(it))
    verts = np.array([[float(next(it)), float(next(it))] for _ in range(nv)])
    tris = []
    for _ in range(nt):
        v0, v1, v2, ref = (int(next(it)) for _ in range(4))
        t = np.roll([v0, v1, v2], -((ref + 1) % 3))
        tris.append(t)
    return Triangulation(verts, np.array(tris, dtype=np.int64),
                         np.zeros(nt, dtype=np.int64))
