"""Triangulation of convex polygons for the P1 torsion solver.

Boundary nodes come first in the node array, in counterclockwise order,
so node ``k`` and ``k + 1 (mod n_boundary)`` span a boundary edge lying on
facet ``boundary_owner[k]``.  Interior nodes are inserted by the
``triangle`` library (quality constrained Delaunay refinement); it may also
split boundary segments next to short facets.
"""

from dataclasses import dataclass, field

import numpy as np
import triangle

from . import kernels
from .errors import DomainError, InconsistentMeshError, MeshingError
from .geometry import Polygon, diameter

MIN_ANGLE_DEG = 20.0
_TRIANGLE_QUALITY = 28.0
_MAX_ROUNDS = 4


@dataclass(eq=False)
class TriMesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_facets: np.ndarray
    target_h: float
    n_boundary: int
    polygon: Polygon
    boundary_param: np.ndarray = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def free(self):
        return np.arange(self.n_boundary, self.n_nodes)

    def geometry(self):
        """Cached ``(area, basis_gradients)`` per triangle."""
        if "geom" not in self._cache:
            self._cache["geom"] = kernels.element_geometry(self.nodes, self.triangles)
        return self._cache["geom"]

    def free_pattern(self):
        """CSR pattern of the free-free block and the local-entry -> slot map."""
        if "pattern" not in self._cache:
            self._cache["pattern"] = _free_pattern(self.triangles, self.n_boundary, self.n_nodes)
        return self._cache["pattern"]

    @property
    def areas(self):
        return self.geometry()[0]

    @property
    def min_angle(self):
        return float(np.degrees(triangle_angles(self.nodes, self.triangles).min()))

    @property
    def max_edge(self):
        P = self.nodes[self.triangles]
        e = np.linalg.norm(P - np.roll(P, 1, axis=1), axis=2)
        return float(e.max())


def triangle_angles(nodes, tris):
    P = nodes[tris]
    out = np.empty(tris.shape)
    for i in range(3):
        a = P[:, (i + 1) % 3] - P[:, i]
        b = P[:, (i + 2) % 3] - P[:, i]
        c = np.einsum("ta,ta->t", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        out[:, i] = np.arccos(np.clip(c, -1.0, 1.0))
    return out


def _free_pattern(tris, nb, n):
    rows = np.repeat(tris, 3, axis=1)
    cols = np.tile(tris, (1, 3))
    ok = (rows >= nb) & (cols >= nb)
    nf = n - nb
    keys = np.where(ok, (rows - nb) * nf + (cols - nb), -1)
    uniq, inv = np.unique(keys[ok], return_inverse=True)
    entry_map = np.full(keys.shape, -1, dtype=np.int64)
    entry_map[ok] = inv
    indices = (uniq % nf).astype(np.int64)
    r = uniq // nf
    indptr = np.searchsorted(r, np.arange(nf + 1)).astype(np.int64)
    return entry_map, indices, indptr, len(uniq)


def quality_bound(poly):
    """Minimum-angle bound: 20 degrees, relaxed at corners sharper than 40 degrees."""
    corner = float(np.degrees(poly.interior_angles.min()))
    return min(MIN_ANGLE_DEG, 0.5 * corner)


def _boundary_points(poly, spacing):
    V = poly.vertices
    m = len(V)
    pts = []
    for i in range(m):
        a, b = V[i], V[(i + 1) % m]
        n_seg = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing - 1e-9)))
        pts.extend(a + (b - a) * (j / n_seg) for j in range(n_seg))
    return np.array(pts)


def triangulate(poly, h, *, check=True):
    """Conforming quality triangulation of ``poly`` with target size ``h``."""
    if not h > 0:
        raise DomainError(f"mesh size must be positive, got {h}")
    diam = diameter(poly)
    if h > diam / 4 + 1e-12:
        raise DomainError(f"mesh size {h} exceeds diameter/4 = {diam / 4:.6g}",
                          invariant="mesh-size")
    bound = quality_bound(poly)
    spacing = h
    last = None
    for _ in range(_MAX_ROUNDS):
        mesh = _build(poly, h, spacing)
        last = mesh.min_angle
        if last >= bound:
            if check:
                check_mesh(mesh)
            return mesh
        spacing *= 0.75
    raise MeshingError(f"minimum angle {last:.2f} deg below bound {bound:.2f} deg after "
                       f"{_MAX_ROUNDS} refinement rounds", min_angle=last, bound=bound, h=h)


def _build(poly, h, spacing):
    pts = _boundary_points(poly, spacing)
    n_in = len(pts)
    segs = np.c_[np.arange(n_in), (np.arange(n_in) + 1) % n_in]
    max_area = np.sqrt(3.0) / 4.0 * h * h
    # area in fixed point: the switch parser does not read exponents.
    # No Y switch: short facets need split segments to meet the angle bound.
    out = triangle.triangulate({"vertices": pts, "segments": segs,
                                "segment_markers": np.ones(n_in, dtype=np.int32)},
                               f"pq{_TRIANGLE_QUALITY:g}a{max_area:.20f}Q")
    nodes = np.asarray(out["vertices"], dtype=float)
    tris = np.asarray(out["triangles"], dtype=np.int64)
    if not np.array_equal(nodes[:n_in], pts):
        raise MeshingError("mesher moved boundary nodes")
    loop = _boundary_loop(np.asarray(out["segments"], dtype=np.int64), nodes, pts[1] - pts[0])
    nb = len(loop)
    interior = np.setdiff1d(np.arange(len(nodes)), loop)
    order = np.r_[loop, interior]
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    nodes = np.ascontiguousarray(nodes[order])
    tris = np.ascontiguousarray(rank[tris])
    P = nodes[tris]
    det = ((P[:, 1, 0] - P[:, 0, 0]) * (P[:, 2, 1] - P[:, 0, 1])
           - (P[:, 1, 1] - P[:, 0, 1]) * (P[:, 2, 0] - P[:, 0, 0]))
    flip = det < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    owner, param = _locate_on_edges(poly, nodes[:nb])
    bedges, bfacets = _boundary_edges(tris, nb, owner, poly.facet_ids)
    return TriMesh(nodes, tris, bedges, bfacets, float(h), nb, poly,
                   boundary_param=np.c_[owner, param])


def _boundary_loop(segs, nodes, forward):
    """Boundary node indices in counterclockwise order starting at node 0;
    ``forward`` points from node 0 along the first boundary segment."""
    nbr = {}
    for a, b in segs:
        nbr.setdefault(int(a), []).append(int(b))
        nbr.setdefault(int(b), []).append(int(a))
    if any(len(v) != 2 for v in nbr.values()):
        raise InconsistentMeshError("boundary segments do not form a simple loop")
    a, b = nbr[0]
    cur = a if (nodes[a] - nodes[0]) @ forward > (nodes[b] - nodes[0]) @ forward else b
    loop, prev = [0], 0
    while cur != 0:
        loop.append(cur)
        x, y = nbr[cur]
        prev, cur = cur, (y if x == prev else x)
    if len(loop) != len(nbr):
        raise InconsistentMeshError("boundary is not a single loop")
    return np.array(loop, dtype=np.int64)


def _locate_on_edges(poly, X):
    """Owner edge index and edge parameter of points on the polygon boundary,
    assuming X traverses the boundary counterclockwise from vertex 0."""
    V = poly.vertices
    m = len(V)
    owner = np.empty(len(X), dtype=np.int64)
    param = np.empty(len(X))
    k = 0
    for i, x in enumerate(X):
        while True:
            a, b = V[k], V[(k + 1) % m]
            e = b - a
            s = float((x - a) @ e / (e @ e))
            if s < 1 - 1e-12 or k == m - 1:
                break
            k += 1
        owner[i], param[i] = k, s
    return owner, param


def _boundary_edges(tris, nb, owner, facet_ids):
    E = np.r_[tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]
    key = np.sort(E, axis=1)
    _, inv, cnt = np.unique(key[:, 0] * (tris.max() + 1) + key[:, 1],
                            return_inverse=True, return_counts=True)
    once = cnt[inv.ravel()] == 1
    bedges = E[once]
    if len(bedges) != nb:
        raise InconsistentMeshError(f"{len(bedges)} boundary edges for {nb} boundary nodes")
    i, j = bedges[:, 0], bedges[:, 1]
    if np.any(i >= nb) or np.any(j >= nb) or np.any(j != (i + 1) % nb):
        raise InconsistentMeshError("boundary edge does not join consecutive boundary nodes")
    order = np.argsort(i)
    bedges = bedges[order]
    return bedges, np.asarray(facet_ids)[owner[bedges[:, 0]]]


def check_mesh(mesh, angle_bound=None):
    """Raise if a TriMesh invariant fails."""
    tris = mesh.triangles
    area = mesh.areas
    if np.any(area <= 0):
        raise MeshingError("non-positive triangle area", invariant="positive-area")
    E = np.sort(np.r_[tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=1)
    _, cnt = np.unique(E[:, 0] * mesh.n_nodes + E[:, 1], return_counts=True)
    if np.any(cnt > 2) or np.sum(cnt == 1) != mesh.n_boundary:
        raise MeshingError("mesh is not conforming", invariant="conforming")
    bound = quality_bound(mesh.polygon) if angle_bound is None else angle_bound
    if mesh.min_angle < bound - 1e-9:
        raise MeshingError(f"minimum angle {mesh.min_angle:.2f} below {bound:.2f}",
                           invariant="min-angle")
    poly = mesh.polygon
    V = poly.vertices
    for (a, b), f in zip(mesh.boundary_edges, mesh.boundary_facets):
        k = int(np.nonzero(poly.facet_ids == f)[0][0])
        n = poly.facet_normals[k]
        off = float(n @ V[k])
        if abs(n @ mesh.nodes[a] - off) > 1e-9 or abs(n @ mesh.nodes[b] - off) > 1e-9:
            raise InconsistentMeshError("boundary edge off its facet", invariant="facet-tagging")
    lengths = np.linalg.norm(mesh.nodes[mesh.boundary_edges[:, 1]]
                             - mesh.nodes[mesh.boundary_edges[:, 0]], axis=1)
    if np.any(lengths > mesh.target_h * (1 + 1e-9)):
        raise MeshingError("boundary segment longer than h", invariant="boundary-spacing")


def morph(mesh, poly):
    """Carry ``mesh`` onto a polygon with the same facet sequence.

    Boundary nodes keep their edge parameter; interior nodes are moved by the
    piecewise-affine map of the fans from the vertex centroids.  Topology is
    unchanged, so quantities computed on a family of morphed meshes depend
    smoothly on the polygon (no remeshing noise).
    """
    old = mesh.polygon
    if len(old.facet_ids) != len(poly.facet_ids):
        raise InconsistentMeshError("polygons have different facet counts")
    shift = int(np.nonzero(poly.facet_ids == old.facet_ids[0])[0][0]) if \
        old.facet_ids[0] in poly.facet_ids else -1
    if shift < 0 or not np.array_equal(np.roll(poly.facet_ids, -shift), old.facet_ids):
        raise InconsistentMeshError("polygons have different facet sequences")
    V0 = old.vertices
    V1 = np.roll(poly.vertices, -shift, axis=0)
    c0, c1 = V0.mean(axis=0), V1.mean(axis=0)
    X = mesh.nodes
    m = len(V0)
    phi = np.arctan2(V0[:, 1] - c0[1], V0[:, 0] - c0[0])
    base = phi[0]
    rel_v = np.mod(phi - base, 2 * np.pi)
    rel_x = np.mod(np.arctan2(X[:, 1] - c0[1], X[:, 0] - c0[0]) - base, 2 * np.pi)
    sector = np.clip(np.searchsorted(rel_v, rel_x, side="right") - 1, 0, m - 1)
    a0, b0 = V0[sector] - c0, V0[(sector + 1) % m] - c0
    a1, b1 = V1[sector] - c1, V1[(sector + 1) % m] - c1
    d = X - c0
    det = a0[:, 0] * b0[:, 1] - a0[:, 1] * b0[:, 0]
    la = (d[:, 0] * b0[:, 1] - d[:, 1] * b0[:, 0]) / det
    lb = (a0[:, 0] * d[:, 1] - a0[:, 1] * d[:, 0]) / det
    Y = c1 + la[:, None] * a1 + lb[:, None] * b1
    nb = mesh.n_boundary
    owner = mesh.boundary_param[:, 0].astype(int)
    s = mesh.boundary_param[:, 1]
    Y[:nb] = V1[owner] + (V1[(owner + 1) % m] - V1[owner]) * s[:, None]
    new = TriMesh(np.ascontiguousarray(Y), mesh.triangles, mesh.boundary_edges,
                  mesh.boundary_facets, mesh.target_h, nb, poly,
                  boundary_param=mesh.boundary_param)
    new._cache["pattern"] = mesh.free_pattern()
    if np.any(new.areas <= 0):
        raise MeshingError("morph inverted a triangle", invariant="positive-area")
    return new
