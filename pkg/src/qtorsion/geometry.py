"""Planar convex bodies in H-representation.

A body is stored as a sorted list of outer unit normals together with
support offsets, ``K = {x : x . xi_k <= a_k}``.  The V-representation
(:class:`Polygon`) is derived once at construction and cached, so every
:class:`ConvexBodyH` that exists is known to be bounded with nonempty
interior.

All values are immutable; arrays handed out by properties are read-only.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import DomainError, InvalidBodyError

TWO_PI = 2.0 * np.pi
ANGLE_SNAP = 1e-10
FACET_EPS_REL = 1e-8
UNIT_TOL = 1e-9


def canonical_angle(theta):
    """Reduce to ``[0, 2*pi)`` and snap to the 1e-10 angular grid."""
    theta = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    theta = np.round(theta / ANGLE_SNAP) * ANGLE_SNAP
    theta = np.where(theta >= TWO_PI - 0.5 * ANGLE_SNAP, 0.0, theta)
    if theta.ndim == 0:
        return float(theta)
    return theta


def angular_distance(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class UnitDirection:
    """A point of the unit circle, stored by its canonical angle."""

    angle: float
    x: float = field(init=False, repr=False)
    y: float = field(init=False, repr=False)

    def __post_init__(self):
        theta = canonical_angle(self.angle)
        object.__setattr__(self, "angle", theta)
        object.__setattr__(self, "x", float(np.cos(theta)))
        object.__setattr__(self, "y", float(np.sin(theta)))

    @classmethod
    def from_vector(cls, v, tol=UNIT_TOL):
        v = np.asarray(v, dtype=float)
        if abs(np.hypot(v[0], v[1]) - 1.0) > tol:
            raise DomainError(f"direction {v.tolist()} is not a unit vector",
                              invariant="unit-normal")
        return cls(float(np.arctan2(v[1], v[0])))

    @property
    def vector(self):
        return np.array([self.x, self.y])

    def __eq__(self, other):
        if not isinstance(other, UnitDirection):
            return NotImplemented
        return bool(angular_distance(self.angle, other.angle) < ANGLE_SNAP)

    def __hash__(self):
        return hash(int(round(self.angle / ANGLE_SNAP)))


def _as_direction_array(d):
    """Directions given as UnitDirection(s), angle(s) or vectors -> (M, 2)."""
    if isinstance(d, UnitDirection):
        return d.vector[None, :]
    if isinstance(d, (list, tuple)) and d and isinstance(d[0], UnitDirection):
        return np.array([u.vector for u in d])
    a = np.asarray(d, dtype=float)
    if a.ndim == 1 and a.shape[0] == 2:
        return a[None, :]
    if a.ndim <= 1:
        a = np.atleast_1d(a)
        return np.c_[np.cos(a), np.sin(a)]
    return np.atleast_2d(a)


@dataclass(frozen=True, eq=False)
class Polygon:
    """Counterclockwise convex polygon.

    Edge ``i`` runs from ``vertices[i]`` to ``vertices[i + 1]`` and realizes
    the body normal with index ``facet_ids[i]``.
    """

    vertices: np.ndarray
    facet_ids: np.ndarray
    facet_normals: np.ndarray
    degenerate: frozenset = frozenset()

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if len(V) < 3:
            raise InvalidBodyError("polygon needs at least three vertices",
                                   invariant="strictly-convex")
        e = np.roll(V, -1, axis=0) - V
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross <= 0):
            raise InvalidBodyError("vertex sequence is not strictly convex",
                                   invariant="strictly-convex")
        for name in ("vertices", "facet_normals"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        ids = np.array(self.facet_ids, dtype=int)
        ids.setflags(write=False)
        object.__setattr__(self, "facet_ids", ids)

    @property
    def edge_lengths(self):
        return np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1)

    @property
    def area(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def interior_angles(self):
        prev = np.roll(self.vertices, 1, axis=0) - self.vertices
        nxt = np.roll(self.vertices, -1, axis=0) - self.vertices
        c = np.sum(prev * nxt, axis=1) / (np.linalg.norm(prev, axis=1) * np.linalg.norm(nxt, axis=1))
        return np.arccos(np.clip(c, -1.0, 1.0))


class ConvexBodyH:
    """Bounded convex polygon ``{x : x . xi_k <= a_k}``.

    Parameters
    ----------
    normals : array_like (N, 2), sequence of UnitDirection, or angles (N,)
        Outer unit normals. Vectors must be unit within 1e-9.
    offsets : array_like (N,)
        Support offsets ``a_k``.
    facet_eps_rel : float
        Facets shorter than ``facet_eps_rel * diameter`` are flagged as
        degenerate and dropped from the derived polygon.
    """

    __slots__ = ("_angles", "_normals", "_offsets", "_polygon", "_diameter",
                 "facet_eps_rel", "n")

    def __init__(self, normals, offsets, facet_eps_rel=FACET_EPS_REL):
        offsets = np.asarray(offsets, dtype=float).ravel()
        angles = _normal_angles(normals)
        if angles.shape != offsets.shape:
            raise DomainError("normals and offsets differ in length", invariant="shape")
        if not np.all(np.isfinite(offsets)):
            raise InvalidBodyError("non-finite offset")
        order = np.argsort(angles, kind="stable")
        angles, offsets = angles[order], offsets[order]
        # merge snapped duplicates: the tighter constraint wins
        keep_a, keep_o = [], []
        for a, o in zip(angles, offsets):
            if keep_a and angular_distance(a, keep_a[-1]) < ANGLE_SNAP:
                keep_o[-1] = min(keep_o[-1], o)
            else:
                keep_a.append(a)
                keep_o.append(o)
        if len(keep_a) > 1 and angular_distance(keep_a[0], keep_a[-1]) < ANGLE_SNAP:
            keep_o[0] = min(keep_o[0], keep_o.pop())
            keep_a.pop()
        angles, offsets = np.array(keep_a), np.array(keep_o)
        if len(angles) < 3 or max_angular_gap(angles) >= np.pi:
            raise InvalidBodyError("normals concentrated on a closed half-circle; body is unbounded",
                                   invariant="normals-spanning")
        self.n = 2
        self.facet_eps_rel = facet_eps_rel
        self._angles = _readonly(angles)
        self._normals = _readonly(np.c_[np.cos(angles), np.sin(angles)])
        self._offsets = _readonly(offsets)
        self._polygon, self._diameter = _halfplane_polygon(self._normals, self._offsets,
                                                           facet_eps_rel)

    @classmethod
    def from_angles(cls, angles, offsets, **kw):
        return cls(np.asarray(angles, dtype=float), offsets, **kw)

    @property
    def angles(self):
        return self._angles

    @property
    def normals(self):
        return self._normals

    @property
    def offsets(self):
        return self._offsets

    @property
    def directions(self):
        return [UnitDirection(a) for a in self._angles]

    @property
    def polygon(self):
        return self._polygon

    @property
    def degenerate(self):
        return self._polygon.degenerate

    @property
    def diameter(self):
        return self._diameter

    @property
    def support_numbers(self):
        """``h(K, xi_k)`` at the body's own normals (<= offsets)."""
        return support(self, self._normals)

    def __len__(self):
        return len(self._angles)

    def __repr__(self):
        return f"ConvexBodyH(N={len(self)}, offsets={np.round(self._offsets, 6).tolist()})"


def _normal_angles(normals):
    if isinstance(normals, (list, tuple)) and normals and isinstance(normals[0], UnitDirection):
        return np.array([u.angle for u in normals])
    a = np.asarray(normals, dtype=float)
    if a.ndim == 1:
        return canonical_angle(a)
    if a.ndim != 2 or a.shape[1] != 2:
        raise DomainError("normals must be an (N, 2) array", invariant="shape")
    norms = np.hypot(a[:, 0], a[:, 1])
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise DomainError("normals must be unit vectors within 1e-9", invariant="unit-normal")
    return canonical_angle(np.arctan2(a[:, 1], a[:, 0]))


def max_angular_gap(angles):
    a = np.sort(np.asarray(angles, dtype=float))
    if len(a) == 0:
        return TWO_PI
    gaps = np.diff(np.r_[a, a[0] + TWO_PI])
    return float(gaps.max())


def _chebyshev_center(normals, offsets):
    res = linprog(c=[0.0, 0.0, -1.0],
                  A_ub=np.c_[normals, np.ones(len(offsets))], b_ub=offsets,
                  bounds=[(None, None), (None, None), (0.0, None)], method="highs")
    if res.status != 0 or res.x[2] <= 1e-12 * max(1.0, np.abs(offsets).max()):
        raise InvalidBodyError("halfplane intersection has empty interior",
                               invariant="nonempty-interior")
    return res.x[:2]


def _corner(n1, a1, n2, a2):
    det = n1[0] * n2[1] - n1[1] * n2[0]
    return np.array([(a1 * n2[1] - a2 * n1[1]) / det, (n1[0] * a2 - n2[0] * a1) / det])


def _halfplane_polygon(normals, offsets, facet_eps_rel):
    scale = max(1.0, float(np.abs(offsets).max()))
    # polar points xi/a blow up when the origin hugs a facet; recenter then
    if np.all(offsets > 1e-3 * scale):
        center = np.zeros(2)
    else:
        center = _chebyshev_center(normals, offsets)
    a = offsets - normals @ center
    if np.any(a <= 0):
        raise InvalidBodyError("halfplane intersection has empty interior",
                               invariant="nonempty-interior")
    # Facets of the polygon are the vertices of the polar hull conv{xi_k / a_k}.
    dual = normals / a[:, None]
    N = len(a)
    start = int(np.argmax(np.einsum("ij,ij->i", dual, dual)))
    order = [(start + i) % N for i in range(N)]
    tol = 1e-13 * float(np.max(np.einsum("ij,ij->i", dual, dual)))
    stack = []
    for k in order + [start]:
        while len(stack) >= 2:
            p0, p1 = dual[stack[-2]], dual[stack[-1]]
            p2 = dual[k]
            cross = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
            if cross <= tol:
                stack.pop()
            else:
                break
        stack.append(k)
    active = stack[:-1]
    if len(active) < 3:
        raise InvalidBodyError("fewer than three active constraints", invariant="nonempty-interior")

    def vertices_of(act):
        m = len(act)
        return np.array([_corner(normals[act[i]], a[act[i]], normals[act[(i + 1) % m]],
                                 a[act[(i + 1) % m]]) for i in range(m)])

    V = vertices_of(active)
    diam = _pairwise_max(V)
    facet_eps = facet_eps_rel * diam
    # vertex i closes facet active[i] and opens facet active[i+1]
    while len(active) > 3:
        lengths = np.linalg.norm(V - np.roll(V, 1, axis=0), axis=1)
        i = int(np.argmin(lengths))
        if lengths[i] >= facet_eps:
            break
        active.pop(i)
        V = vertices_of(active)
    degenerate = frozenset(int(k) for k in range(N) if k not in set(active))
    V = V + center
    if np.any(V @ normals.T - offsets[None, :] > 1e-9 * scale):
        raise InvalidBodyError("derived vertex violates a constraint", invariant="vertex-feasibility")
    # Polygon edge j goes from vertex j-1 to vertex j along facet active[j]; rotate so
    # that edge i runs vertices[i] -> vertices[i+1].
    facet_ids = np.array(active[1:] + active[:1])
    poly = Polygon(V, facet_ids, normals[facet_ids], degenerate)
    return poly, _pairwise_max(V)


def _pairwise_max(V):
    d = V[:, None, :] - V[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))


# -- operations ---------------------------------------------------------------

def support(body, d):
    """Support function ``h(K, d)``; scalar for one direction, array otherwise.

    ``d`` may be a UnitDirection, an angle, a single 2-vector, a list of
    UnitDirections, an array of angles or an (M, 2) array of vectors.
    """
    D = _as_direction_array(d)
    h = np.max(body.polygon.vertices @ D.T, axis=0)
    single = isinstance(d, UnitDirection) or np.ndim(d) == 0 or (
        np.ndim(d) == 1 and len(d) == 2 and not isinstance(d[0], UnitDirection))
    return float(h[0]) if single else h


def vertices(body):
    return body.polygon


def translate(body, y):
    y = np.asarray(y, dtype=float)
    return ConvexBodyH(body.angles, body.offsets + body.normals @ y,
                       facet_eps_rel=body.facet_eps_rel)


def scale(body, s):
    if not s > 0:
        raise DomainError(f"scale factor must be positive, got {s}")
    return ConvexBodyH(body.angles, s * body.offsets, facet_eps_rel=body.facet_eps_rel)


def aleksandrov_body(directions, values, facet_eps_rel=FACET_EPS_REL):
    """Intersection of ``{x : x . xi <= f(xi)}`` over the sampled directions."""
    values = np.asarray(values, dtype=float).ravel()
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise DomainError("Aleksandrov data must be strictly positive", invariant="positive-samples")
    D = _as_direction_array(directions)
    return ConvexBodyH(canonical_angle(np.arctan2(D[:, 1], D[:, 0])), values,
                       facet_eps_rel=facet_eps_rel)


def uniform_angles(m, phase=0.0):
    return canonical_angle(phase + TWO_PI * np.arange(m) / m)


def firey_p_sum(K, L, t, p, grid=256):
    """Aleksandrov body of ``(h_K^p + t h_L^p)^(1/p)`` on a finite direction set."""
    if p < 1:
        raise DomainError(f"Firey sum needs p >= 1, got {p}")
    if t < 0:
        raise DomainError(f"Firey coefficient must be nonnegative, got {t}")
    if grid < 64:
        raise DomainError("direction grid must have at least 64 directions")
    angles = np.unique(np.r_[K.angles, L.angles, uniform_angles(grid)])
    D = np.c_[np.cos(angles), np.sin(angles)]
    hK, hL = support(K, D), support(L, D)
    if np.any(hK <= 0) or np.any(hL <= 0):
        raise DomainError("Firey sums need the origin in the interior of both bodies",
                          invariant="origin-interior")
    return aleksandrov_body(angles, (hK ** p + t * hL ** p) ** (1.0 / p))


def hausdorff_distance(K, L):
    """``max_d |h_K(d) - h_L(d)|``.

    Between consecutive facet normals of either body both support functions
    are linear in the direction vector, so the difference is ``w . d`` for a
    fixed ``w`` and its maximum on an arc sits at an arc end or at ``+-w``.
    The candidates are evaluated exactly, together with 1024 uniform
    directions as a safety net, so the result carries no sampling error.
    """
    fn = np.r_[K.polygon.facet_normals, L.polygon.facet_normals]
    breaks = np.unique(canonical_angle(np.arctan2(fn[:, 1], fn[:, 0])))
    ends = np.r_[breaks[1:], breaks[0] + TWO_PI]
    mids = 0.5 * (breaks + ends)
    M = np.c_[np.cos(mids), np.sin(mids)]
    vK = K.polygon.vertices[np.argmax(K.polygon.vertices @ M.T, axis=0)]
    vL = L.polygon.vertices[np.argmax(L.polygon.vertices @ M.T, axis=0)]
    w = vK - vL
    wa = np.arctan2(w[:, 1], w[:, 0])
    cand = [breaks, uniform_angles(1024)]
    for phi in (wa, wa + np.pi):
        rel = np.mod(phi - breaks, TWO_PI)
        inside = rel < (ends - breaks)
        cand.append(phi[inside])
    ang = np.concatenate(cand)
    D = np.c_[np.cos(ang), np.sin(ang)]
    return float(np.max(np.abs(support(K, D) - support(L, D))))


def diameter(poly):
    V = poly.vertices if isinstance(poly, Polygon) else poly.polygon.vertices
    return _pairwise_max(V)


def contains(body, x, strict=False, tol=0.0):
    s = body.normals @ np.asarray(x, dtype=float) - body.offsets
    return bool(np.all(s < -tol)) if strict else bool(np.all(s <= tol))


def radial_function(body, u):
    """``rho_K(u) = max{c : c u in K}`` for a body with the origin inside."""
    D = _as_direction_array(u)
    dots = body.normals @ D.T
    with np.errstate(divide="ignore"):
        ratios = np.where(dots > 0, body.offsets[:, None] / dots, np.inf)
    rho = ratios.min(axis=0)
    return float(rho[0]) if rho.size == 1 else rho


def regular_polygon(m, circumradius=1.0, phase=0.0):
    """Regular m-gon inscribed in the circle of the given radius."""
    angles = uniform_angles(m, phase)
    return ConvexBodyH.from_angles(angles, np.full(m, circumradius * np.cos(np.pi / m)))


def disk_polygon(R=1.0, m=256):
    return regular_polygon(m, R)


def box(half_widths=(1.0, 1.0), center=(0.0, 0.0)):
    wx, wy = half_widths
    body = ConvexBodyH.from_angles([0, np.pi / 2, np.pi, 3 * np.pi / 2], [wx, wy, wx, wy])
    return translate(body, center) if np.any(center) else body


# -- measures -----------------------------------------------------------------

class DiscreteMeasure:
    """Finite sum of weighted atoms on the unit circle, sorted by angle."""

    __slots__ = ("_angles", "_weights")

    def __init__(self, directions, weights):
        w = np.asarray(weights, dtype=float).ravel()
        if (isinstance(directions, (list, tuple)) and directions
                and isinstance(directions[0], UnitDirection)):
            ang = np.array([u.angle for u in directions])
        else:
            a = np.asarray(directions, dtype=float)
            ang = _normal_angles(a) if a.ndim == 2 else canonical_angle(a)
        ang = np.atleast_1d(ang)
        if ang.shape != w.shape:
            raise DomainError("directions and weights differ in length", invariant="shape")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("measure weights must be finite and nonnegative",
                              invariant="nonnegative-weights")
        order = np.argsort(ang, kind="stable")
        ang, w = ang[order], w[order]
        keep_a, keep_w = [], []
        for a, c in zip(ang, w):
            if keep_a and angular_distance(a, keep_a[-1]) < ANGLE_SNAP:
                keep_w[-1] += c
            else:
                keep_a.append(a)
                keep_w.append(c)
        if len(keep_a) > 1 and angular_distance(keep_a[0], keep_a[-1]) < ANGLE_SNAP:
            keep_w[0] += keep_w.pop()
            keep_a.pop()
        if not keep_w or sum(keep_w) <= 0:
            raise DomainError("measure must have positive total mass", invariant="positive-mass")
        self._angles = _readonly(keep_a)
        self._weights = _readonly(keep_w)

    @property
    def angles(self):
        return self._angles

    @property
    def weights(self):
        return self._weights

    @property
    def directions(self):
        return np.c_[np.cos(self._angles), np.sin(self._angles)]

    @property
    def total_mass(self):
        return float(self._weights.sum())

    def integrate(self, f):
        """``sum_k f(theta_k) c_k`` for a function of the angle."""
        return float(np.sum(f(self._angles) * self._weights))

    def scaled(self, s):
        return DiscreteMeasure(self._angles, s * self._weights)

    def rotated(self, phi):
        return DiscreteMeasure(self._angles + phi, self._weights)

    def __len__(self):
        return len(self._angles)

    def __repr__(self):
        return f"DiscreteMeasure(N={len(self)}, mass={self.total_mass:.6g})"


def spanning_check(m):
    """True iff the positive-weight atoms are not concentrated on a closed half-circle."""
    ang = m.angles[m.weights > 0]
    if len(ang) == 0:
        return False
    return max_angular_gap(ang) < np.pi
