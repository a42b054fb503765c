"""Lp Minkowski problem for the q-torsional measure, 0 < p < 1, in the plane.

Given weights ``c_k`` on directions ``xi_k`` we look for a polygon ``P`` with
``h(P, xi_k)^(1-p) mu_k(P) = c_k``.  The search runs over polygons with
``T_q = 1`` and support center ``x_P = o`` (the maximizer of
``Phi(P, x) = sum_k c_k (h(P, xi_k) - x . xi_k)^p``), where a solution
satisfies ``lam h^(1-p) mu = c`` with ``lam = (q-1)/(q+n(q-1)) sum c h^p``,
and is finally rescaled by ``lam0``.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .errors import (DomainError, InconsistentMeshError, InvalidBodyError, MeshingError,
                     SolverError)
from .geometry import (ANGLE_SNAP, ConvexBodyH, DiscreteMeasure, angular_distance,
                       hausdorff_distance, scale, spanning_check, support, translate)
from .mesh import morph, triangulate
from .torsion import (TorsionConfig, compute_torsion, facet_weights, homogeneity_degree,
                      measure_degree, solve_torsion, torsional_rigidity)

log = logging.getLogger(__name__)

N_DIM = 2
_MAX_REJECTIONS = 3
_MIN_THETA = 1.0 / 64
_MAX_LOG_STEP = 0.5
_EPS = np.finfo(float).eps
# relative Phi jitter from remeshing each iterate; a step inside it must halve the residual
_PHI_NOISE = 1e-4


@dataclass(frozen=True)
class SolveConfig:
    """Settings of the discrete solver.

    ``outer_tol`` bounds the certified relative residual; ``scheme`` is
    ``"newton"`` (fixed-point step preconditioned with a finite-difference
    Jacobian of the measure) or ``"fixed_point"`` (plain damped update).
    """

    p: float = 0.5
    q: float = 2.0
    mesh_h: float = 0.04
    inner_tol: float = 1e-12
    outer_tol: float = 1e-2
    damping: float = 1.0
    max_outer_iters: int = 50
    facet_eps: float = 1e-6
    fd_step: float = 1e-3
    measure_grid: int = 64
    scheme: str = "newton"
    torsion_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        if not self.q > 1:
            raise DomainError(f"q must exceed 1, got {self.q}")
        if not 0 < self.damping <= 1:
            raise DomainError(f"damping must lie in (0, 1], got {self.damping}")
        for name in ("mesh_h", "inner_tol", "outer_tol", "facet_eps", "fd_step", "torsion_tol"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.max_outer_iters < 1 or self.measure_grid < 3:
            raise DomainError("max_outer_iters >= 1 and measure_grid >= 3 required")
        if self.scheme not in ("newton", "fixed_point"):
            raise DomainError(f"unknown scheme {self.scheme!r}")

    @property
    def torsion(self):
        return TorsionConfig(h=self.mesh_h, tol=self.torsion_tol)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    offsets: np.ndarray
    center: np.ndarray
    phi: float
    T_q: float
    residual: float
    theta: float
    accepted: bool
    step: str


@dataclass(eq=False)
class SolveReport:
    iterations: list = field(default_factory=list)
    lambda0: float = float("nan")
    status: str = "stalled"
    final_residual: float = float("inf")
    body: ConvexBodyH = None

    @property
    def accepted(self):
        return [r for r in self.iterations if r.accepted]

    @property
    def n_outer(self):
        return max((r.iteration for r in self.iterations), default=0)


# -- inner problem ---------------------------------------------------------------

def _match(body, m):
    """Index into ``body.angles`` of every atom of ``m``."""
    idx = np.empty(len(m), dtype=int)
    for k, a in enumerate(m.angles):
        d = angular_distance(body.angles, a)
        j = int(np.argmin(d))
        if d[j] > ANGLE_SNAP:
            raise DomainError("measure direction is not a normal of the body",
                              invariant="directions-subset", angle=float(a))
        idx[k] = j
    return idx


def _gaps(body, m, x):
    s = support(body, m.directions) - m.directions @ np.asarray(x, dtype=float)
    if np.any(s < 0):
        raise DomainError("point lies outside the body", invariant="point-in-body")
    return s


def phi(body, x, m, p):
    """``sum_k c_k (h(body, xi_k) - x . xi_k)^p``."""
    _match(body, m)
    return float(m.weights @ _gaps(body, m, x) ** p)


def max_point(body, m, p, tol=1e-12, max_iter=100):
    """Unique interior maximizer of ``phi(body, ., m, p)``.

    Damped Newton on the strictly concave function; the Hessian is
    factorized by Cholesky at every step.  Convergence means
    ``|sum c_k xi_k s_k^(p-1)| <= tol * max(1, sum c_k s_k^(p-1))`` with
    ``s_k = h_k - x . xi_k``, or the gradient at the rounding level of the
    gaps.  For p near 1 and unbalanced weights the maximizer can sit within
    1e-6 of a facet, where that level dominates.
    """
    if not 0 < p < 1:
        raise DomainError("p must lie in (0, 1)")
    if not spanning_check(m):
        raise DomainError("measure is concentrated on a closed half-circle",
                          invariant="normals-spanning")
    _match(body, m)
    xi, c = m.directions, m.weights
    h = support(body, xi)
    x = body.polygon.vertices.mean(axis=0)
    f = float(c @ (h - xi @ x) ** p)
    for it in range(max_iter):
        s = h - xi @ x
        if np.any(s <= 0):
            break
        w = c * s ** (p - 1)
        g = xi.T @ w
        gnorm = float(np.linalg.norm(g))
        # error of g from gaps rounded at eps * (|h| + |x|)
        floor = 8 * _EPS * float(np.sum((1 - p) * w / s * (np.abs(h) + np.linalg.norm(x))))
        if gnorm <= tol * max(1.0, float(w.sum())) + floor:
            _hessian_cholesky(xi, c, s, p)
            return x
        L = _hessian_cholesky(xi, c, s, p)
        # ascent direction: grad f = -p g, -Hess f = p(1-p) sum c s^(p-2) xi xi^T
        dx = -np.linalg.solve(L.T, np.linalg.solve(L, g)) / (1 - p)
        t = 1.0
        ds = xi @ dx
        if np.any(ds > 0):
            t = min(1.0, 0.99 * float(np.min(s[ds > 0] / ds[ds > 0])))
        while True:
            xn = x + t * dx
            sn = h - xi @ xn
            fn = float(c @ sn ** p) if np.all(sn > 0) else -np.inf
            # roundoff slack: near the maximizer f is flat to machine precision
            if fn >= f - 4 * _EPS * abs(f):
                break
            t *= 0.5
            if t < 1e-14:
                xn = None
                break
        if xn is None:
            break
        x, f = xn, fn
    s = h - xi @ x
    raise SolverError("max_point did not converge; the maximizer is within rounding of a facet"
                      if s.min() < 1e-12 * np.abs(h).max() else "max_point did not converge",
                      invariant="inner-stationarity", min_gap=float(s.min()))


def _hessian_cholesky(xi, c, s, p):
    if np.any(s <= 0):
        raise SolverError("maximizer collapsed onto the boundary", invariant="inner-interior",
                          min_gap=float(s.min()))
    H = (xi * (c * s ** (p - 2))[:, None]).T @ xi
    try:
        return np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise SolverError("Hessian of the center problem is not positive definite",
                          invariant="inner-hessian") from None


# -- scaling -------------------------------------------------------------------------

def lambda_factor(P, m, p, q):
    """``(q-1)/(q+n(q-1)) sum_k c_k h(P, xi_k)^p``."""
    h = support(P, m.directions)
    if np.any(h <= 0):
        raise DomainError("origin must lie in the interior", invariant="origin-interior")
    return (q - 1) / homogeneity_degree(q, N_DIM) * float(m.weights @ h ** p)


def lambda0(P, m, p, q, cfg=None, check=True):
    """Dilation factor carrying a normalized extremal body onto a solution.

    ``lam0 = lam^(1/beta)`` with ``beta = n - p + q/(q-1)``, the dilation
    degree of ``h^(1-p) mu``.  With ``check`` the precondition ``T_q(P) = 1``
    is verified by a solve at ``cfg.mesh_h`` (relative tolerance 1e-2).
    """
    if check:
        cfg = cfg or SolveConfig(p=p, q=q)
        T = compute_torsion(P, q, cfg.torsion).T_q
        if abs(T - 1) > 1e-2:
            raise DomainError(f"lambda0 needs T_q(P) = 1, got {T:.6g}",
                              invariant="normalized-rigidity")
    return lambda_factor(P, m, p, q) ** (1.0 / measure_degree(q, p, N_DIM))


def residual(P, m, p, q, cfg=None):
    """``max_k |h(P, xi_k)^(1-p) mu_k(P) - c_k| / c_k`` from a fresh solve."""
    cfg = cfg or SolveConfig(p=p, q=q)
    idx = _match(P, m)
    if np.any(m.weights <= 0):
        raise DomainError("residual needs positive weights", invariant="positive-weights")
    rep = compute_torsion(P, q, cfg.torsion)
    h = support(P, P.normals)
    if np.any(h <= 0):
        raise DomainError("origin must lie in the interior", invariant="origin-interior")
    lp = h[idx] ** (1 - p) * rep.measure.weights[idx]
    return float(np.max(np.abs(lp - m.weights) / m.weights))


# -- outer problem -------------------------------------------------------------------

class _Reject(Exception):
    pass


@dataclass(eq=False)
class _Iterate:
    body: ConvexBodyH
    center: np.ndarray
    mesh: object
    mu: np.ndarray
    T_raw: float
    phi: float
    lam: float
    G: np.ndarray
    residual: float


def _evaluate(angles, offsets, m, cfg):
    """Recenter, solve once, normalize to ``T_q = 1`` by homogeneity."""
    p, q = cfg.p, cfg.q
    try:
        body = ConvexBodyH.from_angles(angles, offsets)
    except InvalidBodyError as exc:
        raise _Reject(str(exc)) from None
    if body.degenerate or body.polygon.edge_lengths.min() < cfg.facet_eps * body.diameter:
        raise _Reject("facet degenerate")
    x = max_point(body, m, p, cfg.inner_tol)
    body = translate(body, -x)
    try:
        mesh = triangulate(body.polygon, cfg.mesh_h)
    except MeshingError as exc:
        raise _Reject(str(exc)) from None
    sol = solve_torsion(mesh, q, tol=cfg.torsion_tol)
    T = torsional_rigidity(sol)
    mu = facet_weights(sol, len(body))
    s = T ** (-1.0 / homogeneity_degree(q, N_DIM))
    body = scale(body, s)
    mesh = morph(mesh, body.polygon)
    mu = mu * s ** (N_DIM - 1 + q / (q - 1))
    return _state(body, x, mesh, mu, T, m, cfg)


def _state(body, center, mesh, mu, T, m, cfg):
    p = cfg.p
    h = body.offsets
    lam = lambda_factor(body, m, p, cfg.q)
    ratio = lam * h ** (1 - p) * mu / m.weights
    if np.any(ratio <= 0):
        raise _Reject("facet without measure")
    return _Iterate(body=body, center=center, mesh=mesh, mu=mu, T_raw=T,
                    phi=float(m.weights @ h ** p), lam=lam, G=np.log(ratio),
                    residual=float(np.max(np.abs(ratio - 1))))


def measure_jacobian(state, cfg):
    """Forward-difference ``d log mu_k / d log h_j`` on morphed meshes."""
    body, mu = state.body, state.mu
    N = len(body)
    J = np.empty((N, N))
    eta = cfg.fd_step
    for j in range(N):
        a = body.offsets.copy()
        a[j] *= math.exp(eta)
        pert = ConvexBodyH.from_angles(body.angles, a)
        if pert.degenerate:
            raise _Reject("perturbation removed a facet")
        try:
            moved = morph(state.mesh, pert.polygon)
        except (MeshingError, InconsistentMeshError) as exc:
            raise _Reject(str(exc)) from None
        sol = solve_torsion(moved, cfg.q, tol=cfg.torsion_tol)
        J[:, j] = (np.log(facet_weights(sol, N)) - np.log(mu)) / eta
    return J


def _record(report, it, st, theta, accepted, step):
    report.iterations.append(IterationRecord(
        iteration=it, offsets=st.body.offsets.copy(), center=np.asarray(st.center, float).copy(),
        phi=st.phi, T_q=1.0, residual=st.residual, theta=theta, accepted=accepted, step=step))


def solve_discrete(m, cfg=None):
    """Polygon whose Lp q-torsional measure is ``m``.

    Returns ``(P, report)``.  Each outer step takes a multiplicative update
    ``h_k <- h_k exp(theta d_k)``.  With ``scheme="fixed_point"``,
    ``d = -G / (1-p)`` where ``G_k = log(lam h_k^(1-p) mu_k / c_k)``, the
    damped Euler-Lagrange iteration; with ``scheme="newton"`` ``d`` solves
    ``((1-p) I + d log mu / d log h) d = -G``.  A step is accepted only if
    ``max_x Phi`` at ``T_q = 1`` does not increase; otherwise ``theta`` is
    halved.  A step that halves the residual is also accepted when ``Phi``
    rises by less than the remeshing jitter ``_PHI_NOISE``.  After three
    rejected steps a projected-gradient step on ``Phi`` is tried instead.
    """
    cfg = cfg or SolveConfig()
    if not spanning_check(m):
        raise DomainError("measure is concentrated on a closed half-circle",
                          invariant="normals-spanning")
    if np.any(m.weights <= 0):
        raise DomainError("every atom needs a positive weight", invariant="positive-weights")
    p = cfg.p
    report = SolveReport()
    angles = m.angles
    state = _initial(angles, m, cfg)
    _record(report, 0, state, 0.0, True, "init")
    halted = "stalled"
    target = 0.5 * cfg.outer_tol
    for it in range(1, cfg.max_outer_iters + 1):
        if state.residual <= target:
            break
        try:
            J = measure_jacobian(state, cfg) if cfg.scheme == "newton" else None
        except _Reject:
            J = None
        d = _direction(state, J, p)
        new, step = _line_search(state, d, angles, m, cfg, report, it)
        if new is None:
            new, step = _gradient_step(state, angles, m, cfg, report, it)
        if new is None:
            # Phi is flat to discretization level; the certificate decides
            halted = "facet_degenerate" if step == "degenerate" else "stalled"
            break
        state = new
    lam0 = lambda_factor(state.body, m, p, cfg.q) ** (1.0 / measure_degree(cfg.q, p, N_DIM))
    P = scale(state.body, lam0)
    report.lambda0 = lam0
    report.body = P
    report.final_residual = residual(P, m, p, cfg.q, cfg)
    report.status = "converged" if report.final_residual <= cfg.outer_tol else halted
    log.info("solve_discrete: %s after %d iterations, residual %.3e", report.status,
             report.n_outer, report.final_residual)
    return P, report


def _initial(angles, m, cfg):
    offsets = np.ones(len(angles))
    rng = np.random.default_rng(cfg.seed)
    for _ in range(_MAX_REJECTIONS + 1):
        try:
            return _evaluate(angles, offsets, m, cfg)
        except _Reject:
            offsets = offsets + 1e-6 * rng.standard_normal(len(angles))
    raise SolverError("initial polygon keeps degenerate facets", invariant="facet-count")


def _direction(state, J, p):
    N = len(state.G)
    M = (1 - p) * np.eye(N) + (J if J is not None else 0.0)
    try:
        d = -np.linalg.solve(M, state.G)
    except np.linalg.LinAlgError:
        d = -state.G / (1 - p)
    # uniform part is absorbed by the normalization
    return d - d.mean()


def _line_search(state, d, angles, m, cfg, report, it):
    theta = cfg.damping
    big = float(np.max(np.abs(d)))
    if big * theta > _MAX_LOG_STEP:
        theta = _MAX_LOG_STEP / big
    rejected = 0
    while rejected < _MAX_REJECTIONS and theta >= _MIN_THETA * cfg.damping / 8:
        try:
            cand = _evaluate(angles, state.body.offsets * np.exp(theta * d), m, cfg)
        except _Reject:
            rejected += 1
            theta *= 0.5
            continue
        ok = cand.phi <= state.phi * (1 + 1e-12) or (
            cand.residual <= 0.5 * state.residual and cand.phi <= state.phi * (1 + _PHI_NOISE))
        _record(report, it, cand, theta, ok, "update")
        if ok:
            return cand, "update"
        rejected += 1
        theta *= 0.5
    return None, "rejected"


def _gradient_step(state, angles, m, cfg, report, it):
    """Steepest descent of ``Phi`` on the ``T_q = 1`` surface, in log offsets."""
    p = cfg.p
    h = state.body.offsets
    # h_j dPhi/dh_j on the constraint, envelope at the interior maximizer
    g = p * (m.weights * h ** p - state.lam * state.mu * h)
    g = g - g.mean()
    if not np.any(g):
        return None, "stalled"
    t = _MAX_LOG_STEP / float(np.max(np.abs(g)))
    degenerate = 0
    for _ in range(8):
        try:
            cand = _evaluate(angles, h * np.exp(-t * g), m, cfg)
        except _Reject:
            degenerate += 1
            t *= 0.5
            continue
        ok = cand.phi < state.phi
        _record(report, it, cand, t, ok, "gradient")
        if ok:
            return cand, "gradient"
        t *= 0.5
    return None, "degenerate" if degenerate >= _MAX_REJECTIONS else "stalled"


# -- general measures --------------------------------------------------------------

def discretize_measure(density, N, grid=None):
    """Atoms at arc midpoints ``2 pi k/N + pi/N`` weighted by the arc integrals.

    ``density`` is a callable of the angle or a table ``(angles, values)``
    interpolated linearly and periodically.  Integrals use the trapezoid
    rule (exact for tables, whose nodes are included as breakpoints).
    """
    N = int(N)
    if N < 1:
        raise DomainError("N must be positive")
    edges = 2 * np.pi * np.arange(N + 1) / N
    if callable(density):
        sub = max(16, int(math.ceil((grid or 1 << 14) / N)))
        f = density
        pts = [np.linspace(edges[k], edges[k + 1], sub + 1) for k in range(N)]
    else:
        ta, tv = (np.asarray(v, dtype=float) for v in density)
        if ta.shape != tv.shape or ta.ndim != 1 or len(ta) < 2:
            raise DomainError("density table needs matching angle and value columns")
        order = np.argsort(np.mod(ta, 2 * np.pi))
        ta, tv = np.mod(ta, 2 * np.pi)[order], tv[order]

        def f(t):
            return np.interp(np.mod(t, 2 * np.pi), ta, tv, period=2 * np.pi)

        pts = []
        for k in range(N):
            inner = ta[(ta > edges[k]) & (ta < edges[k + 1])]
            pts.append(np.r_[edges[k], inner, edges[k + 1]])
    weights = np.empty(N)
    for k, t in enumerate(pts):
        v = np.asarray(f(t), dtype=float)
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("density must be finite and nonnegative")
        weights[k] = np.trapezoid(v, t)
    if weights.sum() <= 0:
        raise DomainError("density has zero total mass", invariant="positive-mass")
    m = DiscreteMeasure(edges[:-1] + np.pi / N, weights)
    if not spanning_check(m):
        raise DomainError(f"discretized measure with N={N} is concentrated on a half-circle",
                          invariant="normals-spanning")
    return m


@dataclass(eq=False)
class GeneralReport:
    schedule: tuple
    bodies: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    spreads: list = field(default_factory=list)
    failed_at: int = None
    error: str = None

    @property
    def gaps_decreasing(self):
        return all(b < a for a, b in zip(self.gaps, self.gaps[1:]))


def solve_general(density, cfg=None, schedule=(8, 16, 32)):
    """Solve the discretized problems along ``schedule`` and report the
    Hausdorff gaps between successive solutions (trend, not a guarantee)."""
    cfg = cfg or SolveConfig()
    schedule = tuple(int(n) for n in schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise DomainError("schedule must be strictly increasing")
    out = GeneralReport(schedule=schedule)
    for N in schedule:
        try:
            m = discretize_measure(density, N)
            P, rep = solve_discrete(m, cfg)
        except (DomainError, SolverError) as exc:
            out.failed_at, out.error = N, str(exc)
            break
        if out.bodies:
            out.gaps.append(hausdorff_distance(out.bodies[-1], P))
        out.bodies.append(P)
        out.reports.append(rep)
        h = P.offsets
        out.spreads.append(float((h.max() - h.min()) / h.mean()))
    return out

