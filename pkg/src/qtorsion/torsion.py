"""q-torsional rigidity and q-torsional measures of convex polygons.

The torsion function ``u`` (``div(|grad u|^(q-2) grad u) = -1`` in the
body, ``u = 0`` on the boundary) is the minimizer of

    J(u) = (1/q) int |grad u|^q - int u

over continuous piecewise-linear functions vanishing on the boundary.
Testing the equation with ``u`` itself gives ``int |grad u|^q = int u``,
hence ``T_q = (int u)^(q-1)``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import logging
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import DomainError, InconsistentMeshError, SolverError
from .geometry import DiscreteMeasure, support
from .mesh import triangulate

log = logging.getLogger(__name__)

EPS_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
GRAD_TOL_REL = 0.05
# Newton decrement below this fraction of |J| is roundoff
DECREMENT_FLOOR = 1e-15

_observers = []


def add_solve_observer(fn):
    """Call ``fn(solution)`` after every successful torsion solve."""
    _observers.append(fn)
    return fn


def remove_solve_observer(fn):
    _observers.remove(fn)


@dataclass(frozen=True)
class TorsionConfig:
    """Discretization and solver settings shared by every derived quantity."""

    h: float = 0.02
    tol: float = 1e-10
    max_iters: int = 200
    scheme: str = "newton"
    measure_method: str = "flux"


@dataclass(eq=False)
class TorsionSolution:
    mesh: object
    u: np.ndarray
    q: float
    energy: float
    residual_norm: float
    grad_max: float
    integral_u: float
    integral_grad_q: float
    iterations: int
    tol: float
    rayleigh_discrepancy: float = field(default=float("nan"))

    @property
    def grad(self):
        area, B = self.mesh.geometry()
        return kernels.element_gradients(B, self.mesh.triangles, self.u)


@dataclass(eq=False)
class TorsionReport:
    T_q: float
    measure: DiscreteMeasure
    identity_residual: float
    mesh_h: float
    q: float
    grad_max: float
    diameter: float
    n_nodes: int
    n_triangles: int
    solution: TorsionSolution = field(repr=False, default=None)


# -- closed form ---------------------------------------------------------------

def unit_ball_volume(n):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def homogeneity_degree(q, n=2):
    """Degree of T_q under dilation."""
    return q + n * (q - 1)


def measure_degree(q, p=1.0, n=2):
    """Dilation degree of the Lp q-torsional measure: ``n - p + q/(q-1)``."""
    return n - p + q / (q - 1)


def ball_torsion_analytic(n, R, q):
    """``(T_q, total measure, u(0))`` for the ball of radius R in R^n.

    The radial solution is ``u(r) = ((q-1)/q) n^(-1/(q-1)) (R^a - r^a)``
    with ``a = q/(q-1)`` and boundary gradient ``(R/n)^(1/(q-1))``.
    """
    if n < 2 or R <= 0 or q <= 1:
        raise DomainError("need n >= 2, R > 0, q > 1")
    w = unit_ball_volume(n)
    d = homogeneity_degree(q, n)
    T = w ** (q - 1) / n * ((q - 1) / d) ** (q - 1) * R ** d
    mass = (R / n) ** (q / (q - 1)) * n * w * R ** (n - 1)
    u0 = (q - 1) / q * n ** (-1.0 / (q - 1)) * R ** (q / (q - 1))
    return T, mass, u0


# -- solver --------------------------------------------------------------------

class _Problem:
    """Assembly state for one mesh and exponent."""

    def __init__(self, mesh, q):
        self.mesh, self.q = mesh, q
        self.area, self.B = mesh.geometry()
        self.tris = mesh.triangles
        self.N = mesh.n_nodes
        self.nb = mesh.n_boundary
        self.entry_map, self.indices, self.indptr, self.nnz = mesh.free_pattern()
        self.load = np.bincount(self.tris.ravel(), weights=np.repeat(self.area / 3.0, 3),
                                minlength=self.N)
        self.load_norm = float(np.linalg.norm(self.load[self.nb:]))

    def grad(self, u):
        return kernels.element_gradients(self.B, self.tris, u)

    def energy(self, u, eps):
        return kernels.energy(self.area, self.grad(u), self.q, eps) - float(self.load @ u)

    def linearize(self, u, eps, newton=True, q=None):
        q = self.q if q is None else q
        data, flux = kernels.assemble(self.B, self.area, self.grad(u), self.tris, float(q),
                                      float(eps), self.entry_map, self.nnz, self.N, newton)
        nf = self.N - self.nb
        A = sp.csr_matrix((data, self.indices, self.indptr), shape=(nf, nf))
        return A, flux - self.load

    def solve(self, A, rhs):
        # SPD: symmetric ordering with diagonal pivots
        lu = spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
        return lu.solve(rhs)


def solve_torsion(mesh, q, tol=1e-10, max_iters=200, scheme="newton"):
    """Minimize the discrete energy for exponent ``q`` on ``mesh``.

    ``q = 2`` is a single linear solve.  Otherwise the energy is regularized
    with ``(eps^2 + |grad u|^2)^(q/2)``, ``eps`` running down EPS_SCHEDULE,
    and each stage is minimized by line-searched Newton steps (``scheme=
    "newton"``) or lagged-diffusivity steps (``scheme="picard"``).  The
    iteration stops when the relative residual of the final stage is
    below ``tol``.
    """
    if not q > 1:
        raise DomainError(f"exponent q must exceed 1, got {q}")
    if not tol > 0:
        raise DomainError("tolerance must be positive")
    if scheme not in ("newton", "picard"):
        raise DomainError(f"unknown scheme {scheme!r}")
    q = float(q)
    P = _Problem(mesh, q)
    nb = P.nb
    u = np.zeros(P.N)
    A, r = P.linearize(u, 0.0) if q == 2.0 else _poisson(P)
    u[nb:] = P.solve(A, P.load[nb:])
    iterations = 1
    if q == 2.0:
        eps_final = 0.0
        _, r = P.linearize(u, 0.0)
        res = np.linalg.norm(r[nb:]) / P.load_norm
    else:
        # best multiple of the Poisson solution as starting point
        g = P.grad(u)
        a = float(P.area @ np.einsum("ta,ta->t", g, g) ** (q / 2))
        u *= (float(P.load @ u) / a) ** (1.0 / (q - 1))
        res = np.inf
        for k, eps in enumerate(EPS_SCHEDULE):
            last = k == len(EPS_SCHEDULE) - 1
            stage_tol = tol if last else max(tol, 1e-4)
            u, res, its, ok = _minimize_stage(P, u, eps, stage_tol, max_iters - iterations,
                                          scheme == "newton")
            iterations += its
            if not ok and (last or iterations >= max_iters):
                raise SolverError(f"torsion solve did not converge (residual {res:.3e}, "
                                  f"eps {eps:g}, {iterations} iterations)",
                                  residual=res, iterations=iterations)
        eps_final = EPS_SCHEDULE[-1]
    return _finish(P, u, eps_final, res, iterations, tol)


def _poisson(P):
    return P.linearize(np.zeros(P.N), 0.0, newton=False, q=2.0)


def _minimize_stage(P, u, eps, tol, budget, newton):
    """Line-searched descent on one regularization stage.

    Stops on the relative residual or once the Newton decrement falls to
    roundoff relative to the energy (for q < 2 the residual saturates near
    critical points of u, where the weight is of order eps^(q-2)).
    """
    nb = P.nb
    its = 0
    J = P.energy(u, eps)
    while True:
        A, r = P.linearize(u, eps, newton)
        res = float(np.linalg.norm(r[nb:]) / P.load_norm)
        if res <= tol or its >= budget:
            return u, res, its, res <= tol
        d = np.zeros_like(u)
        d[nb:] = P.solve(A, -r[nb:])
        slope = float(r @ d)
        if not slope < 0:
            A, _ = P.linearize(u, eps, newton=False)
            d[nb:] = P.solve(A, -r[nb:])
            slope = float(r @ d)
        if -slope <= DECREMENT_FLOOR * abs(J):
            return u + d, _residual(P, u + d, eps), its + 1, True
        t = 1.0
        noise = 8 * np.finfo(float).eps * abs(J)
        while True:
            u_new = u + t * d
            J_new = P.energy(u_new, eps)
            if J_new <= J + 1e-4 * t * slope + noise or t < 1e-10:
                break
            t *= 0.5
        if t < 1e-10:
            raise SolverError("line search failed", residual=res, eps=eps)
        u, J = u_new, J_new
        its += 1


def _residual(P, u, eps):
    _, r = P.linearize(u, eps)
    return float(np.linalg.norm(r[P.nb:]) / P.load_norm)


def _finish(P, u, eps, res, iterations, tol):
    q = P.q
    g = P.grad(u)
    gn2 = np.einsum("ta,ta->t", g, g)
    int_u = float(P.load @ u)
    int_g = float(P.area @ gn2 ** (q / 2))
    energy = int_g / q - int_u
    if int_u <= 0:
        raise SolverError("integral of the torsion function is not positive")
    sol = TorsionSolution(mesh=P.mesh, u=u, q=q, energy=energy, residual_norm=res,
                          grad_max=float(np.sqrt(gn2.max())), integral_u=int_u,
                          integral_grad_q=int_g, iterations=iterations, tol=tol)
    # Rayleigh quotient (int u)^q / int |grad u|^q against (int u)^(q-1)
    sol.rayleigh_discrepancy = abs(int_u ** q / int_g - int_u ** (q - 1)) / int_u ** (q - 1)
    _check_solution(sol)
    for fn in _observers:
        fn(sol)
    return sol


def _check_solution(sol):
    scale = max(1.0, float(np.abs(sol.u).max()))
    if np.any(sol.u[:sol.mesh.n_boundary] != 0.0):
        raise SolverError("boundary values are not zero", invariant="dirichlet")
    if sol.u.min() < -1e-12 * scale:
        raise SolverError(f"maximum principle violated: min u = {sol.u.min():.3e}",
                          invariant="maximum-principle")


def torsional_rigidity(sol):
    """``T_q = (int u)^(q-1)``."""
    if sol.integral_u <= 0:
        raise SolverError("integral of the torsion function is not positive",
                          invariant="positive-integral")
    return sol.integral_u ** (sol.q - 1)


def boundary_flux_density(sol):
    """Nodal values of ``|grad u|^(q-1)`` on the boundary loop.

    The residual of the discrete equation at a boundary node is the
    boundary integral of ``|grad u|^(q-1)`` against the node's hat
    function; solving with the 1-D boundary mass matrix gives nodal
    densities (consistent-flux extraction).
    """
    mesh, q = sol.mesh, sol.q
    area, B = mesh.geometry()
    g = kernels.element_gradients(B, mesh.triangles, sol.u)
    s = np.einsum("ta,ta->t", g, g)
    w = np.ones_like(s) if q == 2 else np.where(s > 0, s, np.finfo(float).tiny) ** ((q - 2) / 2)
    flux = np.bincount(mesh.triangles.ravel(),
                       weights=(np.einsum("tia,ta->ti", B, g) * (area * w)[:, None]).ravel(),
                       minlength=mesh.n_nodes)
    load = np.bincount(mesh.triangles.ravel(), weights=np.repeat(area / 3, 3),
                       minlength=mesh.n_nodes)
    nb = mesh.n_boundary
    R = load[:nb] - flux[:nb]
    i = np.arange(nb)
    j = (i + 1) % nb
    L = np.linalg.norm(mesh.nodes[j] - mesh.nodes[i], axis=1)
    M = sp.csc_matrix((np.r_[L / 3, L / 3, L / 6, L / 6], (np.r_[i, j, i, j], np.r_[i, j, j, i])),
                      shape=(nb, nb))
    return np.maximum(spla.spsolve(M, R), 0.0)


_GAUSS_X = np.array([0.5 - math.sqrt(15) / 10, 0.5, 0.5 + math.sqrt(15) / 10])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0


def facet_weights(sol, n_facets, method="flux"):
    """Per-facet integrals of ``|grad u|^q`` over the boundary.

    ``method="flux"`` integrates the consistent-flux density;
    ``method="adjacent"`` uses the constant gradient of the triangle next to
    each boundary edge (first order in h; kept for comparison).
    """
    mesh, q = sol.mesh, sol.q
    be, bf = mesh.boundary_edges, mesh.boundary_facets
    if np.any(bf < 0) or np.any(bf >= n_facets):
        raise InconsistentMeshError("boundary edge tagged with unknown facet id")
    L = np.linalg.norm(mesh.nodes[be[:, 1]] - mesh.nodes[be[:, 0]], axis=1)
    if method == "flux":
        f = boundary_flux_density(sol)
        vals = np.outer(f[be[:, 0]], 1 - _GAUSS_X) + np.outer(f[be[:, 1]], _GAUSS_X)
        contrib = L * ((vals ** (q / (q - 1))) @ _GAUSS_W)
    elif method == "adjacent":
        tri_of = _adjacent_triangles(mesh)
        g = sol.grad[tri_of]
        contrib = L * np.einsum("ta,ta->t", g, g) ** (q / 2)
    else:
        raise DomainError(f"unknown measure method {method!r}")
    return np.bincount(bf, weights=contrib, minlength=n_facets)


def _adjacent_triangles(mesh):
    tris = mesh.triangles
    lookup = {}
    for t, tri in enumerate(tris):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            if a < mesh.n_boundary and b < mesh.n_boundary:
                lookup[(min(a, b), max(a, b))] = t
    return np.array([lookup[(min(a, b), max(a, b))] for a, b in mesh.boundary_edges])


def torsional_measure(sol, body, method="flux"):
    """q-torsional measure of ``body`` as one atom per facet normal."""
    if sol.mesh.polygon is not body.polygon and not np.allclose(
            sol.mesh.polygon.vertices, body.polygon.vertices, atol=1e-9):
        raise InconsistentMeshError("solution mesh was not built on this body")
    w = facet_weights(sol, len(body), method)
    return DiscreteMeasure(body.angles, w)


# -- body level ------------------------------------------------------------------

def identity_residual(T, measure, body, q):
    """Relative error of ``T^(1/(q-1)) = (q-1)/(q+2(q-1)) sum h_k mu_k``."""
    lhs = T ** (1.0 / (q - 1))
    rhs = (q - 1) / homogeneity_degree(q) * float(support(body, body.normals) @ measure.weights)
    return abs(lhs - rhs) / lhs


def compute_torsion(body, q, cfg=None, mesh=None):
    """Mesh, solve and evaluate ``T_q`` and the q-torsional measure of a body."""
    cfg = cfg or TorsionConfig()
    if not q > 1:
        raise DomainError(f"exponent q must exceed 1, got {q}")
    if mesh is None:
        mesh = triangulate(body.polygon, cfg.h)
    sol = solve_torsion(mesh, q, tol=cfg.tol, max_iters=cfg.max_iters, scheme=cfg.scheme)
    T = torsional_rigidity(sol)
    mu = torsional_measure(sol, body, cfg.measure_method)
    return TorsionReport(T_q=T, measure=mu, identity_residual=identity_residual(T, mu, body, q),
                         mesh_h=cfg.h, q=q, grad_max=sol.grad_max, diameter=body.diameter,
                         n_nodes=mesh.n_nodes, n_triangles=len(mesh.triangles), solution=sol)


@lru_cache(maxsize=256)
def _cached_report(angles, offsets, q, cfg):
    from .geometry import ConvexBodyH
    body = ConvexBodyH.from_angles(np.frombuffer(angles), np.frombuffer(offsets))
    return compute_torsion(body, q, cfg)


def torsion_report(body, q, cfg=None):
    """Memoized :func:`compute_torsion` (bodies and configs are immutable)."""
    cfg = cfg or TorsionConfig()
    return _cached_report(body.angles.tobytes(), body.offsets.tobytes(), float(q), cfg)


def _origin_supports(K):
    hK = support(K, K.normals)
    if np.any(hK <= 0):
        raise DomainError("origin must lie in the interior of the body",
                          invariant="origin-interior")
    return hK


def mixed_torsion(K, L, q, cfg=None):
    """``T_q(K, L) = (q-1)/(q+n(q-1)) T_q(K)^((q-2)/(q-1)) sum h_L(xi_k) mu_k(K)``."""
    rep = torsion_report(K, q, cfg)
    hL = support(L, K.normals)
    return ((q - 1) / homogeneity_degree(q) * rep.T_q ** ((q - 2) / (q - 1))
            * float(hL @ rep.measure.weights))


def lp_torsional_measure(K, p, q, cfg=None):
    """``h(K, xi_k)^(1-p) mu_k(K)``."""
    hK = _origin_supports(K)
    rep = torsion_report(K, q, cfg)
    return DiscreteMeasure(K.angles, hK ** (1 - p) * rep.measure.weights)


def lp_mixed_torsion(K, L, p, q, cfg=None):
    """``(q-1)/(q+n(q-1)) T_q(K)^((q-2)/(q-1)) sum h_L^p h_K^(1-p) mu_k(K)``."""
    if p == 0:
        raise DomainError("Lp mixed torsional rigidity needs p != 0")
    hK = _origin_supports(K)
    hL = support(L, K.normals)
    rep = torsion_report(K, q, cfg)
    return ((q - 1) / homogeneity_degree(q) * rep.T_q ** ((q - 2) / (q - 1))
            * float((hL ** p * hK ** (1 - p)) @ rep.measure.weights))
