"""Numerical checks of the identities, inequalities and limit statements for
q-torsional rigidity over a seeded corpus of random convex polygons.

Every check returns a :class:`CheckResult` with ``pass_ = worst_violation <=
tolerance``.  Inequality slacks are compared against a numerical floor,
never against exact zero: the finite element error is signed.
"""

from dataclasses import asdict, dataclass, field
import math

import numpy as np

from .errors import DomainError, InvalidBodyError
from .geometry import (ConvexBodyH, aleksandrov_body, firey_p_sum,
                       hausdorff_distance, regular_polygon, scale, support, translate,
                       uniform_angles)
from .mesh import morph, triangulate
from .minkowski import SolveConfig, solve_discrete
from .torsion import (TorsionConfig, homogeneity_degree, lp_mixed_torsion,
                      lp_torsional_measure, mixed_torsion, solve_torsion, torsion_report,
                      torsional_rigidity)

SLACK_FLOOR = 1e-2
TEST_FUNCTIONS = {
    "one": lambda t: np.ones_like(t),
    "cos": np.cos,
    "sin": np.sin,
    "cos2": lambda t: np.cos(2 * t),
}


@dataclass
class CheckResult:
    name: str
    samples: int
    worst_violation: float
    tolerance: float
    pass_: bool = field(init=False)
    details: list = field(default_factory=list)

    def __post_init__(self):
        self.pass_ = bool(self.worst_violation <= self.tolerance)

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("pass_")
        return d


def _result(name, violations, tol, details):
    v = [float(x) for x in violations]
    return CheckResult(name, len(v), max(v) if v else 0.0, tol, details)


# -- corpus ----------------------------------------------------------------------------

def random_polygon(rng, min_facets=4, max_facets=12, offsets=(0.5, 1.5),
                   min_edge=0.05, diameter=(1.0, 3.0), max_tries=10_000):
    """Sorted uniform angles and uniform offsets, rejected until every facet
    survives with length > ``min_edge`` and the diameter is in range."""
    for _ in range(max_tries):
        m = int(rng.integers(min_facets, max_facets + 1))
        ang = np.sort(rng.uniform(0.0, 2 * np.pi, m))
        off = rng.uniform(*offsets, m)
        try:
            K = ConvexBodyH.from_angles(ang, off)
        except InvalidBodyError:
            continue
        if (len(K) == m and not K.degenerate and K.polygon.edge_lengths.min() > min_edge
                and diameter[0] <= K.diameter <= diameter[1]):
            return K
    raise RuntimeError("random polygon rejection sampling did not terminate")


@dataclass(eq=False)
class Corpus:
    """Reproducible set of random polygons and body pairs."""

    seed: int
    bodies: list
    pairs: list

    @classmethod
    def generate(cls, seed, n_bodies=20, n_pairs=20):
        rng = np.random.default_rng(seed)
        bodies = [random_polygon(rng) for _ in range(n_bodies)]
        prng = np.random.default_rng([seed, 1])
        pairs = [(random_polygon(prng), random_polygon(prng)) for _ in range(n_pairs)]
        return cls(seed, bodies, pairs)


def _config(cfg):
    return cfg or TorsionConfig(h=0.04)


def _T(K, q, cfg):
    return torsion_report(K, q, cfg).T_q


# -- single-body checks ------------------------------------------------------------------

def check_identity(corpus, q, cfg=None, tol=1e-2):
    """``T^(1/(q-1)) = (q-1)/(q+2(q-1)) sum h_k mu_k`` on every corpus body."""
    cfg = _config(cfg)
    res = [torsion_report(K, q, cfg).identity_residual for K in corpus.bodies]
    return _result(f"identity_q{q:g}", res, tol, [{"residual": r} for r in res])


def check_homogeneity(corpus, q, s=2.0, cfg=None, tol=2e-2):
    """Relative error of ``T(sK)/T(K)`` against ``s^(q+2(q-1))``."""
    cfg = _config(cfg)
    d = homogeneity_degree(q)
    viol, details = [], []
    for K in corpus.bodies:
        ratio = _T(scale(K, s), q, cfg) / _T(K, q, cfg)
        viol.append(abs(ratio / s ** d - 1))
        details.append({"ratio": ratio, "exponent": math.log(ratio) / math.log(s)})
    return _result(f"homogeneity_q{q:g}", viol, tol, details)


def check_gradient_bound(corpus, q, cfg=None, factor=1.05):
    """``max |grad u| <= factor * diameter``; violation is the excess ratio."""
    cfg = _config(cfg)
    viol, details = [], []
    for K in corpus.bodies:
        rep = torsion_report(K, q, cfg)
        ratio = rep.grad_max / K.diameter
        viol.append(ratio - factor)
        details.append({"grad_max": rep.grad_max, "diameter": K.diameter})
    return _result(f"gradient_bound_q{q:g}", viol, 0.0, details)


# -- two-body inequalities -----------------------------------------------------------------

def _homothets(corpus, n=3):
    y = np.array([0.05, -0.03])
    return [(K, translate(scale(K, 2.0), y)) for K in corpus.bodies[:n]]


def _slack_result(name, slacks, equal_slacks):
    viol = [-s for s in slacks] + [abs(s) for s in equal_slacks]
    details = ([{"slack": s, "equality": False} for s in slacks]
               + [{"slack": s, "equality": True} for s in equal_slacks])
    return _result(name, viol, SLACK_FLOOR, details)


def check_minkowski_inequality(corpus, q, cfg=None):
    """``T(K,L)^d >= T(K)^(d-1) T(L)``; slack is ``LHS/RHS - 1``."""
    cfg = _config(cfg)
    d = homogeneity_degree(q)

    def slack(K, L):
        # log form: d-th powers lose digits
        lhs = d * math.log(mixed_torsion(K, L, q, cfg))
        rhs = (d - 1) * math.log(_T(K, q, cfg)) + math.log(_T(L, q, cfg))
        return math.expm1(lhs - rhs)

    return _slack_result(f"minkowski_q{q:g}", [slack(K, L) for K, L in corpus.pairs],
                         [slack(K, L) for K, L in _homothets(corpus)])


def check_bm_inequality(corpus, q, grid=256, cfg=None):
    """``T(K+L)^(1/d) >= T(K)^(1/d) + T(L)^(1/d)``."""
    cfg = _config(cfg)
    d = homogeneity_degree(q)

    def slack(K, L):
        S = firey_p_sum(K, L, 1.0, 1.0, grid)
        return _T(S, q, cfg) ** (1 / d) / (_T(K, q, cfg) ** (1 / d) + _T(L, q, cfg) ** (1 / d)) - 1

    return _slack_result(f"brunn_minkowski_q{q:g}", [slack(K, L) for K, L in corpus.pairs],
                         [slack(K, L) for K, L in _homothets(corpus)])


def check_lp_inequalities(corpus, p, q, grid=256, cfg=None):
    """Lp Brunn-Minkowski and Lp Minkowski inequalities for ``p > 1``.

    Equality pairs are dilates ``L = 2K``.
    """
    if not p > 1:
        raise DomainError("Lp inequalities need p > 1")
    cfg = _config(cfg)
    d = homogeneity_degree(q)

    def bm(K, L):
        S = firey_p_sum(K, L, 1.0, p, grid)
        return _T(S, q, cfg) ** (p / d) / (_T(K, q, cfg) ** (p / d) + _T(L, q, cfg) ** (p / d)) - 1

    def mk(K, L):
        lhs = d * math.log(lp_mixed_torsion(K, L, p, q, cfg))
        rhs = (d - p) * math.log(_T(K, q, cfg)) + p * math.log(_T(L, q, cfg))
        return math.expm1(lhs - rhs)

    dilates = [(K, scale(K, 2.0)) for K in corpus.bodies[:3]]
    return _slack_result(f"lp_inequalities_p{p:g}_q{q:g}",
                         [f(K, L) for K, L in corpus.pairs for f in (bm, mk)],
                         [f(K, L) for K, L in dilates for f in (bm, mk)])


# -- variational formula -----------------------------------------------------------------

def fan_p_sum(K, L, t, p):
    """Polygon with K's normals and offsets ``(h_K^p + t h_L^p)^(1/p)``.

    Agrees with the Firey combination ``K +_p t.L`` to first order in ``t``:
    the facets it omits have length O(t) and sit where the boundary measure
    vanishes, so the rigidity derivative at ``t = 0`` is the same.
    """
    hK = support(K, K.normals)
    hL = support(L, K.normals)
    return ConvexBodyH(K.normals, (hK ** p + t * hL ** p) ** (1.0 / p))


def variational_derivative(K, L, p, q, cfg=None):
    """``(q-1)/p T(K)^((q-2)/(q-1)) sum h_L^p h_K^(1-p) mu_k``."""
    cfg = _config(cfg)
    rep = torsion_report(K, q, cfg)
    hK = support(K, K.normals)
    hL = support(L, K.normals)
    return ((q - 1) / p * rep.T_q ** ((q - 2) / (q - 1))
            * float((hL ** p * hK ** (1 - p)) @ rep.measure.weights))


def fd_derivative(K, L, p, q, t_step=1e-3, cfg=None, richardson=False):
    """Central difference of ``T(K +_p t.L)`` on meshes morphed from K's."""
    cfg = _config(cfg)
    base = triangulate(K.polygon, cfg.h)

    def T(t):
        B = fan_p_sum(K, L, t, p)
        return torsional_rigidity(solve_torsion(morph(base, B.polygon), q, tol=cfg.tol))

    d1 = (T(t_step) - T(-t_step)) / (2 * t_step)
    if not richardson:
        return d1
    d2 = (T(2 * t_step) - T(-2 * t_step)) / (4 * t_step)
    return (4 * d1 - d2) / 3


def fd_variational_check(cases, t_step=1e-3, cfg=None, tol=2e-2):
    """``cases``: iterable of ``(K, L, p, q)``; compares the central difference
    with :func:`variational_derivative`.  For ``L = K`` the closed form
    ``(q+2(q-1))/p T(K)`` is used as reference."""
    cfg = _config(cfg)
    viol, details = [], []
    for K, L, p, q in cases:
        fd = fd_derivative(K, L, p, q, t_step, cfg)
        formula = variational_derivative(K, L, p, q, cfg)
        ref = homogeneity_degree(q) / p * _T(K, q, cfg) if L is K else formula
        viol.append(abs(fd - ref) / abs(ref))
        details.append({"p": p, "q": q, "fd": fd, "formula": formula, "reference": ref})
    return _result("fd_variational", viol, tol, details)


def default_fd_cases(corpus):
    """Ten ``(K, L, p, q)`` tuples, three of them on the closed-form curve ``L = K``."""
    sq = regular_polygon(4, math.sqrt(2.0), math.pi / 4)
    B = corpus.bodies

    def b(i):
        return B[i % len(B)]

    return [
        (sq, sq, 1.0, 2.0),
        (sq, scale(sq, 0.3), 1.0, 2.0),
        (b(0), b(0), 2.0, 3.0),
        (b(0), b(1), 1.0, 2.0),
        (b(1), b(2), 1.5, 2.0),
        (b(2), b(3), 2.0, 1.5),
        (b(3), b(4), 1.0, 3.0),
        (b(4), b(5), 3.0, 2.0),
        (b(5), b(5), 1.5, 1.5),
        (b(6), b(7), 1.25, 3.0),
    ]


# -- limits ----------------------------------------------------------------------------

def weak_convergence_check(P, deltas=(0.1, 0.05, 0.025), q=2.0, cfg=None, tol=2e-2):
    """Test-function gaps between ``mu(P_delta)`` and ``mu(P)`` along an
    inflation schedule ``h(P_delta) = h(P) + delta`` (same normal fan).

    The gap of a schedule member is the largest gap over TEST_FUNCTIONS
    relative to the total mass of ``mu(P)``.  Violation: the final gap, or
    ``inf`` when gaps fail to decrease strictly.
    """
    cfg = _config(cfg)
    mu = torsion_report(P, q, cfg).measure
    mass = mu.total_mass
    gaps, details = [], []
    for d in deltas:
        Pd = ConvexBodyH(P.normals, P.offsets + d)
        md = torsion_report(Pd, q, cfg).measure
        per = {name: abs(md.integrate(f) - mu.integrate(f)) / mass
               for name, f in TEST_FUNCTIONS.items()}
        gaps.append(max(per.values()))
        details.append({"delta": d, **per})
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    worst = gaps[-1] if decreasing else math.inf
    return CheckResult("weak_convergence", len(deltas), worst, tol, details)


def aleksandrov_convergence_check(K, schedule=(1, 2, 4, 8, 16), grid=512, kind="inflation"):
    """Hausdorff distance of Aleksandrov bodies of ``h + e_i`` to that of ``h``.

    ``e_i = 1/i`` or ``cos(8 theta)/(4i)`` (the quarter keeps the data
    positive for bodies with inradius above 1/4).  The body of ``h + e`` lies
    between the bodies of ``h - c_-`` and ``h + c_+``; on a grid of spacing
    ``2 pi/grid`` the outer one is within ``c_+ / cos(pi/grid)`` and the
    inner one within ``c_- / (sin(alpha/2) cos(pi/grid))``, alpha the
    smallest corner angle.  Distances must respect that bound and decrease.
    """
    th = uniform_angles(grid)
    h = support(K, np.c_[np.cos(th), np.sin(th)])
    base = aleksandrov_body(th, h)
    corner = math.sin(0.5 * float(base.polygon.interior_angles.min()))
    grid_factor = 1.0 / math.cos(math.pi / grid)
    dists, viol, details = [], [], []
    for i in schedule:
        e = np.full_like(th, 1.0 / i) if kind == "inflation" else np.cos(8 * th) / (4 * i)
        Ki = aleksandrov_body(th, h + e)
        dH = hausdorff_distance(Ki, base)
        bound = grid_factor * max(max(e.max(), 0.0), max(-e.min(), 0.0) / corner)
        dists.append(dH)
        viol.append(dH - bound - 1e-9)
        details.append({"i": i, "hausdorff": dH, "sup_perturbation": float(np.abs(e).max()),
                        "bound": bound})
    if any(b >= a for a, b in zip(dists, dists[1:])):
        viol.append(math.inf)
    return _result(f"aleksandrov_{kind}", viol, 0.0, details)


# -- Minkowski problem ---------------------------------------------------------------------

def minkowski_round_trip_check(P_star, p, q, mesh_h=0.04, tol=1e-2):
    """Solve for ``mu_{p,q}(P*)`` and compare with P* (residual and Hausdorff)."""
    cfg = SolveConfig(p=p, q=q, mesh_h=mesh_h)
    m = lp_torsional_measure(P_star, p, q, cfg.torsion)
    P, rep = solve_discrete(m, cfg)
    dH = hausdorff_distance(P, P_star) / P_star.diameter
    return _result("minkowski_round_trip", [rep.final_residual, dH], tol,
                   [{"status": rep.status, "residual": rep.final_residual,
                     "hausdorff_rel": dH, "lambda0": rep.lambda0}])


def seeded_pentagon(seed):
    rng = np.random.default_rng([seed, 5])
    while True:
        ang = np.sort(rng.uniform(0, 2 * np.pi, 5))
        try:
            K = ConvexBodyH.from_angles(ang, rng.uniform(0.8, 1.2, 5))
        except InvalidBodyError:
            continue
        if len(K) == 5 and not K.degenerate and K.polygon.edge_lengths.min() > 0.2:
            return K


def run_all(seed=7, q=2.0, p=0.5, h=0.02, n_bodies=6, n_pairs=6, lp_p=1.5):
    """Every check at one configuration; results in a fixed order."""
    cfg = TorsionConfig(h=h)
    corpus = Corpus.generate(seed, n_bodies, n_pairs)
    square = regular_polygon(4, math.sqrt(2.0), math.pi / 4)
    checks = [
        check_identity(corpus, q, cfg),
        check_homogeneity(corpus, q, 2.0, cfg),
        check_gradient_bound(corpus, q, cfg),
        check_minkowski_inequality(corpus, q, cfg),
        check_bm_inequality(corpus, q, cfg=cfg),
        check_lp_inequalities(corpus, lp_p, q, cfg=cfg),
        fd_variational_check(default_fd_cases(corpus)[:4], cfg=cfg),
        weak_convergence_check(square, q=q, cfg=cfg),
        aleksandrov_convergence_check(corpus.bodies[0]),
        aleksandrov_convergence_check(corpus.bodies[0], kind="oscillation"),
        minkowski_round_trip_check(seeded_pentagon(seed), p, q, h),
    ]
    return checks

