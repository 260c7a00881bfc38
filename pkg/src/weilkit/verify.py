"""The acceptance suite: twelve finite checks with stated tolerances.

Each check returns a :class:`CheckResult`; ``run_all`` runs them in order.
Checks never loosen their tolerance: a check that cannot be met on the
constructed instances reports ``passed=False`` together with the measured
numbers.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .algebra import build_algebra, dual_numbers, real_algebra, tensor_product, truncated
from .apoint import APoint, evaluate, make_apoint, zero_section
from .atlas import Manifold, builtin, circle, euclidean_space, make_chart, make_transition, torus, EuclideanMetric
from .dynamics import (
    DiffeoPair,
    bump_diffeo,
    converse_check,
    fixed_scan,
    pointwise_gap,
    reflection,
    rotation,
)
from .expr import as_expr, eval_real, partial_derivatives
from .lifting import MapSpec, functoriality_check, lift_path, path_continuity, prolong_transition
from .metric import MetricConfig, WeightVector, convergence_check, distance
from .topology import bundle_cohomology_check


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d}. {self.name}"

    def to_json(self, timing: bool = False) -> dict:
        out = {"number": self.number, "name": self.name, "passed": self.passed, "detail": self.detail}
        if timing:
            out["seconds"] = self.seconds
        return out


def _timed(number, name, fn, limit=None) -> CheckResult:
    t0 = time.perf_counter()
    passed, detail = fn()
    dt = time.perf_counter() - t0
    if limit is not None:
        detail["time_limit_s"] = limit
        detail["within_time"] = dt < limit
        passed = passed and dt < limit
    return CheckResult(number, name, bool(passed), detail, dt)


# ---------------------------------------------------------------------------
# shared fixtures


def squaring_plane() -> Manifold:
    """Two charts on the half-plane ``x > 0``: ``(u, v) = (x^2, y + x)``."""
    U = make_chart("U", ["x", "y"], ["x > 0"])
    V = make_chart("V", ["u", "v"], ["u > 0"])
    return Manifold(
        "squaring-plane",
        {"U": U, "V": V},
        [make_transition("U", "V", ["x^2", "y + x"]), make_transition("V", "U", ["sqrt(u)", "v - sqrt(u)"])],
        EuclideanMetric("U"),
    )


def torus_algebra():
    return build_algebra(["e1", "e2"], ["e1^2", "e2^2", "e1*e2"])


def catalog_algebras() -> dict:
    return {
        "A1": dual_numbers("e", 1),
        "A2": dual_numbers("e", 2),
        "T2-algebra": torus_algebra(),
        "CP1-tensor": tensor_product(dual_numbers("e", 1), dual_numbers("h", 1)),
    }


def random_apoint(M: Manifold, A, rng, scale=1.0) -> APoint:
    x = M.sample(1, rng)[0]
    mat = np.zeros((M.dim, A.dim))
    mat[:, 0] = x.coords
    mat[:, 1:] = rng.uniform(-scale, scale, size=(M.dim, A.dim - 1))
    return APoint(M, A, x.chart, tuple(A.element(r) for r in mat))


# ---------------------------------------------------------------------------
# 1


def check_transition(n=1000, seed=1):
    M = squaring_plane()
    A = dual_numbers("e", 2)
    T = M.transition_pieces("U", "V")[0]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        x0 = rng.uniform(0.1, 3.0)
        x1, x2, y0, y1, y2 = rng.uniform(-3.0, 3.0, size=5)
        xi = make_apoint(M, A, "U", [[x0, x1, x2], [y0, y1, y2]])
        got = prolong_transition(xi, T).matrix().ravel()
        want = np.array([x0**2, 2 * x0 * x1, 2 * x0 * x2 + x1**2, y0 + x0, y1 + x1, y2 + x2])
        worst = max(worst, float(np.max(np.abs(got - want))))
    return worst <= 1e-12, {"samples": n, "max_abs_error": worst, "tol": 1e-12, "x0_range": [0.1, 3.0]}


# 2


def check_algebra_laws():
    detail = {}
    ok = True
    for name, A in catalog_algebras().items():
        basis = [A.basis_element(m) for m in A.basis]
        comm = all(np.array_equal((a * b).coeffs, (b * a).coeffs) for a, b in itertools.product(basis, repeat=2))
        assoc = all(
            np.array_equal(((a * b) * c).coeffs, (a * (b * c)).coeffs) for a, b, c in itertools.product(basis, repeat=3)
        )
        nil = basis[1:]
        top = all(not np.any(_prod(A, combo).coeffs) for combo in itertools.product(nil, repeat=A.k + 1))
        sharp = A.k == 0 or any(np.any(_prod(A, combo).coeffs) for combo in itertools.product(nil, repeat=A.k))
        detail[name] = {"dim": A.dim, "k": A.k, "commutative": comm, "associative": assoc, "ideal_power_zero": top, "k_minimal": sharp}
        ok = ok and comm and assoc and top and sharp
    return ok, detail


def _prod(A, elems):
    out = A.one()
    for e in elems:
        out = out * e
    return out


# 3


def check_metric_axioms(n=1000, seed=3):
    rng = np.random.default_rng(seed)
    detail = {}
    ok = True
    for label, M, A in (("S1", circle(), dual_numbers("e", 2)), ("T2", torus(), torus_algebra())):
        cfg = MetricConfig()
        sym_exact, tri_worst, sep_min = True, -math.inf, math.inf
        for _ in range(n):
            a, b, c = (random_apoint(M, A, rng) for _ in range(3))
            dab, dba = distance(a, b, cfg), distance(b, a, cfg)
            dbc, dac = distance(b, c, cfg), distance(a, c, cfg)
            sym_exact = sym_exact and dab == dba
            tri_worst = max(tri_worst, dac - dab - dbc)
            # separation: same base, different jets
            mat = a.matrix().copy()
            mat[:, 1:] += rng.uniform(-1e-3, 1e-3, size=mat[:, 1:].shape)
            a2 = APoint(M, A, a.chart, tuple(A.element(r) for r in mat))
            sep_min = min(sep_min, distance(a, a2, cfg) / float(np.max(np.abs(mat - a.matrix()))))
        zero_self = distance(a, a, cfg)
        good = sym_exact and tri_worst <= 1e-9 and sep_min > 0.0 and zero_self == 0.0
        detail[label] = {
            "triples": n,
            "symmetric_exact": sym_exact,
            "max_triangle_violation": tri_worst,
            "min_separation_ratio": sep_min,
            "self_distance": zero_self,
        }
        ok = ok and good
    return ok, detail


# 4


def check_norm_equivalence(n=1000, seed=4):
    rng = np.random.default_rng(seed)
    detail = {}
    ok = True
    unit = MetricConfig()
    fact = MetricConfig(weights=WeightVector("factorial"))
    for label, M, A in (("S1", circle(), dual_numbers("e", 2)), ("R2", euclidean_space(2), truncated(["e1", "e2"], 2))):
        ratios = []
        for _ in range(n):
            a, b = random_apoint(M, A, rng), random_apoint(M, A, rng)
            d1 = distance(a, b, unit)
            if d1 > 0:
                ratios.append(distance(a, b, fact) / d1)
        c1, c2 = min(ratios), max(ratios)
        detail[label] = {"pairs": len(ratios), "C1": c1, "C2": c2, "C2_over_C1": c2 / c1}
        ok = ok and c2 / c1 <= 50.0
    return ok, detail


# 5


LEIBNIZ_TRIPLES = [("x", "x", "y", 0.5), ("sin(x)", "exp(y)", "x*y", -1.5), ("x^2 + y", "cos(x*y)", "y^3", 2.0)]


def check_path_lifting(seed=5):
    rng = np.random.default_rng(seed)
    M = euclidean_space(2)
    detail = {"cases": []}
    endpoints_exact, first_order_ok = True, True
    Cs = []
    for A, label in ((dual_numbers("e", 1), "A1"), (dual_numbers("e", 2), "A2")):
        for same_fiber in (True, False):
            e1 = random_apoint(M, A, rng)
            e2 = random_apoint(M, A, rng)
            if same_fiber:
                mat = e2.matrix().copy()
                mat[:, 0] = e1.matrix()[:, 0]
                e2 = APoint(M, A, e1.chart, tuple(A.element(r) for r in mat))
            path = lift_path(e1, e2)
            fpath = lift_path(e1, e2, semantics="functional")
            exact = np.array_equal(path.value(0.0).matrix(), e1.matrix()) and np.array_equal(
                path.value(1.0).matrix(), e2.matrix()
            )
            for f in ("x*y", "sin(x) + y^2"):
                exact = exact and np.array_equal(fpath.functional(0.0)(f).coeffs, evaluate(e1, f).coeffs)
                exact = exact and np.array_equal(fpath.functional(1.0)(f).coeffs, evaluate(e2, f).coeffs)
            cont = path_continuity(path, n=11)
            ts = np.linspace(0.0, 1.0, 11)
            func_res = max(
                fpath.functional(t).leibniz_residual(f, g, h, lam) for t in ts for f, g, h, lam in LEIBNIZ_TRIPLES
            )
            from .apoint import leibniz_residual

            coord_res = max(leibniz_residual(path.value(t), f, g, h, lam) for t in ts for f, g, h, lam in LEIBNIZ_TRIPLES)
            endpoints_exact = endpoints_exact and exact
            Cs.append(cont["C"])
            if label == "A1":
                first_order_ok = first_order_ok and func_res <= 1e-12
            detail["cases"].append(
                {
                    "algebra": label,
                    "same_fiber": same_fiber,
                    "endpoints_exact": exact,
                    "fitted_C": cont["C"],
                    "functional_leibniz_residual": func_res,
                    "coordinate_leibniz_residual": coord_res,
                }
            )
    detail["first_order_functional_residual_ok"] = first_order_ok
    detail["max_fitted_C"] = max(Cs)
    return endpoints_exact and first_order_ok, detail


# 6


FULL_CIRCLE_GRID = {"theta": [0, "2*pi", 629], "v": [-1, 1, 41]}


def check_dynamics_scans():
    M, A = circle(), dual_numbers()
    rot = fixed_scan(rotation(0.5, M), A, FULL_CIRCLE_GRID)
    ref = fixed_scan(reflection(M), A, FULL_CIRCLE_GRID)
    step = 2 * math.pi / 628
    centres = sorted((c["representative"][0] % (2 * math.pi), c["representative"][1]) for c in ref.clusters)
    want = [(0.0, 0.0), (math.pi, 0.0)]
    two = len(centres) == 2 and all(
        min(abs(a - x), 2 * math.pi - abs(a - x)) <= step and abs(b - y) <= 0.05 for (a, b), (x, y) in zip(centres, want)
    )
    detail = {
        "grid": FULL_CIRCLE_GRID,
        "rotation_fixed": len(rot.fixed),
        "reflection_clusters": ref.clusters,
        "reflection_fixed_points": len(ref.fixed),
    }
    return len(rot.fixed) == 0 and two, detail


# 7


def check_fixed_point_lemma(tol=1e-8):
    M, A = circle(), dual_numbers()
    lo, hi = 0.5, 2.5
    bump = bump_diffeo(0.25, lo, hi, M)
    scan = fixed_scan(bump, A, FULL_CIRCLE_GRID, tol)
    found = {idx for idx, _, _ in scan.fixed}
    thetas = scan.grid.values[0]
    vs = scan.grid.values[1]
    missing = 0
    over_w = 0
    for i, th in enumerate(thetas):
        t = th % (2 * math.pi)
        if lo < t < hi or abs(t - lo) < 1e-12 or abs(t - hi) < 1e-12:
            continue
        # W is the open arc complementary to [lo, hi]
        for j in range(len(vs)):
            over_w += 1
            if (i, j) not in found:
                missing += 1
    converse = 0.0
    for phi in (bump, reflection(M), rotation(0.5, M)):
        rep = scan if phi is bump else fixed_scan(phi, A, FULL_CIRCLE_GRID, tol)
        converse = max(converse, converse_check(phi, rep))
    detail = {"points_over_W": over_w, "missing_over_W": missing, "max_base_gap_of_fixed": converse, "tol": tol}
    return missing == 0 and converse <= tol, detail


# 8


def _random_shear_pair(rng):
    """Polynomial diffeomorphism of R^2 as a composition of two shears."""
    a, b, c, d = (float(v) for v in rng.uniform(-1, 1, size=4))
    p = f"({a!r})*y + ({b!r})*y^2"
    x1 = f"(x + {p})"
    q = f"({c!r})*{x1} + ({d!r})*{x1}^3"
    return [x1, f"(y + {q})"]


def check_functoriality(n=200, maps=5, seed=8):
    rng = np.random.default_rng(seed)
    M = euclidean_space(2)
    A = dual_numbers("e", 2)
    worst = 0.0
    for _ in range(maps):
        phi = MapSpec.build(M, M, _random_shear_pair(rng))
        psi = MapSpec.build(M, M, _random_shear_pair(rng))
        samples = [random_apoint(M, A, rng) for _ in range(n // maps)]
        worst = max(worst, functoriality_check(phi, psi, samples))
    return worst <= 1e-10, {"map_pairs": maps, "samples": n, "max_deviation": worst, "tol": 1e-10}


# 9


def check_pointwise_continuity(imax=100, n=20, seed=9):
    M, A = circle(), dual_numbers()
    rng = np.random.default_rng(seed)
    samples = [zero_section(M, A, x) for x in M.sample(n, rng)]
    ident = rotation(0.0, M)
    gaps, excess = [], -math.inf
    for i in range(1, imax + 1):
        g = pointwise_gap(rotation(1.0 / i, M), ident, A, samples)
        gaps.append(g)
        excess = max(excess, g - 1.0 / i)
    monotone = all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))
    # jets off the zero section, for the record
    general = [random_apoint(M, A, rng) for _ in range(5)]
    general_gaps = [pointwise_gap(rotation(1.0 / i, M), ident, A, general) for i in (1, 10, 100)]
    detail = {
        "maps": imax,
        "zero_section_samples": n,
        "max_excess_over_1_over_i": excess,
        "monotone": monotone,
        "gap_at_1_10_100": [gaps[0], gaps[9], gaps[-1]],
        "general_sample_gaps_at_1_10_100": general_gaps,
    }
    return excess <= 1e-9 and monotone, detail


# 10


def check_cohomology():
    cases = [
        ("S2", dual_numbers("e", 1), [1, 0, 1]),
        ("T2", torus_algebra(), [1, 2, 1]),
        ("S1", real_algebra(), [1, 1]),
        ("CP1", tensor_product(dual_numbers("e", 1), dual_numbers("h", 1)), [1, 0, 1]),
    ]
    out, ok = {}, True
    for name, A, want in cases:
        rep = bundle_cohomology_check(name, A, samples=4)
        good = rep["match"] and rep["betti_bundle"] == want
        out[name] = {"betti": rep["betti_bundle"], "expected": want, "retraction_ok": rep["retraction"]["ok"]}
        ok = ok and good
    return ok, out


# 11


def check_completeness(N=1000):
    M, A = circle(), dual_numbers("e", 2)
    cfg = MetricConfig()
    limit = make_apoint(M, A, "U", [[1.0, 0.5, -0.25]])
    seqs = {
        "base": lambda n: [[1.0 + 1.0 / n**3, 0.5, -0.25]],
        "jet": lambda n: [[1.0, 0.5 + 1.0 / n**3, -0.25 - 2.0 / n**3]],
        "mixed": lambda n: [[1.0 - 1.0 / n**3, 0.5 + 1.0 / n**3, -0.25 + 1.0 / n**4]],
    }
    out, ok = {}, True
    for name, f in seqs.items():
        seq = [make_apoint(M, A, "U", f(n)) for n in range(1, N + 1)]
        rep = convergence_check(seq, limit, cfg, tol=1e-6)
        out[name] = {"final_distance": rep["final_distance"], "monotone": rep["monotone"], "converged": rep["converged"]}
        ok = ok and rep["converged"] and rep["monotone"]
    return ok, out


# 12


JET_CORPUS = [
    ("x^2", {"x": 1.3}),
    ("x^3 - 2*x + 1", {"x": -0.7}),
    ("sin(x)", {"x": 0.4}),
    ("cos(x)", {"x": 2.1}),
    ("exp(x)", {"x": -1.2}),
    ("log(x)", {"x": 2.5}),
    ("sqrt(x)", {"x": 1.7}),
    ("atan(x)", {"x": 0.9}),
    ("1/x", {"x": 1.5}),
    ("1/x^2", {"x": 0.8}),
    ("sin(x)*cos(x)", {"x": 0.3}),
    ("exp(sin(x))", {"x": 1.1}),
    ("log(1 + x^2)", {"x": -0.6}),
    ("sqrt(1 + x^2)", {"x": 2.2}),
    ("atan(2*x + 1)", {"x": -0.4}),
    ("x*exp(-x^2)", {"x": 0.5}),
    ("sin(x)/x", {"x": 1.9}),
    ("(x - 1)^4", {"x": 0.2}),
    ("cos(3*x)^2", {"x": 0.7}),
    ("exp(x)/(1 + exp(x))", {"x": 0.35}),
    ("x*y", {"x": 0.5, "y": -1.5}),
    ("x^2 + y^2", {"x": 1.0, "y": 2.0}),
    ("sin(x)*cos(y)", {"x": 0.3, "y": 1.2}),
    ("exp(x + 2*y)", {"x": -0.3, "y": 0.2}),
    ("log(x^2 + y^2)", {"x": 1.1, "y": -0.4}),
    ("sqrt(x^2 + y^2 + 1)", {"x": 0.6, "y": 0.9}),
    ("atan(y/x)", {"x": 1.4, "y": 0.7}),
    ("x^3*y - y^2", {"x": -0.8, "y": 1.3}),
    ("(x + y)/(1 + x^2)", {"x": 0.25, "y": -2.0}),
    ("sin(x*y)", {"x": 1.2, "y": 0.6}),
    ("cos(x - y)^3", {"x": 2.0, "y": 0.5}),
    ("exp(-x*y)*x", {"x": 0.9, "y": 0.4}),
    ("x/(y^2 + 1)", {"x": 1.7, "y": -0.3}),
    ("(x*y)^2 - 3*x", {"x": 0.45, "y": 1.6}),
    ("2*x^2*y + y^3", {"x": -1.1, "y": 0.7}),
    ("x^2/(1+y^2)", {"x": 0.3, "y": 0.8}),
    ("sqrt(x)*log(y)", {"x": 2.0, "y": 3.0}),
    ("atan(x*y + 1)", {"x": 0.2, "y": -0.9}),
    ("sin(x)^2 + cos(y)^2", {"x": 0.8, "y": 1.4}),
    ("exp(sin(x) * y)", {"x": 1.0, "y": 0.5}),
    ("x*y*z", {"x": 0.4, "y": -1.2, "z": 0.9}),
    ("x^2 + y^2 + z^2", {"x": 1.0, "y": 0.5, "z": -0.5}),
    ("sin(x + y + z)", {"x": 0.1, "y": 0.2, "z": 0.3}),
    ("exp(x*y - z)", {"x": 0.5, "y": 0.6, "z": 0.7}),
    ("log(1 + x^2 + y^2 + z^2)", {"x": 0.3, "y": -0.8, "z": 1.1}),
    ("x*sin(y)*exp(z)", {"x": 1.3, "y": 0.4, "z": -0.6}),
    ("(x + y*z)^3", {"x": 0.2, "y": 0.7, "z": -0.5}),
    ("sqrt(x*y + z^2 + 2)", {"x": 0.9, "y": 1.1, "z": 0.3}),
    ("atan(x) + atan(y) + atan(z)", {"x": -0.5, "y": 1.5, "z": 0.25}),
    ("cos(x*y*z)/(1 + z^2)", {"x": 1.2, "y": 0.8, "z": 0.6}),
]


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1.0)


def check_jet_crosscheck(h=1e-5):
    """First partials against central differences of the function; second
    partials against central differences of the exact first partials."""
    worst, worst_expr = 0.0, None
    for src, at in JET_CORPUS:
        e = as_expr(src)
        names = sorted(at)
        parts = partial_derivatives(e, at, 2)
        for i, v in enumerate(names):
            up, dn = dict(at), dict(at)
            up[v] += h
            dn[v] -= h
            fd = (eval_real(e, up) - eval_real(e, dn)) / (2 * h)
            key = tuple(1 if j == i else 0 for j in range(len(names)))
            err = _rel(parts[key], fd)
            g_up, g_dn = partial_derivatives(e, up, 1), partial_derivatives(e, dn, 1)
            for j in range(len(names)):
                k1 = tuple(1 if m == j else 0 for m in range(len(names)))
                fd2 = (g_up[k1] - g_dn[k1]) / (2 * h)
                k2 = tuple(int(m == i) + int(m == j) for m in range(len(names)))
                err = max(err, _rel(parts[k2], fd2))
            if err > worst:
                worst, worst_expr = err, src
    return worst <= 1e-6, {"expressions": len(JET_CORPUS), "max_relative_error": worst, "worst": worst_expr, "tol": 1e-6}


CHECKS = [
    (1, "transition prolongation reproduces the closed-form tuple", check_transition, 1.0),
    (2, "algebra laws and nilpotency on the catalog algebras", check_algebra_laws, 1.0),
    (3, "metric axioms in probe mode on S1 and T2 bundles", check_metric_axioms, 10.0),
    (4, "norm equivalence between factorial and unit weights", check_norm_equivalence, None),
    (5, "path lifting: endpoints, continuity, first-order Leibniz", check_path_lifting, None),
    (6, "rotation and reflection fixed-point scans", check_dynamics_scans, 30.0),
    (7, "fixed points of a map equal to the identity on an arc, and the converse", check_fixed_point_lemma, None),
    (8, "functoriality of the Weil lifting on R^2", check_functoriality, None),
    (9, "pointwise gap of rotations by 1/i", check_pointwise_continuity, None),
    (10, "Betti numbers of the catalog bundles", check_cohomology, 5.0),
    (11, "Cauchy sequences converge to their limits", check_completeness, None),
    (12, "jets against finite differences on a 50-expression corpus", check_jet_crosscheck, None),
]


def run_check(number: int) -> CheckResult:
    for num, name, fn, limit in CHECKS:
        if num == number:
            return _timed(num, name, fn, limit)
    raise KeyError(number)


def run_all(numbers=None) -> list:
    return [run_check(n) for n, *_ in CHECKS if numbers is None or n in numbers]
