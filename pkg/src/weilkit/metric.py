"""Weighted norms and distances on Weil bundles.

``distance(a, b, cfg)`` is the base Riemannian distance plus a supremum of
``||L_a(f) - L_b(f)||_w`` over a function family:

* ``probe`` mode takes the supremum over a finite separating probe family,
  which makes the result a genuine metric for every pair of points;
* ``box`` mode is exact for two points over the same base point: there the
  Taylor form of ``L`` turns the supremum over the C^k unit ball into a
  maximum of a convex function over the coefficient box ``[-1, 1]^N``, which
  is attained at a vertex.

A probe may be a *harmonic pair* ``(f, g)`` standing for the whole circle of
functions ``cos(b) f + sin(b) g``; the supremum over ``b`` is computed in
closed form.  For ``(cos t, sin t)`` on the circle this family is closed
under rotations, so rotations act isometrically.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import WeilAlgebra, factorial_multi
from .apoint import APoint, l_part
from .atlas import Manifold
from .errors import (
    AlgebraMismatch,
    BoxTooLarge,
    FiberMismatch,
    InvalidConfig,
    ManifoldMismatch,
    WeightMismatch,
)
from .expr import as_expr, eval_real, partial_derivatives, to_source

MAX_BOX = 20
SAME_FIBER_TOL = 1e-12
SEPARATION_TOL = 1e-12
AXIOM_SLACK = 1e-9
PROBE_BOUND_SLACK = 1e-6


@dataclass(frozen=True)
class WeightVector:
    """Weights on the nilpotent basis; ``factorial`` uses ``1/|alpha|!``."""

    mode: str = "explicit"
    values: tuple | None = None

    def __post_init__(self):
        if self.mode not in ("explicit", "factorial"):
            raise InvalidConfig(f"unknown weight mode {self.mode!r}")
        if self.values is not None and any(v <= 0 for v in self.values):
            raise InvalidConfig("weights must be positive")

    def resolve(self, A: WeilAlgebra) -> np.ndarray:
        n = A.dim - 1
        if self.mode == "factorial":
            return np.array([1.0 / math.factorial(d) for d in A.basis_degrees[1:]])
        if self.values is None:
            return np.ones(n)
        if len(self.values) != n:
            raise WeightMismatch(f"{len(self.values)} weights for {n} nilpotent basis elements")
        return np.array(self.values, dtype=float)


@dataclass(frozen=True)
class Probe:
    """A test function, or a harmonic pair of them.

    Each function is an expression (applies in every chart whose coordinates
    it uses) or a dict chart id -> expression.
    """

    funcs: tuple
    label: str = ""

    @property
    def is_pair(self) -> bool:
        return len(self.funcs) == 2

    @classmethod
    def single(cls, f, label=""):
        return cls((f,), label or _label(f))

    @classmethod
    def pair(cls, f, g, label=""):
        return cls((f, g), label or f"[{_label(f)}, {_label(g)}]")

    def to_json(self):
        items = [_func_json(f) for f in self.funcs]
        return {"pair": items} if self.is_pair else items[0]


def _label(f):
    if isinstance(f, dict):
        return "{" + ", ".join(f"{k}: {_label(v)}" for k, v in f.items()) + "}"
    return f if isinstance(f, str) else to_source(as_expr(f))


def _func_json(f):
    if isinstance(f, dict):
        return {k: _label(v) for k, v in f.items()}
    return _label(f)


@dataclass(frozen=True)
class MetricConfig:
    weights: WeightVector = field(default_factory=WeightVector)
    ideal_norm: str = "l1"
    mode: str = "probe"
    probes: tuple | None = None
    k: int | None = None

    def __post_init__(self):
        if self.ideal_norm not in ("l1", "l2", "linf"):
            raise InvalidConfig(f"unknown ideal norm {self.ideal_norm!r}")
        if self.mode not in ("probe", "box"):
            raise InvalidConfig(f"unknown metric mode {self.mode!r}")
        if self.probes is not None and len(self.probes) == 0:
            raise InvalidConfig("probe family must be nonempty")

    def order(self, A: WeilAlgebra) -> int:
        return self.k if self.k is not None else max(A.k, 1)

    def with_(self, **changes) -> "MetricConfig":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class SupReport:
    value: float
    attained_at: object
    mode: str


# ---------------------------------------------------------------------------
# norms


def _ideal_norm(vec: np.ndarray, kind: str, axis=-1):
    if kind == "l1":
        return np.sum(np.abs(vec), axis=axis)
    if kind == "l2":
        return np.sqrt(np.sum(vec * vec, axis=axis))
    return np.max(np.abs(vec), axis=axis) if vec.shape[axis] else np.zeros(vec.shape[:axis] if axis == -1 else ())


def weighted_norm(a, cfg: MetricConfig) -> float:
    """``|a_1| + ||(a_i w_i)_{i>=2}||`` for the configured ideal norm."""
    w = cfg.weights.resolve(a.algebra)
    nil = a.coeffs[1:] * w
    tail = float(_ideal_norm(nil, cfg.ideal_norm)) if nil.size else 0.0
    return abs(float(a.coeffs[0])) + tail


def _pair_sup(p: np.ndarray, q: np.ndarray, kind: str) -> float:
    """``sup_b ||cos(b) p + sin(b) q||`` exactly."""
    if p.size == 0:
        return 0.0
    if kind == "linf":
        return float(np.max(np.hypot(p, q)))
    if kind == "l2":
        return float(np.linalg.norm(np.stack([p, q], axis=1), 2))
    # l1: the maximum equals max over realisable sign patterns s of |(s.p, s.q)|
    phi = np.arctan2(q, p)
    live = np.hypot(p, q) > 0
    if not np.any(live):
        return 0.0
    breaks = np.sort(np.mod(phi[live] + math.pi / 2, math.pi))
    cuts = np.concatenate([breaks, [breaks[0] + math.pi]])
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    best = 0.0
    for b in mids:
        s = np.sign(p * math.cos(b) + q * math.sin(b))
        best = max(best, math.hypot(float(s @ p), float(s @ q)))
    return best


# ---------------------------------------------------------------------------
# probe families


def _monomial_exprs(names, k):
    out = []
    for deg in range(1, k + 1):
        for alpha in itertools.combinations_with_replacement(range(len(names)), deg):
            out.append("*".join(names[i] for i in alpha))
    return out


def _ck_at(e, names, k, x) -> float:
    env = dict(zip(names, (float(v) for v in x)))
    best = abs(eval_real(e, env))
    if k >= 1:
        parts = partial_derivatives(e, env, k)
        if parts:
            best = max(best, max(abs(v) for v in parts.values()))
    return best


def sampled_ck_norm(f, names, k, points) -> float:
    """``max_{|a| <= k} sup |d^a f|`` over the sample points."""
    e = as_expr(f)
    return max((_ck_at(e, names, k, x) for x in points), default=0.0)


def refined_ck_norm(f, names, k, lo, hi, n, zooms=14, keep=4) -> float:
    """Grid maximum of the C^k norm, sharpened by zooming in on the best cells.

    A plain grid can sit between a peak and its neighbours and underestimate
    the bound; each zoom halves the cell around the current best point.
    """
    e = as_expr(f)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    pts = _grid(lo, hi, n, len(names))
    vals = np.array([_ck_at(e, names, k, x) for x in pts])
    best = float(vals.max()) if vals.size else 0.0
    step = (hi - lo) / max(n - 1, 1)
    for i in np.argsort(-vals)[:keep]:
        c, h = pts[i], step.copy()
        for _ in range(zooms):
            cand = np.clip(c + _grid(-h, h, 3, len(names)), lo, hi)
            cv = [_ck_at(e, names, k, x) for x in cand]
            j = int(np.argmax(cv))
            best = max(best, cv[j])
            c, h = cand[j], h / 2
    return best


def _grid(lo, hi, n, dim):
    axes = [np.linspace(l, h, n) for l, h in zip(lo, hi)]
    return np.array(list(itertools.product(*axes))) if dim else np.zeros((1, 0))


def _scaled(expr_text, bound):
    if bound <= 0:
        return expr_text
    return f"({expr_text})/{bound!r}"


def default_probes(M: Manifold, chart: str | None = None, k: int = 1) -> list:
    """Finite separating family with (sampled) C^k norm at most 1.

    Angle coordinates get harmonic pairs ``(cos jt, sin jt)/j^k``; the round
    sphere gets its three ambient coordinates; other coordinates get
    normalised monomials ``x^a / C_a`` with ``C_a`` the sampled C^k bound over
    the unit box (intersected with the chart domain).
    """
    if not 1 <= k <= 4:
        raise InvalidConfig(f"default probes need 1 <= k <= 4, got {k}")
    chart = chart or next(iter(M.charts))
    names = list(M.chart(chart).coordinate_names)
    probes = []
    if M.builtin in ("S2",) or M.name == "CP1":
        from .atlas import SphereMetric

        amb = M.metric.ambient  # type: ignore[attr-defined]
        for i, label in enumerate("XYZ"):
            bound = max(
                refined_ck_norm(amb[cid][i], M.chart(cid).coordinate_names, k, (-3.0, -3.0), (3.0, 3.0), 25)
                for cid in amb
            )
            probes.append(
                Probe.single(
                    {cid: _scaled(to_source(amb[cid][i]), bound) for cid in amb}, label=f"{label}/{bound:.6g}"
                )
            )
        return probes
    periods = M.periods or (None,) * M.dim
    flat_names = [n for n, P in zip(names, periods) if P is None]
    for n, P in zip(names, periods):
        if P is None:
            continue
        for j in range(1, k + 1):
            arg = n if j == 1 else f"{j}*{n}"
            scale = float(j**k)
            c, s = f"cos({arg})", f"sin({arg})"
            if scale != 1.0:
                c, s = f"{c}/{scale!r}", f"{s}/{scale!r}"
            probes.append(Probe.pair(c, s))
    if flat_names:
        lo, hi = _sample_box(M, chart, flat_names)
        # every derivative of a monomial is c * prod |x_i|^b_i, largest where
        # all |x_i| = 1, so the box corners give the exact bound
        pts = _grid(lo, hi, 2, len(flat_names))
        for mono in _monomial_exprs(flat_names, k):
            bound = sampled_ck_norm(mono, flat_names, k, pts)
            probes.append(Probe.single(_scaled(mono, bound), label=f"{mono}/{bound:.6g}"))
    return probes


def _sample_box(M, chart, names):
    ch = M.chart(chart)
    lo, hi = [], []
    for n in names:
        l, h = -1.0, 1.0
        # boundary charts such as x >= 0 restrict the box
        for c in ch.domain:
            env_lo = {m: 0.0 for m in ch.coordinate_names}
            env_lo[n] = -1.0
            if not c.holds(env_lo):
                l = 0.0
        lo.append(l)
        hi.append(h)
    return lo, hi


def probe_bounds(M: Manifold, probes: Sequence[Probe], k: int, n_samples: int = 200, seed: int = 0) -> list:
    """Sampled C^k norm of every probe (pairs: both members and their rotations)."""
    rng = np.random.default_rng(seed)
    pts = M.sample(n_samples, rng)
    out = []
    for p in probes:
        worst = 0.0
        members = list(p.funcs)
        if p.is_pair:
            betas = np.linspace(0.0, math.pi, 7)[1:-1]
            members = [
                _combine(p.funcs[0], p.funcs[1], math.cos(b), math.sin(b)) for b in betas
            ] + members
        for f in members:
            for x in pts:
                e = f.get(x.chart) if isinstance(f, dict) else f
                if e is None:
                    continue
                names = M.chart(x.chart).coordinate_names
                worst = max(worst, sampled_ck_norm(e, names, k, [x.coords]))
        out.append(worst)
    return out


def _combine(f, g, a, b):
    if isinstance(f, dict):
        return {cid: f"{a!r}*({_label(f[cid])}) + {b!r}*({_label(g[cid])})" for cid in f}
    return f"{a!r}*({_label(f)}) + {b!r}*({_label(g)})"


def validate_probes(M: Manifold, probes, k: int) -> None:
    for p, b in zip(probes, probe_bounds(M, probes, k)):
        if b > 1.0 + PROBE_BOUND_SLACK:
            raise InvalidConfig(f"probe {p.label} has sampled C^{k} norm {b:.6g} > 1")


# ---------------------------------------------------------------------------
# sup terms


def _check_pair(a: APoint, b: APoint):
    if a.manifold is not b.manifold and a.manifold.name != b.manifold.name:
        raise ManifoldMismatch(f"{a.manifold.name} vs {b.manifold.name}")
    if a.algebra != b.algebra:
        raise AlgebraMismatch(f"{a.algebra!r} vs {b.algebra!r}")


_PROBE_CACHE: dict = {}


def probes_for(M: Manifold, cfg: MetricConfig, A: WeilAlgebra) -> tuple:
    if cfg.probes is not None:
        return cfg.probes
    key = (id(M), M.name, cfg.order(A))
    if key not in _PROBE_CACHE:
        _PROBE_CACHE[key] = (M, tuple(default_probes(M, None, min(cfg.order(A), 4))))
    return _PROBE_CACHE[key][1]


def sup_term_probe(a: APoint, b: APoint, cfg: MetricConfig) -> SupReport:
    """Maximum over the probe family of ``||L_a(f) - L_b(f)||_w``."""
    _check_pair(a, b)
    w = cfg.weights.resolve(a.algebra)
    best, arg = 0.0, None
    for i, p in enumerate(probes_for(a.manifold, cfg, a.algebra)):
        diffs = [(l_part(a, f) - l_part(b, f)).coeffs[1:] * w for f in p.funcs]
        if p.is_pair:
            v = _pair_sup(diffs[0], diffs[1], cfg.ideal_norm)
        else:
            v = float(_ideal_norm(diffs[0], cfg.ideal_norm)) if diffs[0].size else 0.0
        if arg is None or v > best:
            best, arg = v, i
    return SupReport(best, arg, "probe")


def multi_indices(m: int, k: int) -> list:
    """Exponent vectors with ``1 <= |a| <= k``, degree then lex order."""
    out = []
    for deg in range(1, k + 1):
        block = [a for a in itertools.product(range(deg + 1), repeat=m) if sum(a) == deg]
        block.sort(key=lambda a: tuple(-x for x in a))
        out.extend(block)
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("WEILKIT_THREADS", "1")))
    except ValueError:
        return 1


def _box_max(U: np.ndarray, kind: str):
    """Max over c in {-1,1}^N of ``norm(c @ U)``; returns (value, vertex)."""
    N = U.shape[0]
    if N == 0 or U.shape[1] == 0:
        return 0.0, ()
    # c and -c give the same norm: fix the first sign
    total = 1 << (N - 1)
    chunk = 1 << 14
    bits = np.arange(N - 1, dtype=np.int64)

    def work(start):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        signs = np.ones((idx.size, N))
        if N > 1:
            signs[:, 1:] = 1.0 - 2.0 * ((idx[:, None] >> bits) & 1)
        vals = _ideal_norm(signs @ U, kind)
        j = int(np.argmax(vals))
        return float(vals[j]), tuple(int(s) for s in signs[j])

    starts = range(0, total, chunk)
    nthreads = _threads()
    if nthreads > 1 and total > chunk:
        with ThreadPoolExecutor(nthreads) as ex:
            results = list(ex.map(work, starts))
    else:
        results = [work(s) for s in starts]
    # deterministic tie-break: largest value, then first chunk
    return max(results, key=lambda r: r[0])


def sup_term_box(a: APoint, b: APoint, cfg: MetricConfig) -> SupReport:
    """Exact same-fiber supremum over the C^k unit ball."""
    _check_pair(a, b)
    if b.chart != a.chart:
        from .lifting import to_chart

        b = to_chart(b, a.chart)
    gap = np.max(np.abs(np.array(a.base.coords) - np.array(b.base.coords))) if a.base.coords else 0.0
    if gap > SAME_FIBER_TOL:
        raise FiberMismatch(f"base points differ by {gap:.3g}; box mode needs a common fiber")
    A = a.algebra
    m = len(a.acoords)
    k = cfg.order(A)
    alphas = multi_indices(m, k)
    if len(alphas) > MAX_BOX:
        raise BoxTooLarge(f"{len(alphas)} box coordinates exceed the limit {MAX_BOX}")
    w = cfg.weights.resolve(A)
    na, nb = a.nilpotent_parts(), b.nilpotent_parts()
    rows = []
    for alpha in alphas:
        pa, pb = A.one(), A.one()
        for i, e in enumerate(alpha):
            if e:
                pa = pa * na[i] ** e
                pb = pb * nb[i] ** e
        rows.append((pa - pb).coeffs[1:] * w / factorial_multi(alpha))
    U = np.array(rows) if rows else np.zeros((0, A.dim - 1))
    value, vertex = _box_max(U, cfg.ideal_norm)
    return SupReport(value, {"alphas": [list(x) for x in alphas], "vertex": list(vertex)}, "box")


def sup_term(a: APoint, b: APoint, cfg: MetricConfig) -> SupReport:
    return sup_term_box(a, b, cfg) if cfg.mode == "box" else sup_term_probe(a, b, cfg)


def distance(a: APoint, b: APoint, cfg: MetricConfig | None = None) -> float:
    """Base distance plus the configured supremum term."""
    cfg = cfg or MetricConfig()
    _check_pair(a, b)
    d = a.manifold.base_distance(a.base, b.base, check=False)
    if cfg.mode == "box" and d > SAME_FIBER_TOL:
        raise FiberMismatch(f"box mode needs a common fiber; base distance is {d:.3g}")
    return d + sup_term(a, b, cfg).value


def distance_report(a: APoint, b: APoint, cfg: MetricConfig | None = None) -> dict:
    cfg = cfg or MetricConfig()
    _check_pair(a, b)
    d = a.manifold.base_distance(a.base, b.base, check=False)
    if cfg.mode == "box" and d > SAME_FIBER_TOL:
        raise FiberMismatch(f"box mode needs a common fiber; base distance is {d:.3g}")
    s = sup_term(a, b, cfg)
    return {"distance": d + s.value, "base": d, "sup": s.value, "attained_at": s.attained_at, "mode": s.mode}


def convergence_check(seq: Sequence[APoint], limit: APoint, cfg: MetricConfig | None = None, tol: float = 1e-6) -> dict:
    """Distances to ``limit``, Cauchy moduli, and a convergence verdict.

    The Cauchy modulus at ``n`` is bounded by ``d_n + max_{m>n} d_m``
    (triangle inequality through the limit).
    """
    cfg = cfg or MetricConfig()
    d = np.array([distance(x, limit, cfg) for x in seq])
    tail = np.maximum.accumulate(d[::-1])[::-1]
    cauchy = d + np.concatenate([tail[1:], [0.0]])
    monotone = bool(np.all(np.diff(d) <= AXIOM_SLACK))
    converged = bool(d.size and d[-1] < tol and tail[-1] < tol)
    return {
        "distances": d.tolist(),
        "cauchy_bound": cauchy.tolist(),
        "final_distance": float(d[-1]) if d.size else 0.0,
        "monotone": monotone,
        "converged": converged,
        "tol": tol,
    }
