"""Lifting curves, homotopies and smooth maps to the Weil bundle.

Everything here acts on A-coordinates by jet evaluation: a coordinate change
or a map component ``phi_j`` sends ``acoords`` to ``phi_j(acoords)`` computed
in the algebra.  Period shifts of angle coordinates only move real parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .algebra import AlgebraElement, WeilAlgebra
from .apoint import APoint, base_value, l_part, leibniz_defect, make_apoint
from .atlas import BasePoint, Manifold, TransitionMap
from .errors import (
    ChartDomain,
    ChartPathUnresolvable,
    EndpointMismatch,
    InvalidInput,
    ManifoldMismatch,
    TargetChartUnresolved,
)
from .expr import as_expr, eval_jet, eval_real, free_variables, substitute, to_source

ENDPOINT_TOL = 1e-9


# ---------------------------------------------------------------------------
# chart changes


def prolong_transition(xi: APoint, T: TransitionMap) -> APoint:
    """Apply a transition map to the A-coordinates of ``xi``."""
    M = xi.manifold
    if T.from_chart != xi.chart:
        raise ChartDomain(f"transition starts at chart {T.from_chart!r}, point is in {xi.chart!r}", chart=xi.chart)
    src = M.chart(xi.chart)
    if not T.applies(src, xi.base.coords):
        raise ChartDomain(f"base {xi.base.coords} is outside this piece of the {T.from_chart}->{T.to_chart} overlap")
    env = xi.env()
    out = tuple(eval_jet(c, env, xi.algebra) for c in T.components)
    target = M.chart(T.to_chart)
    base = tuple(a.real_part for a in out)
    if not target.contains(base):
        raise ChartDomain(f"image {base} violates the domain of chart {T.to_chart!r}", chart=T.to_chart)
    return APoint(M, xi.algebra, T.to_chart, out)


def to_chart(xi: APoint, chart: str) -> APoint:
    """Express ``xi`` in another chart (transition, then period shift if needed)."""
    if chart == xi.chart:
        return xi
    M = xi.manifold
    M.chart(chart)
    src = M.chart(xi.chart)
    for T in M.transition_pieces(xi.chart, chart):
        if not T.applies(src, xi.base.coords):
            continue
        env = xi.env()
        out = tuple(eval_jet(c, env, xi.algebra) for c in T.components)
        base = tuple(a.real_part for a in out)
        if M.chart(chart).contains(base):
            return APoint(M, xi.algebra, chart, out)
        s = M.period_shift(chart, base)
        if s is not None:
            return _shifted(M, xi.algebra, chart, out, s)
    # same coordinates, different chart domain (e.g. two angle charts)
    if not M.transition_pieces(xi.chart, chart) and M.periods is not None:
        s = M.period_shift(chart, xi.base.coords)
        if s is not None and tuple(M.chart(chart).coordinate_names) == tuple(src.coordinate_names):
            return _shifted(M, xi.algebra, chart, xi.acoords, s)
    raise ChartDomain(f"{xi.base.coords} in chart {xi.chart!r} has no image in chart {chart!r}", chart=chart)


def _shifted(M, A, chart, acoords, shift):
    acoords = tuple(a + A.scalar(float(s)) if s else a for a, s in zip(acoords, shift))
    return APoint(M, A, chart, acoords)


def resolve_apoint(M: Manifold, A: WeilAlgebra, chart: str, acoords: Sequence[AlgebraElement]) -> APoint:
    """APoint from raw A-coordinates w.r.t. ``chart`` whose base may lie outside it."""
    acoords = tuple(acoords)
    base = tuple(a.real_part for a in acoords)
    target, move = M.resolve(chart, base)
    if move is None:
        return APoint(M, A, chart, acoords)
    if isinstance(move, np.ndarray):
        return _shifted(M, A, target, acoords, move)
    T, s = move
    env = dict(zip(M.chart(chart).coordinate_names, acoords))
    out = tuple(eval_jet(c, env, A) for c in T.components)
    return _shifted(M, A, target, out, s) if s is not None else APoint(M, A, target, out)


# ---------------------------------------------------------------------------
# maps


def _expr_list(items):
    return tuple(as_expr(e) for e in items)


@dataclass(frozen=True)
class ChartComponents:
    """Components of a map on one source chart, in coordinates of ``target``."""

    source: str
    target: str
    exprs: tuple


@dataclass(frozen=True, eq=False)
class MapSpec:
    """A smooth map ``M -> N`` given chartwise by component expressions."""

    source: Manifold
    target: Manifold
    pieces: tuple

    @classmethod
    def build(cls, source: Manifold, target: Manifold, components, chart=None, target_chart=None) -> "MapSpec":
        """``components`` is a list (for ``chart``) or a dict chart -> list or
        chart -> {"target": chart, "components": list}."""
        pieces = []
        if isinstance(components, Mapping):
            items = components.items()
        else:
            items = [(chart or next(iter(source.charts)), components)]
        for cid, spec in items:
            src = source.chart(cid)
            if isinstance(spec, Mapping):
                tgt, exprs = spec.get("target", target_chart), spec["components"]
            else:
                tgt, exprs = target_chart, spec
            tgt = tgt or (cid if cid in target.charts else next(iter(target.charts)))
            exprs = _expr_list(exprs)
            if len(exprs) != target.chart(tgt).dim:
                raise InvalidInput(f"map on chart {cid!r} needs {target.chart(tgt).dim} components, got {len(exprs)}")
            extra = set().union(*(free_variables(e) for e in exprs)) - set(src.coordinate_names)
            if extra:
                raise InvalidInput(f"map components use unknown names {sorted(extra)}")
            pieces.append(ChartComponents(cid, tgt, exprs))
        if not isinstance(components, Mapping) and source.periods is not None:
            # angle charts differ by whole periods; a formula written as a global
            # lift (F(t + P) = F(t) + nP) is valid in each of them
            first = pieces[0]
            names = source.chart(first.source).coordinate_names
            for cid, ch in source.charts.items():
                if cid != first.source and ch.coordinate_names == names:
                    tgt = cid if (first.target == first.source and cid in target.charts) else first.target
                    pieces.append(ChartComponents(cid, tgt, first.exprs))
        return cls(source, target, tuple(pieces))

    def piece(self, chart: str) -> ChartComponents | None:
        for p in self.pieces:
            if p.source == chart:
                return p
        return None

    def _pick(self, xi_chart: str, to_chart_fn, point):
        p = self.piece(xi_chart)
        if p is not None:
            return p, point
        for p in self.pieces:
            try:
                return p, to_chart_fn(point, p.source)
            except ChartDomain:
                continue
        raise ChartDomain(f"map has no component chart reachable from {xi_chart!r}", chart=xi_chart)

    def apply_base(self, x: BasePoint) -> BasePoint:
        def move(p, cid):
            return BasePoint(cid, self.source.transport_coords(p, cid))

        p, x = self._pick(x.chart, move, x)
        env = dict(zip(self.source.chart(p.source).coordinate_names, x.coords))
        raw = [eval_real(e, env) for e in p.exprs]
        return self.target.locate(raw, p.target)

    def to_json(self) -> dict:
        return {
            "from": self.source.name,
            "to": self.target.name,
            "components": {
                p.source: {"target": p.target, "components": [to_source(e) for e in p.exprs]} for p in self.pieces
            },
        }


def compose(psi: MapSpec, phi: MapSpec) -> MapSpec:
    """Chartwise substitution ``psi o phi``.

    Each piece of ``phi`` lands in some chart of ``N``; it is composed with
    the piece of ``psi`` on that chart.
    """
    if phi.target.name != psi.source.name:
        raise ManifoldMismatch(f"cannot compose: {phi.target.name} -> vs {psi.source.name} ->")
    pieces = []
    for p in phi.pieces:
        q = psi.piece(p.target)
        if q is None:
            raise ChartDomain(f"second map has no components on chart {p.target!r}", chart=p.target)
        names = psi.source.chart(q.source).coordinate_names
        binding = dict(zip(names, p.exprs))
        pieces.append(ChartComponents(p.source, q.target, tuple(substitute(e, binding) for e in q.exprs)))
    return MapSpec(phi.source, psi.target, tuple(pieces))


class LiftedMap:
    """``phi^A``: acts on A-coordinates by jet evaluation of the components."""

    def __init__(self, spec: MapSpec, algebra: WeilAlgebra):
        self.spec = spec
        self.algebra = algebra

    @property
    def source(self) -> Manifold:
        return self.spec.source

    @property
    def target(self) -> Manifold:
        return self.spec.target

    def apply(self, xi: APoint) -> APoint:
        if xi.algebra != self.algebra:
            from .errors import AlgebraMismatch

            raise AlgebraMismatch(f"lift is over {self.algebra!r}, point over {xi.algebra!r}")
        p, xi = self.spec._pick(xi.chart, to_chart, xi)
        env = xi.env()
        raw = tuple(eval_jet(e, env, self.algebra) for e in p.exprs)
        return resolve_apoint(self.target, self.algebra, p.target, raw)

    __call__ = apply

    def apply_base(self, x: BasePoint) -> BasePoint:
        return self.spec.apply_base(x)

    def pullback_check(self, xi: APoint, h) -> float:
        """``|phi^A(xi)(h) - xi(h o phi)|`` for a function ``h`` on the target."""
        from .apoint import evaluate

        img = self.apply(xi)
        lhs = evaluate(img, h)
        p, src_pt = self.spec._pick(xi.chart, to_chart, xi)
        # h o phi in the source chart: substitute the components into h's target-chart form
        tgt_names = self.target.chart(p.target).coordinate_names
        h_expr = as_expr(h[p.target]) if isinstance(h, Mapping) else as_expr(h)
        pulled = substitute(h_expr, dict(zip(tgt_names, p.exprs)))
        rhs = eval_jet(pulled, src_pt.env(), self.algebra)
        # on angle targets pass a periodic h: the image may be shifted by whole periods
        return float(np.max(np.abs((lhs - rhs).coeffs)))


def lift_map(phi, algebra: WeilAlgebra, source: Manifold | None = None, target: Manifold | None = None) -> LiftedMap:
    """Weil lifting of a map; ``phi`` is a MapSpec or a map JSON dict."""
    if isinstance(phi, MapSpec):
        return LiftedMap(phi, algebra)
    from .atlas import builtin

    source = source or builtin(phi["from"])
    target = target or (source if phi.get("to", phi["from"]) == source.name else builtin(phi["to"]))
    spec = MapSpec.build(source, target, phi["components"], phi.get("chart"), phi.get("target_chart"))
    return LiftedMap(spec, algebra)


def compose_lifted(psi_a: LiftedMap, phi_a: LiftedMap) -> "ComposedLift":
    if psi_a.algebra != phi_a.algebra:
        from .errors import AlgebraMismatch

        raise AlgebraMismatch("lifts over different algebras")
    return ComposedLift(psi_a, phi_a)


class ComposedLift:
    """``psi^A o phi^A`` evaluated stepwise."""

    def __init__(self, psi_a: LiftedMap, phi_a: LiftedMap):
        self.psi_a, self.phi_a = psi_a, phi_a
        self.algebra = psi_a.algebra

    def apply(self, xi: APoint) -> APoint:
        return self.psi_a.apply(self.phi_a.apply(xi))

    __call__ = apply


def apoint_gap(a: APoint, b: APoint) -> float:
    """Coefficientwise max difference after moving ``b`` to ``a``'s chart."""
    if b.chart != a.chart:
        b = to_chart(b, a.chart)
    return float(np.max(np.abs(a.matrix() - b.matrix())))


def functoriality_check(phi: MapSpec, psi: MapSpec, samples: Sequence[APoint]) -> float:
    """Max deviation between ``(psi o phi)^A`` and ``psi^A o phi^A`` over the samples."""
    if not samples:
        return 0.0
    A = samples[0].algebra
    whole = lift_map(compose(psi, phi), A)
    steps = compose_lifted(lift_map(psi, A), lift_map(phi, A))
    return max(apoint_gap(whole.apply(xi), steps.apply(xi)) for xi in samples)


# ---------------------------------------------------------------------------
# paths


def _endpoint_names(m):
    if m == 1:
        return ["a"], ["b"]
    return [f"a{i + 1}" for i in range(m)], [f"b{i + 1}" for i in range(m)]


def default_curve(m: int) -> list:
    """Straight segment ``(1-s) a + s b`` in the curve chart."""
    a, b = _endpoint_names(m)
    return [f"(1-s)*{x} + s*{y}" for x, y in zip(a, b)]


def _unwrap(M: Manifold, a, b):
    """Move ``b`` by whole periods so the straight segment is the short arc."""
    b = np.array(b, dtype=float)
    if M.periods is None:
        return b
    for i, P in enumerate(M.periods):
        if P is not None:
            d = b[i] - a[i]
            b[i] = a[i] + (d - P * math.floor(d / P + 0.5))
    return b


class FunctionalPoint:
    """``f -> f(gamma(t)) + (1-t) L_1(f) + t L_2(f)`` as a plain functional."""

    def __init__(self, base: BasePoint, manifold: Manifold, ends, t: float):
        self.base, self.manifold, self.ends, self.t = base, manifold, ends, float(t)

    def L(self, f) -> AlgebraElement:
        e1, e2 = self.ends
        return l_part(e1, f) * (1.0 - self.t) + l_part(e2, f) * self.t

    def value(self, f) -> float:
        x = make_apoint(self.manifold, self.ends[0].algebra, self.base.chart, self.base.coords)
        return base_value(x, f)

    def __call__(self, f) -> AlgebraElement:
        A = self.ends[0].algebra
        return self.L(f) + A.scalar(self.value(f))

    def leibniz_residual(self, f, g, h, lam: float) -> float:
        return leibniz_defect(self.L, self.value, f, g, h, lam)


class LiftedPath:
    """Path in ``M^A`` between two A-points over a base curve."""

    def __init__(self, start: APoint, end: APoint, curve, chart: str, binding: dict, semantics: str):
        self.start, self.end = start, end
        self.manifold, self.algebra = start.manifold, start.algebra
        self.curve = _expr_list(curve)
        self.chart = chart
        self.binding = binding
        self.semantics = semantics
        self._nil_end = None

    def base_raw(self, t: float) -> np.ndarray:
        env = dict(self.binding)
        env["s"] = float(t)
        return np.array([eval_real(e, env) for e in self.curve])

    def base(self, t: float) -> BasePoint:
        if t == 0.0:
            return self.start.base
        if t == 1.0:
            return self.end.base
        return self.manifold.locate(self.base_raw(t), self.chart)

    def _end_nil(self) -> np.ndarray:
        if self._nil_end is None:
            if self.end.chart == self.chart:
                e = self.end
            else:
                try:
                    e = to_chart(self.end, self.chart)
                except ChartDomain as exc:
                    raise ChartPathUnresolvable(
                        f"end point cannot be expressed in curve chart {self.chart!r}: {exc}"
                    ) from None
            self._nil_end = e.matrix()[:, 1:]
        return self._nil_end

    def value(self, t: float) -> APoint:
        """Coordinate semantics: interpolate nilpotent coordinate parts."""
        t = float(t)
        if t == 0.0:
            return self.start
        if t == 1.0:
            return self.end
        start = self.start if self.start.chart == self.chart else to_chart(self.start, self.chart)
        nil = (1.0 - t) * start.matrix()[:, 1:] + t * self._end_nil()
        A = self.algebra
        raw = [A.element(np.concatenate([[x], row])) for x, row in zip(self.base_raw(t), nil)]
        try:
            return resolve_apoint(self.manifold, A, self.chart, raw)
        except (ChartDomain, TargetChartUnresolved) as exc:
            raise ChartPathUnresolvable(f"curve point at t={t} lies in no chart: {exc}") from None

    def functional(self, t: float) -> FunctionalPoint:
        """The interpolated evaluation functional (not an algebra morphism in general)."""
        return FunctionalPoint(self.base(t), self.manifold, (self.start, self.end), t)

    def __call__(self, t: float):
        return self.value(t) if self.semantics == "coordinate" else self.functional(t)

    def sample(self, n: int) -> list:
        return [self.value(t) for t in np.linspace(0.0, 1.0, n)]


def lift_path(
    start: APoint,
    end: APoint,
    curve=None,
    semantics: str = "coordinate",
    chart: str | None = None,
) -> LiftedPath:
    """Lift a base curve between ``pi(start)`` and ``pi(end)``.

    The curve is a list of expressions in ``s`` (and the endpoint names
    ``a``/``b`` or ``a1..``/``b1..``), given in ``chart`` (default: the chart
    of ``start``).  Without a curve the short straight segment is used.
    """
    if semantics not in ("coordinate", "functional"):
        raise InvalidInput(f"unknown semantics {semantics!r}")
    if start.manifold.name != end.manifold.name:
        raise ManifoldMismatch("endpoints live on different manifolds")
    if start.algebra != end.algebra:
        from .errors import AlgebraMismatch

        raise AlgebraMismatch("endpoints over different algebras")
    M = start.manifold
    chart = chart or start.chart
    m = M.chart(chart).dim
    try:
        a = np.array(M.transport_coords(start.base, chart))
    except ChartDomain:
        raise ChartPathUnresolvable(f"start point is not in curve chart {chart!r}") from None
    try:
        b = np.array(M.transport_coords(end.base, chart))
    except ChartDomain:
        b = None
    names_a, names_b = _endpoint_names(m)
    if curve is None:
        if b is None:
            raise ChartPathUnresolvable(f"end point is not in curve chart {chart!r}; give an explicit curve")
        b = _unwrap(M, a, b)
        curve = default_curve(m)
    binding = dict(zip(names_a, a))
    if b is not None:
        binding.update(zip(names_b, b))
    path = LiftedPath(start, end, curve, chart, binding, semantics)
    if len(path.curve) != m:
        raise InvalidInput(f"curve needs {m} components")
    g0 = M.locate(path.base_raw(0.0), chart)
    g1 = M.locate(path.base_raw(1.0), chart)
    d0 = M.base_distance(g0, start.base, check=False)
    d1 = M.base_distance(g1, end.base, check=False)
    if d0 > ENDPOINT_TOL or d1 > ENDPOINT_TOL:
        raise EndpointMismatch(f"curve endpoints miss the base points by {d0:.3g} and {d1:.3g}")
    return path


def path_continuity(path: LiftedPath, cfg=None, n: int = 21, steps=(1e-1, 1e-2, 1e-3, 1e-4)) -> dict:
    """Fit ``C`` in ``d(path(t_j), path(s)) <= C |t_j - s|`` on sampled pairs."""
    from .metric import MetricConfig, distance

    cfg = cfg or MetricConfig()
    ratios, worst_small = [], 0.0
    for s in np.linspace(0.0, 1.0, n):
        ps = path.value(s)
        for h in steps:
            t = s + h if s + h <= 1.0 else s - h
            d = distance(path.value(t), ps, cfg)
            ratios.append(d / h)
            if h == steps[-1]:
                worst_small = max(worst_small, d)
    return {"C": float(max(ratios)), "max_distance_at_smallest_step": float(worst_small), "samples": n}


def path_leibniz(path: LiftedPath, fgh, ts) -> dict:
    """Leibniz residuals of both semantics along the path."""
    coord, func = [], []
    f, g, h, lam = fgh
    from .apoint import leibniz_residual

    for t in ts:
        coord.append(leibniz_residual(path.value(t), f, g, h, lam))
        func.append(path.functional(t).leibniz_residual(f, g, h, lam))
    return {"coordinate": max(coord), "functional": max(func)}


# ---------------------------------------------------------------------------
# homotopies


class LiftedHomotopy:
    """``H~(s, t)``: base ``H(s, t)``, nilpotent parts interpolated in ``s``."""

    def __init__(self, H, path1: LiftedPath, path2: LiftedPath, binding: dict):
        self.H = _expr_list(H)
        self.path1, self.path2 = path1, path2
        self.chart = path1.chart
        self.binding = binding
        self.manifold, self.algebra = path1.manifold, path1.algebra

    def base_raw(self, s: float, t: float) -> np.ndarray:
        env = dict(self.binding)
        env["s"], env["t"] = float(s), float(t)
        return np.array([eval_real(e, env) for e in self.H])

    def value(self, s: float, t: float) -> APoint:
        s, t = float(s), float(t)
        if s == 0.0:
            return self.path1.value(t)
        if s == 1.0:
            return self.path2.value(t)
        p1 = to_chart(self.path1.value(t), self.chart)
        p2 = to_chart(self.path2.value(t), self.chart)
        nil = (1.0 - s) * p1.matrix()[:, 1:] + s * p2.matrix()[:, 1:]
        A = self.algebra
        raw = [A.element(np.concatenate([[x], row])) for x, row in zip(self.base_raw(s, t), nil)]
        return resolve_apoint(self.manifold, A, self.chart, raw)

    def functional(self, s: float, t: float) -> FunctionalPoint:
        """``f -> f(H(s,t)) + (1-s) L_{path1(t)}(f) + s L_{path2(t)}(f)``."""
        base = self.manifold.locate(self.base_raw(s, t), self.chart)
        return FunctionalPoint(base, self.manifold, (self.path1.value(t), self.path2.value(t)), s)

    def grid_continuity(self, n: int, cfg=None) -> float:
        """Largest distance between grid neighbours on an ``n x n`` grid."""
        from .metric import MetricConfig, distance

        cfg = cfg or MetricConfig()
        g = np.linspace(0.0, 1.0, n)
        vals = [[self.value(s, t) for t in g] for s in g]
        worst = 0.0
        for i in range(n):
            for j in range(n):
                if i + 1 < n:
                    worst = max(worst, distance(vals[i][j], vals[i + 1][j], cfg))
                if j + 1 < n:
                    worst = max(worst, distance(vals[i][j], vals[i][j + 1], cfg))
        return worst


def lift_homotopy(H, path1: LiftedPath, path2: LiftedPath, checks: int = 11) -> LiftedHomotopy:
    """Lift a base homotopy ``H(s, t)`` between the base curves of two lifted paths.

    ``H`` uses variables ``s``, ``t`` and the endpoint names of ``path1``.
    """
    if path1.chart != path2.chart:
        raise InvalidInput("both paths must use the same curve chart")
    hom = LiftedHomotopy(H, path1, path2, dict(path1.binding))
    M = path1.manifold
    worst = 0.0
    for t in np.linspace(0.0, 1.0, checks):
        for s, path in ((0.0, path1), (1.0, path2)):
            worst = max(worst, M.base_distance(M.locate(hom.base_raw(s, t), hom.chart), path.base(t), check=False))
        for s in np.linspace(0.0, 1.0, checks):
            worst = max(
                worst,
                M.base_distance(M.locate(hom.base_raw(s, 0.0), hom.chart), path1.base(0.0), check=False),
                M.base_distance(M.locate(hom.base_raw(s, 1.0), hom.chart), path1.base(1.0), check=False),
            )
    if worst > ENDPOINT_TOL:
        raise EndpointMismatch(f"homotopy misses its boundary curves by {worst:.3g}")
    for a, b in ((path1.start, path2.start), (path1.end, path2.end)):
        if apoint_gap(a, b) > ENDPOINT_TOL:
            raise EndpointMismatch("lifted paths do not share their endpoints")
    return hom
