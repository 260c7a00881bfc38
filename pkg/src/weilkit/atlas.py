"""Chart-based base manifolds.

A :class:`Manifold` is an ordered set of charts, transition maps given as
expressions, an analytic base distance, and optional periods for angle
coordinates (``S1``, ``T2``).  Shifting an angle coordinate by a whole period
is itself a chart transition; :meth:`Manifold.resolve` uses such shifts and
the declared transitions to bring raw coordinates back into a chart.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ChartDomain, InvalidInput, InvalidManifold, TargetChartUnresolved, UnknownManifold
from .expr import Node, as_expr, eval_real, free_variables, parse, substitute, to_source

TWO_PI = 2.0 * math.pi
ROUNDTRIP_TOL = 1e-9

_CMP = re.compile(r"(>=|<=|>|<)")


@dataclass(frozen=True)
class Constraint:
    """``expr > 0`` (strict) or ``expr >= 0``."""

    expr: Node
    strict: bool
    text: str = ""

    def holds(self, env, slack=0.0) -> bool:
        v = eval_real(self.expr, env)
        return v > -slack if self.strict else v >= -slack

    @classmethod
    def parse(cls, text: str) -> "Constraint":
        parts = _CMP.split(text)
        if len(parts) != 3:
            raise InvalidInput(f"domain constraint needs exactly one comparison: {text!r}")
        lhs, op, rhs = parts
        left, right = parse(lhs), parse(rhs)
        if op in (">", ">="):
            g = as_expr(f"({lhs}) - ({rhs})")
        else:
            g = as_expr(f"({rhs}) - ({lhs})")
        del left, right
        return cls(g, op in (">", "<"), text.strip())

    def rename(self, mapping) -> "Constraint":
        e = substitute(self.expr, {k: as_expr(v) for k, v in mapping.items()})
        return Constraint(e, self.strict, f"{to_source(e)} {'>' if self.strict else '>='} 0")


@dataclass(frozen=True)
class Chart:
    id: str
    coordinate_names: tuple
    domain: tuple = ()
    is_boundary_chart: bool = False

    def __post_init__(self):
        if len(set(self.coordinate_names)) != len(self.coordinate_names):
            raise InvalidManifold(f"chart {self.id!r}: duplicate coordinate names")
        for c in self.domain:
            extra = free_variables(c.expr) - set(self.coordinate_names)
            if extra:
                raise InvalidManifold(f"chart {self.id!r}: domain uses unknown names {sorted(extra)}")

    @property
    def dim(self) -> int:
        return len(self.coordinate_names)

    def env(self, coords) -> dict:
        return dict(zip(self.coordinate_names, (float(c) for c in coords)))

    def contains(self, coords, slack=0.0) -> bool:
        env = self.env(coords)
        return all(c.holds(env, slack) for c in self.domain)


@dataclass(frozen=True)
class TransitionMap:
    """Coordinates of ``to_chart`` as expressions in those of ``from_chart``.

    ``where`` restricts the piece to part of the overlap; a chart pair may
    carry several pieces (e.g. the two overlap components of the circle).
    """

    from_chart: str
    to_chart: str
    components: tuple
    where: tuple = ()

    def applies(self, source: Chart, coords) -> bool:
        env = source.env(coords)
        return all(c.holds(env) for c in self.where)

    def apply(self, source: Chart, coords) -> tuple:
        env = source.env(coords)
        return tuple(eval_real(e, env) for e in self.components)


@dataclass(frozen=True)
class BasePoint:
    chart: str
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))


# ---------------------------------------------------------------------------
# base metrics


class BaseMetric:
    kind = "abstract"

    def distance(self, M: "Manifold", p: BasePoint, q: BasePoint) -> float:
        raise NotImplementedError


class EuclideanMetric(BaseMetric):
    """Euclidean distance in the coordinates of a reference chart."""

    kind = "euclidean"

    def __init__(self, reference_chart=None):
        self.reference_chart = reference_chart

    def embed(self, M, p):
        ref = self.reference_chart or next(iter(M.charts))
        return np.array(M.transport_coords(p, ref))

    def distance(self, M, p, q):
        return float(np.linalg.norm(self.embed(M, p) - self.embed(M, q)))


class CircleMetric(BaseMetric):
    """Arc length on a circle of circumference 2*pi (angle coordinate)."""

    kind = "circle"

    def distance(self, M, p, q):
        d = abs(p.coords[0] - q.coords[0]) % TWO_PI
        return min(d, TWO_PI - d)


class SphereMetric(BaseMetric):
    """Round unit sphere; chart coordinates pulled back from R^3."""

    kind = "sphere2"

    def __init__(self, ambient: dict):
        self.ambient = ambient  # chart id -> (X, Y, Z) expressions

    def embed(self, M, p):
        chart = M.charts[p.chart]
        env = chart.env(p.coords)
        return np.array([eval_real(e, env) for e in self.ambient[p.chart]])

    def distance(self, M, p, q):
        a, b = self.embed(M, p), self.embed(M, q)
        return float(math.atan2(np.linalg.norm(np.cross(a, b)), float(np.dot(a, b))))


class ProductMetric(BaseMetric):
    """l2 combination of factor distances."""

    kind = "product"

    def __init__(self, factors, chart_split):
        self.factors = factors  # list of (Manifold, slice)
        self.chart_split = chart_split  # product chart id -> tuple of factor chart ids

    def distance(self, M, p, q):
        total = 0.0
        for (F, sl), cp, cq in zip(self.factors, self.chart_split[p.chart], self.chart_split[q.chart]):
            d = F.base_distance(BasePoint(cp, p.coords[sl]), BasePoint(cq, q.coords[sl]), check=False)
            total += d * d
        return math.sqrt(total)


# ---------------------------------------------------------------------------
# manifolds


@dataclass
class Manifold:
    name: str
    charts: dict
    transitions: list
    metric: BaseMetric
    compact: bool = False
    periods: tuple | None = None
    sampler: Callable | None = field(default=None, repr=False)
    builtin: str | None = None

    def __post_init__(self):
        dims = {c.dim for c in self.charts.values()}
        if len(dims) != 1:
            raise InvalidManifold(f"{self.name}: charts disagree on dimension {sorted(dims)}")
        self.dim = dims.pop()
        if self.dim > 4:
            raise InvalidManifold(f"{self.name}: dimension {self.dim} > 4 is not supported")
        for t in self.transitions:
            if t.from_chart not in self.charts or t.to_chart not in self.charts:
                raise InvalidManifold(f"transition {t.from_chart}->{t.to_chart} names an unknown chart")
            src = self.charts[t.from_chart]
            if len(t.components) != self.dim:
                raise InvalidManifold(f"transition {t.from_chart}->{t.to_chart} has wrong arity")
            for e in t.components:
                extra = free_variables(e) - set(src.coordinate_names)
                if extra:
                    raise InvalidManifold(
                        f"transition {t.from_chart}->{t.to_chart} uses unknown names {sorted(extra)}"
                    )
        pairs = {(t.from_chart, t.to_chart) for t in self.transitions}
        for a, b in pairs:
            if (b, a) not in pairs:
                raise InvalidManifold(f"transition {a}->{b} has no declared inverse {b}->{a}")
        if self.periods is not None and len(self.periods) != self.dim:
            raise InvalidManifold("periods must have one entry per coordinate")

    # -- queries -------------------------------------------------------
    def chart(self, chart_id) -> Chart:
        try:
            return self.charts[chart_id]
        except KeyError:
            raise ChartDomain(f"{self.name} has no chart {chart_id!r}", chart=chart_id) from None

    @property
    def chart_ids(self) -> list:
        return list(self.charts)

    def transition_pieces(self, a, b) -> list:
        return [t for t in self.transitions if t.from_chart == a and t.to_chart == b]

    def transition_for(self, a, b, coords) -> TransitionMap:
        src = self.chart(a)
        for t in self.transition_pieces(a, b):
            if t.applies(src, coords):
                return t
        raise ChartDomain(f"no transition {a}->{b} applies at {tuple(coords)}", chart=a)

    def point(self, chart_id, coords) -> BasePoint:
        """Validated base point."""
        chart = self.chart(chart_id)
        coords = tuple(float(c) for c in coords)
        if len(coords) != chart.dim:
            raise ChartDomain(f"chart {chart_id!r} expects {chart.dim} coordinates")
        if not chart.contains(coords):
            raise ChartDomain(f"{coords} violates the domain of chart {chart_id!r}", chart=chart_id)
        return BasePoint(chart_id, coords)

    def check_point(self, p: BasePoint) -> None:
        self.point(p.chart, p.coords)

    def period_shift(self, chart_id, coords):
        """Shift angle coordinates by whole periods into ``chart_id``; None if impossible."""
        if self.periods is None:
            return None
        chart = self.chart(chart_id)
        coords = np.asarray(coords, dtype=float)
        options = []
        for x, P in zip(coords, self.periods):
            if P is None:
                options.append((0.0,))
            else:
                n0 = -math.floor(x / P)
                options.append(tuple(P * n for n in (n0, n0 - 1, n0 + 1, n0 - 2, n0 + 2)))
        for shift in itertools.product(*options):
            s = np.array(shift)
            if chart.contains(coords + s):
                return s
        return None

    def resolve(self, chart_id, coords):
        """Find a chart containing raw ``coords`` (given w.r.t. ``chart_id``).

        Returns ``(chart_id', move)`` with ``move`` None (already inside), a
        numpy shift vector (period shift), or a :class:`TransitionMap`
        possibly followed by a shift: ``(TransitionMap, shift-or-None)``.
        """
        chart = self.chart(chart_id)
        if chart.contains(coords):
            return chart_id, None
        s = self.period_shift(chart_id, coords)
        if s is not None:
            return chart_id, s
        for other in self.charts:
            if other == chart_id:
                continue
            for t in self.transition_pieces(chart_id, other):
                try:
                    if not t.applies(chart, coords):
                        continue
                    new = t.apply(chart, coords)
                except Exception:
                    continue
                if self.charts[other].contains(new):
                    return other, (t, None)
                s = self.period_shift(other, new)
                if s is not None:
                    return other, (t, s)
        raise TargetChartUnresolved(
            f"coordinates {tuple(coords)} of chart {chart_id!r} lie in no chart of {self.name}",
            chart=chart_id,
        )

    def locate(self, coords, chart_id=None) -> BasePoint:
        """Base point from raw coordinates, resolved into a valid chart."""
        chart_id = chart_id or next(iter(self.charts))
        target, move = self.resolve(chart_id, coords)
        coords = np.asarray(coords, dtype=float)
        if move is None:
            return BasePoint(target, coords)
        if isinstance(move, np.ndarray):
            return BasePoint(target, coords + move)
        t, s = move
        new = np.array(t.apply(self.chart(chart_id), coords))
        return BasePoint(target, new if s is None else new + s)

    def transport_coords(self, p: BasePoint, chart_id) -> tuple:
        """Coordinates of ``p`` in ``chart_id`` (real-valued transition)."""
        if p.chart == chart_id:
            return p.coords
        s = None
        t = self.transition_for(p.chart, chart_id, p.coords)
        new = t.apply(self.chart(p.chart), p.coords)
        if not self.chart(chart_id).contains(new):
            s = self.period_shift(chart_id, new)
            if s is None:
                raise ChartDomain(f"{p} does not map into chart {chart_id!r}")
            new = tuple(np.asarray(new) + s)
        return tuple(new)

    def base_distance(self, p: BasePoint, q: BasePoint, check=True) -> float:
        if check:
            self.check_point(p)
            self.check_point(q)
        return self.metric.distance(self, p, q)

    def sample(self, n: int, rng: np.random.Generator) -> list:
        """``n`` random base points (builtin-specific distribution)."""
        if self.sampler is not None:
            return self.sampler(self, n, rng)
        return _box_sampler(self, n, rng)

    def roundtrip_error(self, samples: Sequence[BasePoint]) -> float:
        """Max ``|back(fwd(x)) - x|`` over samples and applicable transitions."""
        worst = 0.0
        for p in samples:
            src = self.chart(p.chart)
            for t in self.transitions:
                if t.from_chart != p.chart or not t.applies(src, p.coords):
                    continue
                fwd = t.apply(src, p.coords)
                dst = self.chart(t.to_chart)
                if not dst.contains(fwd):
                    continue
                back = self.transition_for(t.to_chart, t.from_chart, fwd).apply(dst, fwd)
                diff = np.asarray(back) - np.asarray(p.coords)
                if self.periods is not None:
                    for i, P in enumerate(self.periods):
                        if P:
                            diff[i] = (diff[i] + P / 2) % P - P / 2
                worst = max(worst, float(np.max(np.abs(diff))))
        return worst

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dim,
            "compact": self.compact,
            "metric": self.metric.kind,
            "charts": [
                {
                    "id": c.id,
                    "coords": list(c.coordinate_names),
                    "domain": [d.text for d in c.domain],
                    "boundary": c.is_boundary_chart,
                }
                for c in self.charts.values()
            ],
            "transitions": [
                {
                    "from": t.from_chart,
                    "to": t.to_chart,
                    "components": [to_source(e) for e in t.components],
                    "where": [w.text for w in t.where],
                }
                for t in self.transitions
            ],
        }


def _box_sampler(M, n, rng, lo=-1.0, hi=1.0):
    chart = next(iter(M.charts.values()))
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 1000 * max(n, 1):
            raise InvalidManifold(f"could not sample points in chart {chart.id!r}")
        x = rng.uniform(lo, hi, size=chart.dim)
        if chart.contains(x):
            out.append(BasePoint(chart.id, x))
    return out


def make_chart(id, coords, domain=(), boundary=False) -> Chart:
    cons = tuple(Constraint.parse(d) if isinstance(d, str) else d for d in domain)
    return Chart(id, tuple(coords), cons, boundary)


def make_transition(src, dst, components, where=()) -> TransitionMap:
    return TransitionMap(
        src,
        dst,
        tuple(as_expr(c) for c in components),
        tuple(Constraint.parse(w) if isinstance(w, str) else w for w in where),
    )


# ---------------------------------------------------------------------------
# builtins


def _euclid_names(m):
    if m <= 3:
        return ("x", "y", "z")[:m]
    return tuple(f"x{i + 1}" for i in range(m))


def euclidean_space(m: int) -> Manifold:
    if not 1 <= m <= 4:
        raise UnknownManifold(f"R^{m}: dimension must be 1..4")
    chart = make_chart("U", _euclid_names(m))
    return Manifold(f"R^{m}", {"U": chart}, [], EuclideanMetric("U"), compact=False, builtin=f"R^{m}")


def _circle_sampler(M, n, rng):
    return [M.locate([t]) for t in rng.uniform(0.0, TWO_PI, size=n)]


def circle() -> Manifold:
    U = make_chart("U", ["t"], ["t > -pi", "t < pi"])
    V = make_chart("V", ["t"], ["t > 0", "t < 2*pi"])
    transitions = [
        make_transition("U", "V", ["t"], ["t > 0"]),
        make_transition("U", "V", ["t + 2*pi"], ["t < 0"]),
        make_transition("V", "U", ["t"], ["t < pi"]),
        make_transition("V", "U", ["t - 2*pi"], ["t > pi"]),
    ]
    return Manifold(
        "S1", {"U": U, "V": V}, transitions, CircleMetric(), compact=True,
        periods=(TWO_PI,), sampler=_circle_sampler, builtin="S1",
    )


def _sphere_sampler(M, n, rng):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return [sphere_point_from_ambient(M, x) for x in v]


def sphere_point_from_ambient(M, xyz) -> BasePoint:
    X, Y, Z = (float(c) for c in xyz)
    if Z < 0.5:
        return BasePoint("N", (X / (1.0 - Z), Y / (1.0 - Z)))
    return BasePoint("S", (X / (1.0 + Z), Y / (1.0 + Z)))


def sphere() -> Manifold:
    # N: projection from the north pole (covers S2 minus N); S: from the south pole
    N = make_chart("N", ["u", "v"])
    S = make_chart("S", ["p", "q"])
    transitions = [
        make_transition("N", "S", ["u/(u^2 + v^2)", "v/(u^2 + v^2)"], ["u^2 + v^2 > 0"]),
        make_transition("S", "N", ["p/(p^2 + q^2)", "q/(p^2 + q^2)"], ["p^2 + q^2 > 0"]),
    ]
    ambient = {
        "N": tuple(as_expr(s) for s in ("2*u/(1 + u^2 + v^2)", "2*v/(1 + u^2 + v^2)", "(u^2 + v^2 - 1)/(1 + u^2 + v^2)")),
        "S": tuple(as_expr(s) for s in ("2*p/(1 + p^2 + q^2)", "2*q/(1 + p^2 + q^2)", "(1 - p^2 - q^2)/(1 + p^2 + q^2)")),
    }
    return Manifold(
        "S2", {"N": N, "S": S}, transitions, SphereMetric(ambient), compact=True,
        sampler=_sphere_sampler, builtin="S2",
    )


def _halfplane_sampler(M, n, rng):
    x = rng.uniform(0.0, 1.0, size=n)
    y = rng.uniform(-1.0, 1.0, size=n)
    return [BasePoint("H", (a, b)) for a, b in zip(x, y)]


def halfplane() -> Manifold:
    H = make_chart("H", ["x", "y"], ["x >= 0"], boundary=True)
    return Manifold(
        "halfplane", {"H": H}, [], EuclideanMetric("H"), compact=False,
        sampler=_halfplane_sampler, builtin="halfplane",
    )


def product(M: Manifold, N: Manifold, name=None) -> Manifold:
    """``M x N`` with product charts, product transitions and l2 distance."""
    names_m = list(next(iter(M.charts.values())).coordinate_names)
    names_n = list(next(iter(N.charts.values())).coordinate_names)

    def renamer(chart_names, other_names, suffix):
        return {c: (f"{c}{suffix}" if c in other_names else c) for c in chart_names}

    charts = {}
    split = {}
    ren = {}
    for a, b in itertools.product(M.charts.values(), N.charts.values()):
        ra = renamer(a.coordinate_names, _all_names(N), "1")
        rb = renamer(b.coordinate_names, _all_names(M), "2")
        cid = f"{a.id}x{b.id}"
        coords = [ra[c] for c in a.coordinate_names] + [rb[c] for c in b.coordinate_names]
        dom = tuple(c.rename(ra) for c in a.domain) + tuple(c.rename(rb) for c in b.domain)
        charts[cid] = Chart(cid, tuple(coords), dom, a.is_boundary_chart or b.is_boundary_chart)
        split[cid] = (a.id, b.id)
        ren[cid] = (ra, rb)

    def pieces(F, a, b):
        if a == b:
            ch = F.charts[a]
            return [TransitionMap(a, a, tuple(as_expr(c) for c in ch.coordinate_names), ())]
        return F.transition_pieces(a, b)

    transitions = []
    for src, dst in itertools.permutations(charts, 2):
        (a1, b1), (a2, b2) = split[src], split[dst]
        ra, rb = ren[src]
        for t1 in pieces(M, a1, a2):
            for t2 in pieces(N, b1, b2):
                sub_a = {k: as_expr(v) for k, v in ra.items()}
                sub_b = {k: as_expr(v) for k, v in rb.items()}
                comps = tuple(substitute(e, sub_a) for e in t1.components) + tuple(
                    substitute(e, sub_b) for e in t2.components
                )
                where = tuple(c.rename(ra) for c in t1.where) + tuple(c.rename(rb) for c in t2.where)
                transitions.append(TransitionMap(src, dst, comps, where))
    # drop chart pairs whose only transition is the identity on both factors
    transitions = [t for t in transitions if t.from_chart != t.to_chart]
    m = M.dim
    metric = ProductMetric([(M, slice(0, m)), (N, slice(m, m + N.dim))], split)
    periods = None
    if M.periods is not None or N.periods is not None:
        periods = tuple(M.periods or (None,) * M.dim) + tuple(N.periods or (None,) * N.dim)

    def sampler(P, n, rng):
        left = M.sample(n, rng)
        right = N.sample(n, rng)
        return [BasePoint(f"{p.chart}x{q.chart}", p.coords + q.coords) for p, q in zip(left, right)]

    return Manifold(
        name or f"{M.name}x{N.name}", charts, transitions, metric,
        compact=M.compact and N.compact, periods=periods, sampler=sampler,
    )


def _all_names(M):
    return {n for c in M.charts.values() for n in c.coordinate_names}


def torus() -> Manifold:
    T = product(circle(), circle(), name="T2")
    T.builtin = "T2"
    return T


_BUILTIN_RE = re.compile(r"R\^?(\d)")


def builtin(name: str) -> Manifold:
    """One of ``R^m`` (m <= 4), ``S1``, ``T2``, ``S2`` (alias ``CP1``), ``halfplane``."""
    key = name.strip()
    m = _BUILTIN_RE.fullmatch(key)
    if m:
        return euclidean_space(int(m.group(1)))
    if key == "S1":
        return circle()
    if key == "T2":
        return torus()
    if key in ("S2", "CP1"):
        M = sphere()
        if key == "CP1":
            M.name = "CP1"
        return M
    if key == "halfplane":
        return halfplane()
    if key == "cylinder":
        C = product(circle(), euclidean_space(1), name="cylinder")
        C.builtin = "cylinder"
        return C
    raise UnknownManifold(f"unknown builtin manifold {name!r}", name=name)


def base_distance(M: Manifold, p: BasePoint, q: BasePoint) -> float:
    return M.base_distance(p, q)
