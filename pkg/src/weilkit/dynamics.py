"""Orbits and fixed points of lifted diffeomorphisms, and map-group topologies."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import WeilAlgebra
from .apoint import APoint
from .atlas import Manifold
from .errors import ChartDomain, InvalidConfig, InvalidInput
from .expr import as_expr, eval_real
from .lifting import LiftedMap, MapSpec, apoint_gap, lift_map, resolve_apoint
from .metric import MetricConfig, distance

DEFAULT_TOL = 1e-8
MAX_GRID = 10**6
MAX_ITER = 10**6


@dataclass(frozen=True, eq=False)
class DiffeoPair:
    """A diffeomorphism and (optionally) its inverse, both chartwise."""

    forward: MapSpec
    inverse: MapSpec | None = None

    @property
    def manifold(self) -> Manifold:
        return self.forward.source

    @classmethod
    def from_json(cls, M: Manifold, forward: dict, inverse: dict | None = None) -> "DiffeoPair":
        def build(spec):
            return MapSpec.build(M, M, spec["components"], spec.get("chart"), spec.get("target_chart"))

        return cls(build(forward), build(inverse) if inverse else None)

    def inverse_pair(self) -> "DiffeoPair":
        if self.inverse is None:
            raise InvalidInput("diffeomorphism has no declared inverse")
        return DiffeoPair(self.inverse, self.forward)

    def check_inverse(self, samples) -> float:
        """Max base distance of ``forward(inverse(x))`` from ``x``."""
        if self.inverse is None:
            return 0.0
        M = self.manifold
        worst = 0.0
        for x in samples:
            worst = max(worst, M.base_distance(self.forward.apply_base(self.inverse.apply_base(x)), x, check=False))
            worst = max(worst, M.base_distance(self.inverse.apply_base(self.forward.apply_base(x)), x, check=False))
        return worst


def lifted(phi: DiffeoPair, A: WeilAlgebra) -> LiftedMap:
    return lift_map(phi.forward, A)


def lifted_inverse(phi: DiffeoPair, A: WeilAlgebra) -> LiftedMap:
    return lift_map(phi.inverse_pair().forward, A)


# ---------------------------------------------------------------------------
# orbits


@dataclass
class OrbitRecord:
    initial: APoint
    iterates: list
    distances: list
    verdict: str
    period: int | None
    tol: float

    def to_json(self) -> dict:
        return {
            "steps": len(self.distances),
            "distances": self.distances,
            "verdict": self.verdict,
            "period": self.period,
            "tol": self.tol,
            "iterates": [x.matrix().tolist() for x in self.iterates],
            "charts": [x.chart for x in self.iterates],
        }


def iterate(phi: DiffeoPair, A: WeilAlgebra, xi0: APoint, n: int, tol: float = DEFAULT_TOL, cfg=None) -> OrbitRecord:
    """Iterate ``phi^A`` from ``xi0``; stops early at a fixed point or a period."""
    if not 0 <= n <= MAX_ITER:
        raise InvalidConfig(f"iteration count must be in 0..{MAX_ITER}")
    cfg = cfg or MetricConfig()
    F = lifted(phi, A)
    pts, dists = [xi0], []
    for step in range(1, n + 1):
        nxt = F.apply(pts[-1])
        d = distance(nxt, pts[-1], cfg)
        pts.append(nxt)
        dists.append(d)
        if step == 1 and d < tol:
            return OrbitRecord(xi0, pts, dists, "fixed", 1, tol)
        if step > 1 and distance(nxt, xi0, cfg) < tol:
            return OrbitRecord(xi0, pts, dists, "periodic", step, tol)
    return OrbitRecord(xi0, pts, dists, "wandering", None, tol)


# ---------------------------------------------------------------------------
# fixed-point scans


def _axis_values(spec) -> np.ndarray:
    if len(spec) != 3:
        raise InvalidConfig("grid axis is [lo, hi, count]")
    lo, hi, n = spec
    lo = eval_real(as_expr(lo), {}) if isinstance(lo, str) else float(lo)
    hi = eval_real(as_expr(hi), {}) if isinstance(hi, str) else float(hi)
    n = int(n)
    if n < 1:
        raise InvalidConfig("grid axis needs at least one point")
    return np.linspace(lo, hi, n)


@dataclass
class GridSpec:
    """Uniform grid over the real coordinates ``coord`` / ``coord.monomial`` of one chart.

    Axes not named in ``axes`` are held at 0 (nilpotent) or rejected (base).
    Unknown axis names are matched by position.
    """

    chart: str
    names: list
    values: list
    slots: list
    periods: list

    @classmethod
    def build(cls, M: Manifold, A: WeilAlgebra, axes: dict, chart: str | None = None) -> "GridSpec":
        from .apoint import real_coordinate_names

        chart = chart or next(iter(M.charts))
        coords = list(M.chart(chart).coordinate_names)
        flat = real_coordinate_names(coords, A)
        names, values, slots, periods = [], [], [], []
        for pos, (name, spec) in enumerate(axes.items()):
            if name in flat:
                slot = flat.index(name)
            else:
                # positional: base coordinates first, then nilpotent coefficients
                order = [i * A.dim for i in range(len(coords))] + [
                    i * A.dim + j for i in range(len(coords)) for j in range(1, A.dim)
                ]
                if pos >= len(order):
                    raise InvalidConfig(f"grid axis {name!r} does not match a coordinate")
                slot = order[pos]
            names.append(name)
            values.append(_axis_values(spec))
            slots.append(slot)
            i, j = divmod(slot, A.dim)
            P = M.periods[i] if (M.periods and j == 0) else None
            periods.append(P)
        base_slots = {i * A.dim for i in range(len(coords))}
        if not base_slots <= set(slots):
            raise InvalidConfig("grid must cover every base coordinate")
        total = int(np.prod([len(v) for v in values]))
        if total > MAX_GRID:
            raise InvalidConfig(f"grid has {total} cells > {MAX_GRID}")
        return cls(chart, names, values, slots, periods)

    @property
    def shape(self):
        return tuple(len(v) for v in self.values)

    def wraps(self, axis: int) -> bool:
        """Whether the axis covers a full period (first and last point coincide or are adjacent)."""
        P, v = self.periods[axis], self.values[axis]
        if P is None or len(v) < 2:
            return False
        step = v[1] - v[0]
        return abs((v[-1] - v[0]) - P) <= 1.5 * abs(step) or abs((v[-1] - v[0] + step) - P) <= 1e-9

    def to_json(self) -> dict:
        return {
            "chart": self.chart,
            "axes": {n: [float(v[0]), float(v[-1]), len(v)] for n, v in zip(self.names, self.values)},
        }


@dataclass
class FixScanReport:
    grid: GridSpec
    tol: float
    fixed: list = field(default_factory=list)  # (grid index, APoint, gap)
    clusters: list = field(default_factory=list)
    scanned: int = 0

    @property
    def base_projections(self) -> list:
        return [p.base for _, p, _ in self.fixed]

    def to_json(self) -> dict:
        return {
            "grid": self.grid.to_json(),
            "tol": self.tol,
            "scanned": self.scanned,
            "fixed_count": len(self.fixed),
            "fixed": [
                {"index": list(idx), "chart": p.chart, "coords": p.matrix().tolist(), "gap": g} for idx, p, g in self.fixed
            ],
            "clusters": self.clusters,
        }


def _cluster(report: FixScanReport, radius: int = 2) -> list:
    grid = report.grid
    shape = grid.shape
    idxs = [idx for idx, _, _ in report.fixed]
    parent = list(range(len(idxs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    where = {idx: i for i, idx in enumerate(idxs)}
    wraps = [grid.wraps(ax) for ax in range(len(shape))]
    offsets = list(itertools.product(range(-radius, radius + 1), repeat=len(shape)))
    for i, idx in enumerate(idxs):
        for off in offsets:
            nb = []
            for ax, (x, o) in enumerate(zip(idx, off)):
                y = x + o
                if wraps[ax]:
                    # the last point of a full-period axis may duplicate the first
                    y %= shape[ax]
                elif not 0 <= y < shape[ax]:
                    break
                nb.append(y)
            else:
                j = where.get(tuple(nb))
                if j is not None:
                    parent[find(i)] = find(j)
    if any(wraps):
        # identify the duplicated endpoint of full-period axes
        for i, idx in enumerate(idxs):
            for ax, w in enumerate(wraps):
                if w and idx[ax] == shape[ax] - 1:
                    for o in range(-radius, radius + 1):
                        twin = list(idx)
                        twin[ax] = o % shape[ax]
                        j = where.get(tuple(twin))
                        if j is not None:
                            parent[find(i)] = find(j)
    groups: dict = {}
    for i in range(len(idxs)):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in sorted(groups.values(), key=lambda m: idxs[m[0]]):
        best = min(members, key=lambda i: (report.fixed[i][2], idxs[i]))
        idx, p, gap = report.fixed[best]
        out.append(
            {
                "size": len(members),
                "representative": [float(grid.values[a][k]) for a, k in enumerate(idx)],
                "chart": p.chart,
                "base": list(p.base.coords),
                "gap": gap,
            }
        )
    return out


def fixed_scan(phi: DiffeoPair, A: WeilAlgebra, grid: GridSpec | dict, tol: float = DEFAULT_TOL, cfg=None) -> FixScanReport:
    """All grid A-points with ``d(phi^A xi, xi) < tol``, plus clusters.

    The distance dominates the base distance, so fibers whose base point
    moves by at least ``tol`` are skipped without lifting.
    """
    M = phi.manifold
    cfg = cfg or MetricConfig()
    if isinstance(grid, dict):
        grid = GridSpec.build(M, A, grid)
    F = lifted(phi, A)
    m = M.chart(grid.chart).dim
    report = FixScanReport(grid, tol)
    base_axes = [a for a, s in enumerate(grid.slots) if s % A.dim == 0]
    nil_axes = [a for a in range(len(grid.slots)) if a not in base_axes]
    for base_idx in itertools.product(*(range(len(grid.values[a])) for a in base_axes)):
        raw = np.zeros(m)
        for a, k in zip(base_axes, base_idx):
            raw[grid.slots[a] // A.dim] = grid.values[a][k]
        try:
            x = M.locate(raw, grid.chart)
            moved = M.base_distance(phi.forward.apply_base(x), x, check=False)
        except ChartDomain:
            continue
        n_fiber = int(np.prod([len(grid.values[a]) for a in nil_axes])) if nil_axes else 1
        report.scanned += n_fiber
        if moved >= tol:
            continue
        for nil_idx in itertools.product(*(range(len(grid.values[a])) for a in nil_axes)):
            mat = np.zeros((m, A.dim))
            mat[:, 0] = raw
            idx = [0] * len(grid.slots)
            for a, k in zip(base_axes, base_idx):
                idx[a] = k
            for a, k in zip(nil_axes, nil_idx):
                i, j = divmod(grid.slots[a], A.dim)
                mat[i, j] = grid.values[a][k]
                idx[a] = k
            xi = resolve_apoint(M, A, grid.chart, [A.element(r) for r in mat])
            gap = distance(F.apply(xi), xi, cfg)
            if gap < tol:
                report.fixed.append((tuple(idx), xi, gap))
    report.clusters = _cluster(report)
    return report


def converse_check(phi: DiffeoPair, report: FixScanReport) -> float:
    """Largest ``d_g(phi(x), x)`` over base projections of reported fixed points."""
    M = phi.manifold
    return max(
        (M.base_distance(phi.forward.apply_base(x), x, check=False) for x in report.base_projections),
        default=0.0,
    )


# ---------------------------------------------------------------------------
# map-group topologies


def c0_distance(phi: DiffeoPair, psi: DiffeoPair, samples: int | Sequence = 1000, seed: int = 0) -> float:
    """Sampled ``max(sup d(phi x, psi x), sup d(phi^-1 x, psi^-1 x))``.

    The inverse term is included when both maps declare an inverse.
    """
    M = phi.manifold
    if isinstance(samples, int):
        if samples < 100:
            raise InvalidConfig("C0 distance needs at least 100 samples")
        pts = M.sample(samples, np.random.default_rng(seed))
    else:
        pts = list(samples)
    pairs = [(phi.forward, psi.forward)]
    if phi.inverse is not None and psi.inverse is not None:
        pairs.append((phi.inverse, psi.inverse))
    worst = 0.0
    for f, g in pairs:
        for x in pts:
            worst = max(worst, M.base_distance(f.apply_base(x), g.apply_base(x), check=False))
    return worst


def pointwise_gap(phi: DiffeoPair, psi: DiffeoPair, A: WeilAlgebra, samples: Sequence[APoint], cfg=None) -> float:
    """``max_xi max(d(phi^A xi, psi^A xi), d((phi^A)^-1 xi, (psi^A)^-1 xi))``."""
    if not samples:
        raise InvalidInput("pointwise gap needs at least one sample")
    cfg = cfg or MetricConfig()
    maps = [(lifted(phi, A), lifted(psi, A))]
    if phi.inverse is not None and psi.inverse is not None:
        maps.append((lifted_inverse(phi, A), lifted_inverse(psi, A)))
    worst = 0.0
    for F, G in maps:
        for xi in samples:
            worst = max(worst, distance(F.apply(xi), G.apply(xi), cfg))
    return worst


def inverse_lift_check(phi: DiffeoPair, A: WeilAlgebra, samples: Sequence[APoint]) -> float:
    """``(phi^A)^-1 = (phi^-1)^A``: max gap of ``phi^A((phi^-1)^A xi)`` from ``xi``."""
    F, G = lifted(phi, A), lifted_inverse(phi, A)
    return max(
        max(apoint_gap(xi, F.apply(G.apply(xi))), apoint_gap(xi, G.apply(F.apply(xi)))) for xi in samples
    )


def continuity_probe(
    sequence: Sequence[DiffeoPair],
    limit: DiffeoPair,
    A: WeilAlgebra,
    samples: Sequence[APoint],
    cfg=None,
    c0_samples: int = 200,
    seed: int = 0,
) -> dict:
    """Table of (C0 distance, pointwise gap) along a sequence of maps."""
    cfg = cfg or MetricConfig()
    rows = []
    for i, phi in enumerate(sequence, start=1):
        rows.append(
            {
                "i": i,
                "c0": c0_distance(phi, limit, c0_samples, seed),
                "gap": pointwise_gap(phi, limit, A, samples, cfg),
            }
        )
    c0 = np.array([r["c0"] for r in rows])
    gaps = np.array([r["gap"] for r in rows])
    monotone = bool(np.all(np.diff(gaps) <= 1e-12))
    c0_to_zero = bool(len(c0) and c0[-1] <= c0.max() / max(len(c0) / 2, 1))
    converging = bool(monotone and len(gaps) and gaps[-1] <= 10 * c0[-1] + 1e-12)
    return {
        "rows": rows,
        "monotone": monotone,
        "c0_to_zero": c0_to_zero,
        "verdict": "converging" if converging else "not_converging",
        "samples": len(samples),
        "note": "checked on the listed samples only, not on all of the bundle",
    }


def rotation(alpha: float, M: Manifold | None = None) -> DiffeoPair:
    """Rotation of the circle by ``alpha`` (both angle charts)."""
    from .atlas import circle

    M = M or circle()
    comps = lambda a: {cid: [f"t + {a!r}"] for cid in M.charts}  # noqa: E731
    return DiffeoPair(MapSpec.build(M, M, comps(float(alpha))), MapSpec.build(M, M, comps(-float(alpha))))


def reflection(M: Manifold | None = None) -> DiffeoPair:
    """``t -> -t`` on the circle."""
    from .atlas import circle

    M = M or circle()
    comps = {cid: ["-t"] for cid in M.charts}
    return DiffeoPair(MapSpec.build(M, M, comps), MapSpec.build(M, M, comps))


def bump_diffeo(delta: float = 0.25, lo: float = 0.5, hi: float = 2.5, M: Manifold | None = None) -> DiffeoPair:
    """``t -> t + delta * b(t)`` with a flat bump ``b`` supported in ``[lo, hi]``.

    It is the identity on the complementary open arc.  No closed-form inverse.
    """
    from .atlas import circle

    M = M or circle()
    bump = f"exp(2)*flat(t - {lo!r})*flat({hi!r} - t)"
    comps = {cid: [f"t + {float(delta)!r}*{bump}"] for cid in M.charts}
    return DiffeoPair(MapSpec.build(M, M, comps), None)
