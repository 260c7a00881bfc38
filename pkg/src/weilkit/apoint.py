"""Infinitely near points as A-valued chart coordinates.

An :class:`APoint` over a chart stores ``acoords[i] = xi(phi_i)``, one algebra
element per coordinate function.  Its action on any other function ``f`` is
the jet evaluation of ``f`` at those coordinates, so ``xi(f) = f(x) 1_A +
L_xi(f)`` with ``x`` the real parts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .algebra import AlgebraElement, WeilAlgebra
from .atlas import BasePoint, Manifold
from .errors import AlgebraMismatch, ChartDomain, InvalidInput
from .expr import Node, as_expr, eval_jet, eval_real, free_variables


@dataclass(frozen=True, eq=False)
class APoint:
    manifold: Manifold
    algebra: WeilAlgebra
    chart: str
    acoords: tuple

    def __post_init__(self):
        chart = self.manifold.chart(self.chart)
        acoords = tuple(self.acoords)
        if len(acoords) != chart.dim:
            raise InvalidInput(f"chart {self.chart!r} needs {chart.dim} A-coordinates, got {len(acoords)}")
        for a in acoords:
            if not isinstance(a, AlgebraElement):
                raise InvalidInput("A-coordinates must be AlgebraElement instances")
            if a.algebra != self.algebra:
                raise AlgebraMismatch(f"coordinate in {a.algebra!r}, point algebra {self.algebra!r}")
        object.__setattr__(self, "acoords", acoords)
        base = tuple(a.real_part for a in acoords)
        if not chart.contains(base):
            raise ChartDomain(f"base {base} violates the domain of chart {self.chart!r}", chart=self.chart)

    @property
    def base(self) -> BasePoint:
        return BasePoint(self.chart, tuple(a.real_part for a in self.acoords))

    @property
    def coordinate_names(self) -> tuple:
        return self.manifold.chart(self.chart).coordinate_names

    def env(self) -> dict:
        return dict(zip(self.coordinate_names, self.acoords))

    def nilpotent_parts(self) -> tuple:
        return tuple(a.nilpotent_part for a in self.acoords)

    def matrix(self) -> np.ndarray:
        return np.array([a.coeffs for a in self.acoords])

    def is_zero_section(self) -> bool:
        return not np.any(self.matrix()[:, 1:])

    def allclose(self, other: "APoint", atol=1e-12) -> bool:
        if other.chart != self.chart:
            from .lifting import to_chart

            other = to_chart(other, self.chart)
        return bool(np.allclose(self.matrix(), other.matrix(), rtol=0.0, atol=atol))

    def __repr__(self):
        parts = ", ".join(repr(a) for a in self.acoords)
        return f"APoint({self.manifold.name}, chart={self.chart}, [{parts}])"


def make_apoint(M: Manifold, A: WeilAlgebra, chart: str, values: Sequence) -> APoint:
    """APoint from per-coordinate values: elements, coefficient lists, dicts or reals."""
    acoords = []
    for v in values:
        if isinstance(v, AlgebraElement):
            acoords.append(v)
        elif isinstance(v, Mapping):
            acoords.append(A.from_dict(v))
        elif np.ndim(v) == 0:
            acoords.append(A.scalar(float(v)))
        else:
            acoords.append(A.element(v))
    return APoint(M, A, chart, tuple(acoords))


def project(xi: APoint) -> BasePoint:
    """Base point (real parts of the A-coordinates)."""
    return xi.base


def zero_section(M: Manifold, A: WeilAlgebra, x: BasePoint) -> APoint:
    M.check_point(x)
    return APoint(M, A, x.chart, tuple(A.scalar(c) for c in x.coords))


def _expr_for_chart(f, xi: APoint):
    """The expression of ``f`` usable in ``xi``'s chart, transporting ``xi`` if needed.

    ``f`` is an expression (or source text) or a mapping chart id -> expression.
    Returns ``(expr, point)``.
    """
    if isinstance(f, Mapping):
        if xi.chart in f:
            return as_expr(f[xi.chart]), xi
        from .lifting import to_chart

        for cid, e in f.items():
            try:
                return as_expr(e), to_chart(xi, cid)
            except ChartDomain:
                continue
        raise ChartDomain(f"function has no expression reachable from chart {xi.chart!r}")
    e = as_expr(f)
    names = free_variables(e)
    if names <= set(xi.coordinate_names):
        return e, xi
    from .lifting import to_chart

    for cid, chart in xi.manifold.charts.items():
        if cid != xi.chart and names <= set(chart.coordinate_names):
            try:
                return e, to_chart(xi, cid)
            except ChartDomain:
                continue
    raise ChartDomain(f"variables {sorted(names)} are not coordinates reachable from chart {xi.chart!r}")


def evaluate(xi: APoint, f) -> AlgebraElement:
    """``xi(f)``: jet evaluation of ``f`` at the A-coordinates."""
    e, p = _expr_for_chart(f, xi)
    return eval_jet(e, p.env(), p.algebra)


def base_value(xi: APoint, f) -> float:
    e, p = _expr_for_chart(f, xi)
    return eval_real(e, dict(zip(p.coordinate_names, p.base.coords)))


def l_part(xi: APoint, f) -> AlgebraElement:
    """``L_xi(f) = xi(f) - f(x) 1_A``; the real part is exactly zero."""
    v = evaluate(xi, f)
    c = v.coeffs.copy()
    c[0] = 0.0
    return AlgebraElement(xi.algebra, c)


def leibniz_defect(L, value, f, g, h, lam: float) -> float:
    """Max-coefficient norm of ``L(fg + lam h) - [L(f)g(x) + f(x)L(g) + L(f)L(g) + lam L(h)]``.

    ``L`` maps an expression to its nilpotent part, ``value`` to its real value
    at the base point.  Shared by genuine points and functional path points.
    """
    f, g, h = as_expr(f), as_expr(g), as_expr(h)
    from .expr import BinOp, Const

    combo = BinOp("+", BinOp("*", f, g), BinOp("*", Const(float(lam)), h))
    Lf, Lg = L(f), L(g)
    rhs = Lf * value(g) + Lg * value(f) + Lf * Lg + L(h) * float(lam)
    return float(np.max(np.abs((L(combo) - rhs).coeffs)))


def leibniz_residual(xi: APoint, f, g, h, lam: float) -> float:
    return leibniz_defect(lambda e: l_part(xi, e), lambda e: base_value(xi, e), f, g, h, lam)


def to_real_coords(xi: APoint) -> np.ndarray:
    """``m x l`` matrix ``x_ij``; column 0 is the base point."""
    return xi.matrix()


def from_real_coords(M: Manifold, A: WeilAlgebra, chart: str, matrix) -> APoint:
    mat = np.asarray(matrix, dtype=float)
    if mat.shape != (M.chart(chart).dim, A.dim):
        raise InvalidInput(f"expected a {M.chart(chart).dim}x{A.dim} matrix, got {mat.shape}")
    return APoint(M, A, chart, tuple(A.element(row) for row in mat))


def real_coordinate_names(xi_or_chart_names, A: WeilAlgebra) -> list:
    """Flattened names ``coord`` / ``coord.monomial`` in row-major (i outer) order."""
    names = xi_or_chart_names
    if isinstance(names, APoint):
        names = names.coordinate_names
    out = []
    for c in names:
        for b in A.basis_names:
            out.append(c if b == "1" else f"{c}.{b}")
    return out
