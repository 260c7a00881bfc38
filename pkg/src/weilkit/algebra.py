"""Finite Weil algebras presented as polynomial quotients by monomial ideals.

A Weil algebra here is ``R[X_1..X_n] / I`` with ``I`` generated by monomials.
The standard monomials (those divisible by no generator of ``I``) form a
basis; they are ordered by total degree and then lexicographically, so the
unit is always basis element 0 and ``coeffs[0]`` is the real part.

    >>> A = build_algebra(["e"], ["e^3"])
    >>> [A.monomial_name(m) for m in A.basis]
    ['1', 'e', 'e^2']
    >>> x = A.element([1, 2, 3])
    >>> (x * x).coeffs.tolist()
    [1.0, 4.0, 10.0]
"""

from __future__ import annotations

import math
import re
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import AlgebraMismatch, DimensionGuard, InvalidInput, NonNilpotent, NotNilpotent

MAX_DIM = 64

Monomial = tuple  # exponent vector, one non-negative int per generator

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def degree(m: Monomial) -> int:
    return sum(m)


def divides(a: Monomial, b: Monomial) -> bool:
    return all(x <= y for x, y in zip(a, b))


class WeilAlgebra:
    """Immutable monomial-quotient Weil algebra.

    Build instances with :func:`build_algebra` or :func:`tensor_product`.
    """

    def __init__(self, generator_names, ideal_generators, *, max_dim=MAX_DIM):
        names = tuple(generator_names)
        if len(set(names)) != len(names):
            raise InvalidInput(f"duplicate generator names: {names}")
        n = len(names)
        ideal = []
        for g in ideal_generators:
            g = tuple(int(v) for v in g)
            if len(g) != n or any(v < 0 for v in g):
                raise InvalidInput(f"bad ideal generator exponents {g}")
            if degree(g) == 0:
                raise InvalidInput("the unit monomial cannot lie in the ideal")
            ideal.append(g)
        # keep a minimal generating set, canonical order
        ideal = sorted(set(ideal), key=_basis_key)
        ideal = [g for g in ideal if not any(h != g and divides(h, g) for h in ideal)]
        for i in range(n):
            if not any(g[i] > 0 and degree(g) == g[i] for g in ideal):
                raise NonNilpotent(
                    f"generator {names[i]!r} has no pure power in the ideal; basis is infinite",
                    generator=names[i],
                )
        self.generator_names = names
        self.ideal_generators = tuple(ideal)
        self.basis = _enumerate_basis(n, self.ideal_generators, max_dim)
        self.dim = len(self.basis)
        self.k = max(degree(m) for m in self.basis)
        self._index = {m: i for i, m in enumerate(self.basis)}
        table = np.full((self.dim, self.dim), -1, dtype=np.int64)
        for i, a in enumerate(self.basis):
            for j, b in enumerate(self.basis):
                prod = tuple(x + y for x, y in zip(a, b))
                table[i, j] = self._index.get(prod, -1)
        table.setflags(write=False)
        self.mul_table = table
        I, J = np.nonzero(table >= 0)
        self._I, self._J, self._K = I, J, table[I, J]

    # -- basis helpers -------------------------------------------------
    def index(self, m: Monomial) -> int:
        """Basis position of ``m``; -1 if ``m`` reduces to zero."""
        return self._index.get(tuple(m), -1)

    def monomial_name(self, m: Monomial) -> str:
        parts = []
        for name, e in zip(self.generator_names, m):
            if e == 1:
                parts.append(name)
            elif e > 1:
                parts.append(f"{name}^{e}")
        return "*".join(parts) if parts else "1"

    @cached_property
    def basis_names(self) -> tuple:
        return tuple(self.monomial_name(m) for m in self.basis)

    @cached_property
    def basis_degrees(self) -> np.ndarray:
        return np.array([degree(m) for m in self.basis])

    def parse_monomial(self, text: str) -> Monomial:
        return parse_monomial(text, self.generator_names)

    # -- elements ------------------------------------------------------
    def element(self, coeffs) -> "AlgebraElement":
        return AlgebraElement(self, coeffs)

    def zero(self) -> "AlgebraElement":
        return AlgebraElement(self, np.zeros(self.dim))

    def one(self) -> "AlgebraElement":
        return self.scalar(1.0)

    def scalar(self, c: float) -> "AlgebraElement":
        v = np.zeros(self.dim)
        v[0] = c
        return AlgebraElement(self, v)

    def gen(self, name: str) -> "AlgebraElement":
        """The generator ``name`` as an element (zero if it lies in the ideal)."""
        i = self.generator_names.index(name)
        m = tuple(1 if j == i else 0 for j in range(len(self.generator_names)))
        return self.basis_element(m)

    def basis_element(self, m: Monomial) -> "AlgebraElement":
        v = np.zeros(self.dim)
        idx = self.index(m)
        if idx >= 0:
            v[idx] = 1.0
        return AlgebraElement(self, v)

    def from_dict(self, mapping) -> "AlgebraElement":
        """Element from ``{"1": a0, "e": a1, ...}``; keys are monomial names."""
        v = np.zeros(self.dim)
        for key, val in mapping.items():
            m = self.parse_monomial(key)
            idx = self.index(m)
            if idx < 0:
                raise InvalidInput(f"monomial {key!r} is zero in this algebra")
            v[idx] += float(val)
        return AlgebraElement(self, v)

    def mul_coeffs(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.bincount(self._K, weights=a[self._I] * b[self._J], minlength=self.dim)

    @property
    def nilpotent_square_zero(self) -> bool:
        """True when the maximal ideal squares to zero."""
        return self.k <= 1

    # -- identity ------------------------------------------------------
    def _key(self):
        return (self.generator_names, self.ideal_generators)

    def __eq__(self, other):
        return isinstance(other, WeilAlgebra) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        rel = ", ".join(self.monomial_name(g) for g in self.ideal_generators)
        gens = ",".join(self.generator_names)
        return f"WeilAlgebra(R[{gens}]/({rel}), dim={self.dim}, k={self.k})"

    def to_dict(self) -> dict:
        return {
            "generators": list(self.generator_names),
            "relations": [self.monomial_name(g) for g in self.ideal_generators],
            "basis": list(self.basis_names),
            "k": self.k,
            "dim": self.dim,
        }


def _basis_key(m: Monomial):
    return (degree(m), tuple(-e for e in m))


def _enumerate_basis(n, ideal, max_dim):
    # standard monomials form an order ideal: grow from 1 by multiplying generators
    unit = (0,) * n
    seen = {unit}
    frontier = [unit]
    while frontier:
        nxt = []
        for m in frontier:
            for i in range(n):
                c = m[:i] + (m[i] + 1,) + m[i + 1 :]
                if c in seen or any(divides(g, c) for g in ideal):
                    continue
                seen.add(c)
                nxt.append(c)
                if len(seen) > max_dim:
                    raise DimensionGuard(
                        f"algebra dimension exceeds guard {max_dim}", limit=max_dim
                    )
        frontier = nxt
    return tuple(sorted(seen, key=_basis_key))


def parse_monomial(text: str, generator_names: Sequence[str]) -> Monomial:
    """Parse ``"1"``, ``"e"``, ``"e^2"`` or products such as ``"e1*e2^2"``."""
    text = text.strip()
    exps = [0] * len(generator_names)
    if text == "1":
        return tuple(exps)
    for factor in text.split("*"):
        factor = factor.strip()
        name, _, power = factor.partition("^")
        name = name.strip()
        if not _IDENT.fullmatch(name):
            raise InvalidInput(f"bad monomial factor {factor!r} in {text!r}")
        if name not in generator_names:
            raise InvalidInput(f"unknown generator {name!r} in {text!r}")
        p = 1
        if power:
            try:
                p = int(power)
            except ValueError:
                raise InvalidInput(f"bad exponent in {factor!r}") from None
            if p < 0:
                raise InvalidInput(f"negative exponent in {factor!r}")
        exps[generator_names.index(name)] += p
    return tuple(exps)


def build_algebra(generator_names: Sequence[str], ideal_generators: Iterable, *, max_dim=MAX_DIM) -> WeilAlgebra:
    """Build ``R[generators]/(ideal)``.

    ``ideal_generators`` may be exponent tuples or relation strings such as
    ``"e1^2"`` or ``"e1*e2"``.
    """
    names = list(generator_names)
    gens = []
    for g in ideal_generators:
        if isinstance(g, str):
            gens.append(parse_monomial(g, names))
        else:
            gens.append(tuple(g))
    return WeilAlgebra(names, gens, max_dim=max_dim)


def truncated(names: Sequence[str], order: int, *, max_dim=MAX_DIM) -> WeilAlgebra:
    """``R[names]`` modulo all monomials of total degree ``order + 1``."""
    n = len(names)
    gens = [m for m in _monomials_of_degree(n, order + 1)]
    return WeilAlgebra(list(names), gens, max_dim=max_dim)


def _monomials_of_degree(n, d):
    if n == 0:
        return
    if n == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _monomials_of_degree(n - 1, d - first):
            yield (first,) + rest


def dual_numbers(name="e", order=1) -> WeilAlgebra:
    """``R[name]/(name^(order+1))``."""
    return build_algebra([name], [f"{name}^{order + 1}"])


def real_algebra() -> WeilAlgebra:
    """The trivial Weil algebra R."""
    return WeilAlgebra([], [])


def tensor_product(A: WeilAlgebra, B: WeilAlgebra, *, max_dim=MAX_DIM) -> WeilAlgebra:
    """``A (x) B``: union of generators (B renamed on collision) and of ideals."""
    names_a = list(A.generator_names)
    names_b = []
    taken = set(names_a)
    for name in B.generator_names:
        new, i = name, 2
        while new in taken:
            new = f"{name}_{i}"
            i += 1
        taken.add(new)
        names_b.append(new)
    na, nb = len(names_a), len(names_b)
    ideal = [g + (0,) * nb for g in A.ideal_generators]
    ideal += [(0,) * na + g for g in B.ideal_generators]
    if A.dim * B.dim > max_dim:
        raise DimensionGuard(f"tensor product dimension {A.dim * B.dim} exceeds guard {max_dim}", limit=max_dim)
    return WeilAlgebra(names_a + names_b, ideal, max_dim=max_dim)


class AlgebraElement:
    """Coefficient vector over the basis of a :class:`WeilAlgebra`."""

    __slots__ = ("algebra", "coeffs")
    __array_priority__ = 1000

    def __init__(self, algebra: WeilAlgebra, coeffs):
        c = np.array(coeffs, dtype=float)
        if c.shape != (algebra.dim,):
            raise InvalidInput(f"expected {algebra.dim} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        self.algebra = algebra
        self.coeffs = c

    @property
    def real_part(self) -> float:
        return float(self.coeffs[0])

    @property
    def nilpotent_part(self) -> "AlgebraElement":
        c = self.coeffs.copy()
        c[0] = 0.0
        return AlgebraElement(self.algebra, c)

    def _check(self, other):
        if isinstance(other, AlgebraElement):
            if other.algebra is not self.algebra and other.algebra != self.algebra:
                raise AlgebraMismatch(f"{self.algebra!r} vs {other.algebra!r}")
            return other.coeffs
        return None

    def __add__(self, other):
        c = self._check(other)
        if c is None:
            out = self.coeffs.copy()
            out[0] += float(other)
            return AlgebraElement(self.algebra, out)
        return AlgebraElement(self.algebra, self.coeffs + c)

    __radd__ = __add__

    def __neg__(self):
        return AlgebraElement(self.algebra, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        c = self._check(other)
        if c is None:
            return AlgebraElement(self.algebra, self.coeffs * float(other))
        return AlgebraElement(self.algebra, self.algebra.mul_coeffs(self.coeffs, c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, AlgebraElement):
            return self * other.reciprocal()
        return AlgebraElement(self.algebra, self.coeffs / float(other))

    def __pow__(self, n: int):
        n = int(n)
        if n < 0:
            return self.reciprocal() ** (-n)
        result = self.algebra.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def reciprocal(self) -> "AlgebraElement":
        a0 = self.real_part
        if a0 == 0.0:
            from .errors import DivisionByZero

            raise DivisionByZero("reciprocal of an element with zero real part")
        # 1/(a0 + n) = sum_j (-1)^j n^j / a0^(j+1)
        coeffs = [(-1.0) ** j / a0 ** (j + 1) for j in range(self.algebra.k + 1)]
        return taylor_apply(self, coeffs)

    def __eq__(self, other):
        c = self._check(other) if isinstance(other, AlgebraElement) else None
        return c is not None and bool(np.array_equal(self.coeffs, c))

    __hash__ = None

    def allclose(self, other, atol=1e-12) -> bool:
        return bool(np.allclose(self.coeffs, self._check(other), rtol=0.0, atol=atol))

    def to_dict(self) -> dict:
        return {name: float(c) for name, c in zip(self.algebra.basis_names, self.coeffs)}

    def __repr__(self):
        terms = [
            f"{c:g}" if name == "1" else f"{c:g}*{name}"
            for name, c in zip(self.algebra.basis_names, self.coeffs)
            if c != 0.0
        ]
        return "AlgebraElement(" + (" + ".join(terms) or "0") + ")"


def mul(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    return a * b


def nilpotent_power(a: AlgebraElement, j: int) -> AlgebraElement:
    """``a**j`` for nilpotent ``a``; zero once ``j`` exceeds the nilpotency index."""
    if a.real_part != 0.0:
        raise NotNilpotent(f"real part {a.real_part} is nonzero")
    if j < 0:
        raise InvalidInput("power must be non-negative")
    if j > a.algebra.k:
        return a.algebra.zero()
    return a**j


def taylor_apply(a: AlgebraElement, coeffs: Sequence[float]) -> AlgebraElement:
    """Evaluate ``sum_j coeffs[j] * n**j`` with ``n`` the nilpotent part of ``a``.

    ``coeffs[j]`` should be ``g^(j)(a0)/j!``; terms past the nilpotency index
    vanish so only ``k + 1`` of them are used.
    """
    A = a.algebra
    top = min(A.k, len(coeffs) - 1)
    n = a.coeffs.copy()
    n[0] = 0.0
    acc = np.zeros(A.dim)
    acc[0] = coeffs[top]
    # Horner in n
    for j in range(top - 1, -1, -1):
        acc = A.mul_coeffs(acc, n)
        acc[0] += coeffs[j]
    return AlgebraElement(A, acc)


def factorial_multi(alpha) -> int:
    return math.prod(math.factorial(a) for a in alpha)
