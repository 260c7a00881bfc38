import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from weilkit.algebra import dual_numbers, truncated
from weilkit.apoint import evaluate, leibniz_residual, make_apoint, project, zero_section
from weilkit.atlas import builtin
from weilkit.dynamics import reflection, rotation
from weilkit.errors import ChartDomain, EndpointMismatch
from weilkit.lifting import (
    MapSpec,
    apoint_gap,
    compose,
    functoriality_check,
    lift_homotopy,
    lift_map,
    lift_path,
    path_continuity,
    prolong_transition,
    to_chart,
)
from weilkit.metric import MetricConfig, distance
from weilkit.verify import squaring_plane

A1 = dual_numbers()
A2 = dual_numbers(order=2)
S1 = builtin("S1")
R2 = builtin("R^2")


def circle_point(theta, v, chart="U"):
    return make_apoint(S1, A1, chart, [[theta, v]])


def test_transition_example_symbolic():
    # oracle: expand (x0 + x1 e + x2 e^2)^2 and y + x symbolically mod e^3
    M = squaring_plane()
    (T,) = M.transition_pieces("U", "V")
    x0, x1, x2, y0, y1, y2, e = sp.symbols("x0 x1 x2 y0 y1 y2 e")
    X = x0 + x1 * e + x2 * e**2
    Y = y0 + y1 * e + y2 * e**2
    U = sp.Poly(sp.expand(X**2), e)
    V = sp.Poly(sp.expand(Y + X), e)
    vals = {x0: 1.5, x1: -0.3, x2: 0.7, y0: 0.2, y1: 1.1, y2: -2.0}
    xi = make_apoint(M, A2, "U", [[1.5, -0.3, 0.7], [0.2, 1.1, -2.0]])
    out = prolong_transition(xi, T).matrix()
    for row, poly in zip(out, (U, V)):
        want = [float(poly.coeff_monomial(e**j).subs(vals)) for j in range(3)]
        assert np.allclose(row, want)


def test_transition_numeric_instance():
    M = squaring_plane()
    (T,) = M.transition_pieces("U", "V")
    xi = make_apoint(M, A2, "U", [[1, 2, 3], [0, 1, 1]])
    out = prolong_transition(xi, T).matrix()
    assert out.tolist() == [[1, 4, 10], [1, 3, 4]]


def test_transition_composition_roundtrip():
    rng = np.random.default_rng(0)
    for name in ["S1", "S2", "T2"]:
        M = builtin(name)
        A = truncated(["a"], 2)
        for x in M.sample(100, rng):
            xi = make_apoint(M, A, x.chart, [[c, *rng.uniform(-1, 1, 2)] for c in x.coords])
            for cid in M.charts:
                try:
                    there = to_chart(xi, cid)
                except ChartDomain:
                    continue
                assert apoint_gap(to_chart(there, xi.chart), xi) <= 1e-10


def test_identity_map_lifts_to_identity():
    ident = MapSpec.build(R2, R2, ["x", "y"])
    xi = make_apoint(R2, A2, "U", [[0.3, 1, 2], [-0.4, 0.5, 0.1]])
    assert apoint_gap(lift_map(ident, A2)(xi), xi) == 0


def test_rotation_lift():
    rot = lift_map(rotation(0.5).forward, A1)
    out = rot(circle_point(1.0, 0.7))
    assert out.matrix()[0].tolist() == pytest.approx([1.5, 0.7])


def test_reflection_lift():
    ref = lift_map(reflection().forward, A1)
    out = ref(circle_point(1.0, 0.7))
    assert out.matrix()[0].tolist() == pytest.approx([-1.0, -0.7])


def test_rotations_compose():
    a, b = 0.4, 1.9
    spec = compose(rotation(b).forward, rotation(a).forward)
    xi = circle_point(0.3, 0.2)
    want = lift_map(rotation(a + b).forward, A1)(xi)
    assert apoint_gap(lift_map(spec, A1)(xi), want) <= 1e-12
    ident = MapSpec.build(R2, R2, ["x", "y"])
    assert functoriality_check(ident, ident, [make_apoint(R2, A2, "U", [[0, 1, 0], [1, 0, 1]])]) == 0


POLYS = [
    (["x^2 - y", "x*y + 1"], ["y^3 + x", "2*x - y^2"]),
    (["x + y^2", "x^3"], ["x*y", "x - y + x^2*y"]),
]


@pytest.mark.parametrize("phi,psi", POLYS)
def test_functoriality_against_symbolic_jets(phi, psi):
    # oracle: compose symbolically, substitute jets, truncate at e^3
    x, y, e = sp.symbols("x y e")
    phi_s = [sp.sympify(p.replace("^", "**")) for p in phi]
    psi_s = [sp.sympify(p.replace("^", "**")) for p in psi]
    comp = [p.subs({x: phi_s[0], y: phi_s[1]}, simultaneous=True) for p in psi_s]
    rng = np.random.default_rng(1)
    f, g = MapSpec.build(R2, R2, phi), MapSpec.build(R2, R2, psi)
    lifted = lift_map(f, A2), lift_map(g, A2)
    for _ in range(20):
        cx, cy = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        xi = make_apoint(R2, A2, "U", [cx, cy])
        got = lifted[1](lifted[0](xi)).matrix()
        jx = sum(float(c) * e**j for j, c in enumerate(cx))
        jy = sum(float(c) * e**j for j, c in enumerate(cy))
        for row, c in zip(got, comp):
            poly = sp.Poly(sp.expand(c.subs({x: jx, y: jy}, simultaneous=True)), e)
            want = [float(poly.coeff_monomial(e**j)) for j in range(3)]
            assert np.allclose(row, want, atol=1e-10)
        assert functoriality_check(f, g, [xi]) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 2 * math.pi))
def test_projection_commutes_with_lift(theta, v, w, alpha):
    A = dual_numbers(order=2)
    x = S1.locate([theta % (2 * math.pi)])
    xi = make_apoint(S1, A, x.chart, [[x.coords[0], v, w]])
    for phi in (rotation(alpha), reflection()):
        img = lift_map(phi.forward, A)(xi)
        expected = phi.forward.apply_base(project(xi))
        assert S1.base_distance(project(img), expected) <= 1e-12


def test_rotation_is_an_isometry():
    rng = np.random.default_rng(2)
    cfg = MetricConfig()
    box = MetricConfig(mode="box")
    rot = lift_map(rotation(1.234).forward, A1)
    for _ in range(100):
        a = circle_point(rng.uniform(-3, 3), rng.normal())
        b = circle_point(rng.uniform(-3, 3), rng.normal())
        assert distance(rot(a), rot(b), cfg) == pytest.approx(distance(a, b, cfg), abs=1e-10)
        c = circle_point(a.base.coords[0], rng.normal())
        assert distance(rot(a), rot(c), box) == pytest.approx(distance(a, c, box), abs=1e-10)


def test_path_endpoints_and_midpoint():
    R1 = builtin("R^1")
    e1 = make_apoint(R1, A1, "U", [[0.4, 0.0]])
    e2 = make_apoint(R1, A1, "U", [[0.4, 2.0]])
    p = lift_path(e1, e2)
    assert p.value(0) is e1 and p.value(1) is e2
    assert p.value(0.5).matrix().tolist() == [[0.4, 1.0]]
    f = lift_path(e1, e2, semantics="functional")
    for t, end in ((0.0, e1), (1.0, e2)):
        for g in ("x", "sin(x)", "x^3"):
            assert np.allclose(f.functional(t)(g).coeffs, evaluate(end, g).coeffs)


def test_path_endpoint_mismatch():
    a = make_apoint(R2, A1, "U", [[0, 1], [0, 0]])
    b = make_apoint(R2, A1, "U", [[1, 0], [1, 0]])
    with pytest.raises(EndpointMismatch):
        lift_path(a, b, ["s", "s + 1"])


def test_cross_fiber_circle_path_takes_short_arc():
    a = circle_point(3.0, 1.0)
    b = circle_point(-3.0, -1.0)
    p = lift_path(a, b)
    mid = p.value(0.5)
    assert S1.base_distance(mid.base, S1.locate([math.pi])) <= 1e-12
    assert mid.matrix()[0, 1] == pytest.approx(0.0)
    cert = path_continuity(p)
    assert cert["max_distance_at_smallest_step"] < 1e-3


def test_coordinate_paths_satisfy_leibniz():
    A = truncated(["a", "b"], 2)
    rng = np.random.default_rng(3)
    a = make_apoint(R2, A, "U", rng.uniform(-1, 1, (2, A.dim)))
    b = make_apoint(R2, A, "U", rng.uniform(-1, 1, (2, A.dim)))
    p = lift_path(a, b)
    for t in np.linspace(0, 1, 11):
        assert leibniz_residual(p.value(t), "sin(x)", "x*y", "exp(y)", 1.3) <= 1e-10


def test_functional_semantics_first_order_same_fiber():
    # for square-zero ideals on a common fiber the two readings agree
    a = make_apoint(R2, A1, "U", [[0.3, 1.0], [0.2, -1.0]])
    b = make_apoint(R2, A1, "U", [[0.3, 0.5], [0.2, 2.0]])
    p = lift_path(a, b, semantics="functional")
    for t in (0.25, 0.5, 0.75):
        assert p.functional(t).leibniz_residual("sin(x)", "y^2", "x", 0.5) <= 1e-12
        assert np.allclose(p.functional(t)("x*y").coeffs, evaluate(p.value(t), "x*y").coeffs)


def test_functional_semantics_breaks_leibniz_across_fibers():
    # f = g = x: (1-t) 2 x1 v1 + t 2 x2 v2 differs from 2 x(t) ((1-t) v1 + t v2)
    R1 = builtin("R^1")
    a = make_apoint(R1, A1, "U", [[0.0, 1.0]])
    b = make_apoint(R1, A1, "U", [[1.0, 0.0]])
    fp = lift_path(a, b, semantics="functional").functional(0.5)
    assert fp.leibniz_residual("x", "x", "x", 0.0) == pytest.approx(0.5)


def test_homotopy_boundaries_and_refinement():
    A = A1
    a = make_apoint(R2, A, "U", [[0, 1], [0, 0]])
    b = make_apoint(R2, A, "U", [[1, 0], [1, 2]])
    p1 = lift_path(a, b)
    p2 = lift_path(a, b, ["a1 + s*(b1 - a1)", "a2 + s^2*(b2 - a2)"])
    H = ["a1 + t*(b1 - a1)", "a2 + (t + s*(t^2 - t))*(b2 - a2)"]
    hom = lift_homotopy(H, p1, p2)
    for t in np.linspace(0, 1, 5):
        assert apoint_gap(hom.value(0, t), p1.value(t)) == 0
        assert apoint_gap(hom.value(1, t), p2.value(t)) == 0
    jumps = [hom.grid_continuity(n) for n in (5, 9, 17)]
    assert jumps[0] > jumps[1] > jumps[2]
    const = lift_homotopy(["a1 + t*(b1 - a1)", "a2 + t*(b2 - a2)"], p1, p1)
    for t in np.linspace(0, 1, 5):
        assert apoint_gap(const.value(0.3, t), p1.value(t)) <= 1e-15


def test_homotopy_boundary_mismatch():
    a = make_apoint(R2, A1, "U", [[0, 1], [0, 0]])
    b = make_apoint(R2, A1, "U", [[1, 0], [1, 2]])
    p1 = lift_path(a, b)
    with pytest.raises(EndpointMismatch):
        lift_homotopy(["t", "t + s"], p1, p1)


def test_zero_section_path_stays_on_section():
    z1 = zero_section(S1, A1, S1.locate([0.5]))
    z2 = zero_section(S1, A1, S1.locate([2.0]))
    p = lift_path(z1, z2)
    assert all(q.is_zero_section() for q in p.sample(9))
