import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weilkit.algebra import dual_numbers, truncated
from weilkit.apoint import l_part, make_apoint, zero_section
from weilkit.atlas import BasePoint, builtin
from weilkit.errors import BoxTooLarge, FiberMismatch, InvalidConfig, WeightMismatch
from weilkit.metric import (
    MetricConfig,
    Probe,
    WeightVector,
    _pair_sup,
    convergence_check,
    default_probes,
    distance,
    distance_report,
    probe_bounds,
    sup_term_box,
    sup_term_probe,
    weighted_norm,
)

R1 = builtin("R^1")
S1 = builtin("S1")
A1 = dual_numbers()
A2 = dual_numbers(order=2)
BOX = MetricConfig(mode="box")


def test_weighted_norm_examples():
    assert weighted_norm(A1.element([2, 3]), MetricConfig()) == 5
    assert weighted_norm(A2.one(), MetricConfig()) == 1
    fac = MetricConfig(weights=WeightVector("factorial"))
    assert weighted_norm(A2.element([0, 1, 1]), fac) == 1.5


def test_weight_errors():
    with pytest.raises(WeightMismatch):
        weighted_norm(A2.one(), MetricConfig(weights=WeightVector("explicit", (1.0,))))
    with pytest.raises(InvalidConfig):
        WeightVector("explicit", (1.0, -1.0))


def box_oracle(a, b, k, steps=21):
    # dense grid over the coefficient box, independent of vertex enumeration
    A = a.algebra
    na, nb = a.acoords[0].nilpotent_part, b.acoords[0].nilpotent_part
    rows = []
    for j in range(1, k + 1):
        rows.append(((na**j) - (nb**j)).coeffs[1:] / math.factorial(j))
    best = 0.0
    for c in itertools.product(np.linspace(-1, 1, steps), repeat=k):
        best = max(best, float(np.sum(np.abs(np.array(c) @ np.array(rows)))))
    del A
    return best


def test_box_examples():
    x = make_apoint(R1, A1, "U", [[0.3, 2.0]])
    x0 = make_apoint(R1, A1, "U", [[0.3, 0.0]])
    assert sup_term_box(x, x, BOX).value == 0
    r = sup_term_box(x, x0, BOX)
    assert r.value == 2 and abs(r.attained_at["vertex"][0]) == 1
    a = make_apoint(R1, A2, "U", [[0.3, 1.0, 0.0]])
    b = make_apoint(R1, A2, "U", [[0.3, 0.0, 1.0]])
    got = sup_term_box(a, b, BOX).value
    # the vertex c = (1, -1) gives |1| + |-1 - 1/2| = 2.5
    assert got == pytest.approx(2.5)
    assert got == pytest.approx(box_oracle(a, b, 2))


def test_box_distance_and_errors():
    x = make_apoint(R1, A1, "U", [[0.3, 2.0]])
    x0 = make_apoint(R1, A1, "U", [[0.3, 0.0]])
    assert distance(x, x0, BOX) == 2
    with pytest.raises(FiberMismatch):
        distance(x, make_apoint(R1, A1, "U", [[0.4, 2.0]]), BOX)


def test_box_too_large_k3():
    R4 = builtin("R^4")
    A = dual_numbers(order=3)
    p = make_apoint(R4, A, "U", [[0, 1, 0, 0]] * 4)
    with pytest.raises(BoxTooLarge):
        sup_term_box(p, p, BOX)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.sampled_from(["l1", "l2", "linf"]))
def test_box_matches_grid_oracle(c, norm):
    a = make_apoint(R1, A2, "U", [[0.1, c[0], c[1]]])
    b = make_apoint(R1, A2, "U", [[0.1, c[2], c[3]]])
    cfg = MetricConfig(mode="box", ideal_norm=norm)
    got = sup_term_box(a, b, cfg).value
    na, nb = a.acoords[0].nilpotent_part, b.acoords[0].nilpotent_part
    U = np.array([(na - nb).coeffs[1:], ((na * na) - (nb * nb)).coeffs[1:] / 2])
    ords = {"l1": 1, "l2": 2, "linf": np.inf}
    grid = np.linspace(-1, 1, 41)
    want = max(np.linalg.norm(np.array([s, t]) @ U, ords[norm]) for s in grid for t in grid)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.sampled_from(["l1", "l2", "linf"]),
)
def test_pair_sup_against_angle_sampling(p, q, norm):
    p, q = np.array(p), np.array(q)
    ords = {"l1": 1, "l2": 2, "linf": np.inf}
    betas = np.linspace(0, 2 * math.pi, 20001)[:, None]
    sampled = np.linalg.norm(np.cos(betas) * p + np.sin(betas) * q, ords[norm], axis=1).max()
    exact = _pair_sup(p, q, norm)
    assert exact >= sampled - 1e-9
    assert exact <= sampled * (1 + 1e-6) + 1e-9


def test_zero_section_circle_distance():
    a = zero_section(S1, A1, S1.locate([0.0]))
    b = zero_section(S1, A1, S1.locate([1.0]))
    rep = distance_report(a, b)
    assert rep["base"] == pytest.approx(1.0) and rep["sup"] == 0
    assert distance(a, a) == 0


def test_default_probes_shapes():
    ps = default_probes(R1, "U", 2)
    assert len(ps) == 2 and all(not p.is_pair for p in ps)
    assert max(probe_bounds(R1, ps, 2)) <= 1 + 1e-6
    ps = default_probes(S1, "U", 1)
    assert len(ps) == 1 and ps[0].is_pair
    assert set(ps[0].funcs) == {"cos(t)", "sin(t)"}


@pytest.mark.parametrize("name,k", [("R^2", 2), ("S1", 3), ("T2", 2), ("S2", 1), ("halfplane", 2)])
def test_default_probes_in_unit_ball(name, k):
    M = builtin(name)
    ps = default_probes(M, None, k)
    assert max(probe_bounds(M, ps, k)) <= 1 + 1e-6


def test_probe_separation():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = make_apoint(R1, A2, "U", [[0.2, *rng.normal(size=2)]])
        b = make_apoint(R1, A2, "U", [[0.2, *rng.normal(size=2)]])
        assert sup_term_probe(a, b, MetricConfig()).value > 1e-12


AT = truncated(["a", "b"], 2)
R2 = builtin("R^2")


@st.composite
def plane_points(draw):
    rows = [draw(st.lists(st.floats(-1, 1), min_size=AT.dim, max_size=AT.dim)) for _ in range(2)]
    return make_apoint(R2, AT, "U", rows)


@settings(max_examples=100, deadline=None)
@given(plane_points(), plane_points(), plane_points())
def test_probe_metric_axioms(p, q, r):
    cfg = MetricConfig()
    dpq = distance(p, q, cfg)
    assert dpq == distance(q, p, cfg)
    assert distance(p, r, cfg) <= dpq + distance(q, r, cfg) + 1e-9
    assert distance(p, p, cfg) == 0
    assert R2.base_distance(p.base, q.base) <= dpq


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.sampled_from(["l1", "l2", "linf"]))
def test_box_dominates_probes(c, norm):
    a = make_apoint(R1, A2, "U", [[0.4, c[0], c[1]]])
    b = make_apoint(R1, A2, "U", [[0.4, c[2], c[3]]])
    probe = sup_term_probe(a, b, MetricConfig(ideal_norm=norm)).value
    box = sup_term_box(a, b, MetricConfig(mode="box", ideal_norm=norm)).value
    assert probe <= box + 1e-12


def test_convergence_examples():
    limit = make_apoint(R1, A1, "U", [[0.5, 0.0]])
    seq = [make_apoint(R1, A1, "U", [[0.5, 1.0 / n]]) for n in range(1, 200)]
    rep = convergence_check(seq, limit)
    assert rep["monotone"] and rep["final_distance"] < 1e-2
    rep = convergence_check([limit] * 5, limit)
    assert rep["distances"] == [0.0] * 5 and rep["converged"]
    # bases converging on the circle, jets converging too
    lim = make_apoint(S1, A2, "U", [[1.0, 0.5, -0.25]])
    seq = [make_apoint(S1, A2, "U", [[1.0 + 1 / n**3, 0.5 + 1 / n**3, -0.25]]) for n in range(1, 200)]
    rep = convergence_check(seq, lim)
    assert rep["monotone"] and rep["converged"]


def test_factorial_weights_bracket_explicit():
    # oscillating probes: weighted sup terms lie between 1/k! and 1 times the unweighted
    A = dual_numbers(order=3)
    a = make_apoint(R1, A, "U", [[0.3, 0.7, -0.2, 0.4]])
    b = make_apoint(R1, A, "U", [[0.3, 0.0, 0.0, 0.0]])
    fac = MetricConfig(weights=WeightVector("factorial"))
    ones = MetricConfig()
    prev = 0.0
    for n in range(1, 11):
        f = f"sin({n * n}*x)"
        d = l_part(a, f) - l_part(b, f)
        wf, wo = weighted_norm(d, fac), weighted_norm(d, ones)
        assert wo / math.factorial(3) - 1e-12 <= wf <= wo + 1e-12
        derivs = sum(n ** (2 * j) for j in range(1, 4))
        assert derivs > prev
        prev = derivs


def test_norm_equivalence_sample():
    rng = np.random.default_rng(1)
    A = dual_numbers(order=3)
    fac = MetricConfig(weights=WeightVector("factorial"))
    ratios = []
    for _ in range(300):
        a = make_apoint(R1, A, "U", [[rng.uniform(-1, 1), *rng.normal(size=3)]])
        b = make_apoint(R1, A, "U", [[rng.uniform(-1, 1), *rng.normal(size=3)]])
        d = distance(a, b)
        if d > 0:
            ratios.append(distance(a, b, fac) / d)
    assert 1 / 6 - 1e-12 <= min(ratios) and max(ratios) <= 1 + 1e-12


def test_custom_probes():
    cfg = MetricConfig(probes=(Probe.single("x/2"),))
    a = make_apoint(R1, A1, "U", [[0.0, 1.0]])
    b = make_apoint(R1, A1, "U", [[0.0, 0.0]])
    assert distance(a, b, cfg) == 0.5
