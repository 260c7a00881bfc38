import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weilkit.algebra import build_algebra, dual_numbers, real_algebra, tensor_product
from weilkit.apoint import make_apoint, project, zero_section
from weilkit.atlas import builtin
from weilkit.errors import InvalidComplex, InvalidInput, NoTriangulation
from weilkit.lifting import apoint_gap
from weilkit.topology import (
    SimplicialComplex,
    betti,
    bundle_cohomology_check,
    catalog_complex,
    cone,
    connectivity_witness,
    rank,
    retract,
    retraction_check,
    sphere_loop_nullhomotopy,
)


def test_catalog_betti():
    assert betti(catalog_complex("S1")) == [1, 1]
    assert betti(catalog_complex("S2")) == [1, 0, 1]
    assert betti(catalog_complex("T2")) == [1, 2, 1]


def test_catalog_euler_characteristics():
    assert catalog_complex("S1").euler_characteristic() == 0
    assert catalog_complex("S2").euler_characteristic() == 2
    assert catalog_complex("T2").euler_characteristic() == 0


def test_torus_is_a_closed_surface():
    K = catalog_complex("T2")
    assert len(K.vertices) == 7
    edge_count = {e: 0 for e in K.simplices[1]}
    for tri in K.simplices[2]:
        for e in itertools.combinations(tri, 2):
            edge_count[e] += 1
    assert set(edge_count.values()) == {2}


def test_boundary_squares_to_zero():
    for name in ("S2", "T2"):
        K = catalog_complex(name)
        assert not np.any(K.boundary_matrix(1) @ K.boundary_matrix(2))


def test_rank_against_numpy():
    rng = np.random.default_rng(0)
    for _ in range(50):
        r = rng.integers(1, 5)
        M = rng.integers(-2, 3, (6, r)) @ rng.integers(-2, 3, (r, 7))
        assert rank(M) == np.linalg.matrix_rank(M)


def test_invalid_complexes():
    with pytest.raises(InvalidComplex):
        SimplicialComplex.from_simplices([[0, 0, 1]])
    with pytest.raises(InvalidComplex):
        SimplicialComplex.from_simplices([list(range(6))])
    with pytest.raises(InvalidComplex):
        SimplicialComplex.from_json({"faces": []})


def test_rp3_not_triangulated():
    with pytest.raises(NoTriangulation) as ei:
        catalog_complex("RP3")
    assert ei.value.details["expected"] == [1, 0, 0, 1]


@st.composite
def complexes(draw):
    n = draw(st.integers(3, 7))
    dim = draw(st.integers(1, 3))
    simplices = draw(
        st.lists(st.lists(st.integers(0, n - 1), min_size=1, max_size=dim + 1, unique=True), min_size=1, max_size=8)
    )
    return SimplicialComplex.from_simplices(simplices)


@settings(max_examples=60, deadline=None)
@given(complexes())
def test_cone_is_contractible(K):
    assert betti(cone(K)) == [1] + [0] * cone(K).dim


@settings(max_examples=60, deadline=None)
@given(complexes())
def test_euler_equals_alternating_betti(K):
    assert K.euler_characteristic() == sum((-1) ** p * b for p, b in enumerate(betti(K)))


def test_retraction_examples():
    S1 = builtin("S1")
    A = dual_numbers(order=2)
    xi = make_apoint(S1, A, "U", [[1.0, 0.5, -0.2]])
    assert retract(xi, 0.0) is xi
    assert apoint_gap(retract(xi, 1.0), zero_section(S1, A, xi.base)) == 0
    z = zero_section(S1, A, S1.locate([1.0]))
    assert z.matrix().tolist() == [[1.0, 0.0, 0.0]]
    for s in np.linspace(0, 1, 7):
        assert project(retract(xi, s)) == project(xi)
        assert apoint_gap(retract(z, s), z) == 0
    with pytest.raises(InvalidInput):
        retract(xi, 1.5)


def test_retraction_is_lipschitz():
    rep = retraction_check(builtin("T2"), build_algebra(["e1", "e2"], ["e1^2", "e2^2", "e1*e2"]), n=10)
    assert rep["ok"] and np.isfinite(rep["lipschitz_constant"])


def test_zero_section_projects_back():
    for name in ("S1", "S2", "T2"):
        M = builtin(name)
        for x in M.sample(100, np.random.default_rng(1)):
            assert project(zero_section(M, dual_numbers(), x)) == x


@pytest.mark.parametrize(
    "name,A,want",
    [
        ("S2", dual_numbers(), [1, 0, 1]),
        ("T2", build_algebra(["e1", "e2"], ["e1^2", "e2^2", "e1*e2"]), [1, 2, 1]),
        ("S1", real_algebra(), [1, 1]),
        ("CP1", tensor_product(dual_numbers("e"), dual_numbers("h")), [1, 0, 1]),
    ],
)
def test_bundle_cohomology(name, A, want):
    rep = bundle_cohomology_check(name, A, samples=5)
    assert rep["match"] and rep["betti_bundle"] == want


def test_connectivity_witnesses():
    S1 = builtin("S1")
    A = dual_numbers()
    a = make_apoint(S1, A, "U", [[1.0, 0.5]])
    b = make_apoint(S1, A, "U", [[1.0, -2.0]])
    w = connectivity_witness(a, b)
    assert w["same_fiber"] and w["path"].value(0.5).matrix().tolist() == [[1.0, -0.75]]
    c = make_apoint(S1, A, "U", [[-3.0, 0.0]])
    w = connectivity_witness(a, c, n=5)
    assert not w["same_fiber"]
    assert w["continuity"]["max_distance_at_smallest_step"] < 1e-2
    w = connectivity_witness(a, a, n=5)
    assert all(apoint_gap(p, a) == 0 for p in w["path"].sample(5))


def test_sphere_loop_contracts():
    rep = sphere_loop_nullhomotopy(dual_numbers(), n=5)
    assert rep["endpoint_gap"] <= 1e-12
    assert rep["refines"]
