import math

import numpy as np
import pytest

from weilkit.atlas import BasePoint, builtin, product
from weilkit.errors import ChartDomain, UnknownManifold
from weilkit.verify import squaring_plane


def test_builtin_circle():
    M = builtin("S1")
    assert M.dim == 1 and M.compact
    assert M.base_distance(M.locate([0.1]), M.locate([6.2])) == pytest.approx(2 * math.pi - 6.1, abs=1e-12)


def test_builtin_plane():
    M = builtin("R^2")
    assert M.dim == 2 and not M.compact
    assert M.base_distance(BasePoint("U", (0, 0)), BasePoint("U", (3, 4))) == 5


def test_halfplane_has_boundary_chart():
    M = builtin("halfplane")
    assert any(c.is_boundary_chart for c in M.charts.values())
    M.check_point(BasePoint("H", (0.0, 1.0)))
    with pytest.raises(ChartDomain):
        M.check_point(BasePoint("H", (-0.1, 1.0)))


def test_unknown_manifold():
    with pytest.raises(UnknownManifold):
        builtin("K3")


@pytest.mark.parametrize("name", ["S1", "T2", "S2", "R^3", "cylinder", "halfplane"])
def test_self_distance_zero(name):
    M = builtin(name)
    for p in M.sample(20, np.random.default_rng(0)):
        assert M.base_distance(p, p) == 0


def _ambient(p):
    # independent stereographic inverse
    u, v = p.coords
    r2 = u * u + v * v
    X, Y, Z = 2 * u / (1 + r2), 2 * v / (1 + r2), (r2 - 1) / (1 + r2)
    if p.chart == "S":
        Z = -Z
    return np.array([X, Y, Z])


def test_sphere_distance_is_great_circle_angle():
    M = builtin("S2")
    pts = M.sample(200, np.random.default_rng(1))
    for p, q in zip(pts, pts[1:]):
        a, b = _ambient(p), _ambient(q)
        want = math.atan2(np.linalg.norm(np.cross(a, b)), float(a @ b))
        assert M.base_distance(p, q) == pytest.approx(want, abs=1e-10)


def test_products():
    T = product(builtin("S1"), builtin("S1"))
    assert T.dim == 2 and T.compact
    R2 = product(builtin("R^1"), builtin("R^1"))
    assert R2.dim == 2 and not R2.compact
    C = builtin("cylinder")
    rng = np.random.default_rng(2)
    S1 = builtin("S1")
    for p, q in zip(C.sample(50, rng), C.sample(50, rng)):
        arc = S1.base_distance(S1.locate([p.coords[0]]), S1.locate([q.coords[0]]))
        lin = abs(p.coords[1] - q.coords[1])
        assert C.base_distance(p, q) == pytest.approx(math.hypot(arc, lin), abs=1e-12)


@pytest.mark.parametrize("name", ["S1", "T2", "S2", "cylinder"])
def test_transition_roundtrip(name):
    M = builtin(name)
    assert M.roundtrip_error(M.sample(1000, np.random.default_rng(3))) <= 1e-9


def test_squaring_plane_roundtrip():
    M = squaring_plane()
    rng = np.random.default_rng(4)
    pts = [BasePoint("U", (x, y)) for x, y in zip(rng.uniform(0.1, 3, 1000), rng.uniform(-3, 3, 1000))]
    assert M.roundtrip_error(pts) <= 1e-9


@pytest.mark.parametrize("name", ["S1", "T2", "S2"])
def test_metric_axioms_on_samples(name):
    M = builtin(name)
    rng = np.random.default_rng(5)
    P, Q, R = (M.sample(1000, rng) for _ in range(3))
    for p, q, r in zip(P, Q, R):
        dpq = M.base_distance(p, q)
        assert dpq == M.base_distance(q, p)
        assert M.base_distance(p, r) <= dpq + M.base_distance(q, r) + 1e-12
