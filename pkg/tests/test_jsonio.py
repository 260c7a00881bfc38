import json
import math

import pytest

from weilkit.algebra import dual_numbers
from weilkit.errors import InvalidInput, InvalidManifold
from weilkit.jsonio import (
    algebra_from_json,
    apoint_from_json,
    apoint_to_json,
    dumps,
    manifold_from_json,
    metric_config_from_json,
    metric_config_to_json,
)
from weilkit.metric import distance


def test_algebra_forms():
    assert algebra_from_json({"generators": ["e"], "relations": ["e^2"]}).dim == 2
    assert algebra_from_json({"truncated": {"generators": ["a", "b"], "order": 2}}).dim == 6
    t = algebra_from_json({"tensor": [{"generators": ["e"], "relations": ["e^2"]}, {"generators": ["h"], "relations": ["h^2"]}]})
    assert t.dim == 4
    assert algebra_from_json({"generators": []}).dim == 1
    with pytest.raises(InvalidInput):
        algebra_from_json({"relations": ["e^2"]})


def test_manifold_forms():
    assert manifold_from_json("S1").name == "S1"
    assert manifold_from_json({"builtin": "T2"}).dim == 2
    M = manifold_from_json(
        {"charts": [{"id": "P", "coords": ["r"], "domain": ["r > 0"]}], "name": "ray"}
    )
    assert M.name == "ray" and M.dim == 1
    with pytest.raises(InvalidManifold):
        manifold_from_json({"charts": []})
    with pytest.raises(InvalidManifold):
        manifold_from_json({"charts": [{"id": "P", "coords": ["r"]}], "metric": "hyperbolic"})


def test_apoint_roundtrip():
    A = dual_numbers(order=2)
    xi = apoint_from_json({"manifold": "S1", "chart": "V", "acoords": [{"1": "pi", "e": 0.5, "e^2": -1}]}, A=A)
    assert xi.matrix().tolist() == [[math.pi, 0.5, -1.0]]
    back = apoint_from_json(json.loads(json.dumps(apoint_to_json(xi))), A=A)
    assert back.matrix().tolist() == xi.matrix().tolist() and back.chart == "V"


def test_metric_config_roundtrip():
    cfg = metric_config_from_json(
        {"weights": {"mode": "factorial"}, "ideal_norm": "l2", "probes": ["x/2", {"pair": ["cos(t)", "sin(t)"]}], "k": 2}
    )
    again = metric_config_from_json(metric_config_to_json(cfg))
    assert again == cfg


def test_dumps_is_deterministic_and_finite():
    text = dumps({"b": 0.1, "a": [float("inf"), float("nan"), 1e-300], "c": (1, 2)})
    assert text == dumps({"c": (1, 2), "a": [float("inf"), float("nan"), 1e-300], "b": 0.1})
    data = json.loads(text)
    assert data["a"] == ["inf", "nan", 1e-300] and data["b"] == 0.1


def test_scenario_distance():
    xi = apoint_from_json({"manifold": "S1", "algebra": {"generators": ["e"], "relations": ["e^2"]}, "acoords": [[0.1, 1.0]]})
    eta = apoint_from_json({"manifold": "S1", "algebra": {"generators": ["e"], "relations": ["e^2"]}, "acoords": [[0.3, 1.0]]})
    # base arc 0.2; the (cos, sin) probe pair moves by the chord 2 sin(0.1)
    assert distance(xi, eta) == pytest.approx(0.2 + 2 * math.sin(0.1), abs=1e-12)
