"""JSON readers and writers for algebras, manifolds, A-points and configs."""

from __future__ import annotations

import json
import math
from typing import Mapping

import numpy as np

from .algebra import WeilAlgebra, build_algebra, real_algebra, tensor_product, truncated
from .apoint import APoint, make_apoint
from .atlas import (
    CircleMetric,
    EuclideanMetric,
    Manifold,
    builtin,
    make_chart,
    make_transition,
)
from .errors import InvalidConfig, InvalidInput, InvalidManifold
from .expr import as_expr, eval_real
from .metric import MetricConfig, Probe, WeightVector


def _need(d, key, what):
    if not isinstance(d, Mapping) or key not in d:
        raise InvalidInput(f"{what} JSON needs a {key!r} field")
    return d[key]


# ---------------------------------------------------------------------------
# algebras


def algebra_from_json(d) -> WeilAlgebra:
    """``{"generators": [...], "relations": [...]}``; also ``{"truncated": {...}}``
    and ``{"tensor": [alg, alg]}``."""
    if isinstance(d, WeilAlgebra):
        return d
    if not isinstance(d, Mapping):
        raise InvalidInput("algebra JSON must be an object")
    if "tensor" in d:
        parts = [algebra_from_json(x) for x in d["tensor"]]
        if len(parts) < 2:
            raise InvalidInput("tensor needs at least two factors")
        out = parts[0]
        for p in parts[1:]:
            out = tensor_product(out, p)
        return out
    if "truncated" in d:
        t = d["truncated"]
        return truncated(_need(t, "generators", "truncated"), int(_need(t, "order", "truncated")))
    gens = list(_need(d, "generators", "algebra"))
    rels = list(d.get("relations", []))
    if not gens:
        if rels:
            raise InvalidInput("relations without generators")
        return real_algebra()
    return build_algebra(gens, rels)


def algebra_to_json(A: WeilAlgebra) -> dict:
    return A.to_dict()


# ---------------------------------------------------------------------------
# manifolds


def manifold_from_json(d) -> Manifold:
    if isinstance(d, Manifold):
        return d
    if isinstance(d, str):
        return builtin(d)
    if not isinstance(d, Mapping):
        raise InvalidInput("manifold JSON must be an object or a builtin name")
    if "builtin" in d:
        return builtin(d["builtin"])
    charts_json = _need(d, "charts", "manifold")
    if not charts_json:
        raise InvalidManifold("manifold needs at least one chart")
    charts = {}
    for c in charts_json:
        cid = _need(c, "id", "chart")
        if cid in charts:
            raise InvalidManifold(f"duplicate chart id {cid!r}")
        charts[cid] = make_chart(cid, _need(c, "coords", "chart"), c.get("domain", ()), c.get("boundary", False))
    transitions = [
        make_transition(_need(t, "from", "transition"), _need(t, "to", "transition"), _need(t, "components", "transition"), t.get("where", ()))
        for t in d.get("transitions", [])
    ]
    periods = d.get("periods")
    if periods is not None:
        periods = tuple(None if p is None else _number(p) for p in periods)
    kind = d.get("metric", "euclidean")
    if kind == "euclidean":
        metric = EuclideanMetric(d.get("reference_chart", next(iter(charts))))
    elif kind == "circle":
        metric = CircleMetric()
    else:
        raise InvalidManifold(f"unknown metric {kind!r} (use euclidean or circle)")
    return Manifold(
        d.get("name", "custom"), charts, transitions, metric, compact=bool(d.get("compact", False)), periods=periods
    )


def manifold_to_json(M: Manifold) -> dict:
    return {"builtin": M.name} if M.builtin else M.describe()


def _number(v) -> float:
    """A float, or an expression string such as ``"2*pi"``."""
    if isinstance(v, str):
        return eval_real(as_expr(v), {})
    return float(v)


# ---------------------------------------------------------------------------
# A-points


def apoint_from_json(d, M: Manifold | None = None, A: WeilAlgebra | None = None) -> APoint:
    if not isinstance(d, Mapping):
        raise InvalidInput("A-point JSON must be an object")
    M = M or manifold_from_json(_need(d, "manifold", "A-point"))
    A = A or algebra_from_json(_need(d, "algebra", "A-point"))
    chart = d.get("chart") or next(iter(M.charts))
    values = []
    for v in _need(d, "acoords", "A-point"):
        if isinstance(v, Mapping):
            values.append({k: _number(x) for k, x in v.items()})
        elif isinstance(v, (list, tuple)):
            values.append([_number(x) for x in v])
        else:
            values.append(_number(v))
    return make_apoint(M, A, chart, values)


def apoint_to_json(xi: APoint) -> dict:
    names = xi.algebra.basis_names
    return {
        "manifold": xi.manifold.name,
        "chart": xi.chart,
        "acoords": [{n: float(c) for n, c in zip(names, a.coeffs)} for a in xi.acoords],
    }


# ---------------------------------------------------------------------------
# metric configs


def _probe_from_json(p) -> Probe:
    if isinstance(p, str):
        return Probe.single(p)
    if isinstance(p, Mapping) and "pair" in p:
        f, g = p["pair"]
        return Probe.pair(f, g)
    if isinstance(p, Mapping):
        return Probe.single(dict(p))
    raise InvalidConfig(f"cannot read probe {p!r}")


def metric_config_from_json(d) -> MetricConfig:
    if d is None:
        return MetricConfig()
    if isinstance(d, MetricConfig):
        return d
    w = d.get("weights", {})
    if isinstance(w, list):
        weights = WeightVector("explicit", tuple(float(x) for x in w))
    else:
        vals = w.get("values")
        weights = WeightVector(w.get("mode", "explicit"), tuple(float(x) for x in vals) if vals else None)
    probes = d.get("probes")
    if probes is not None:
        probes = tuple(_probe_from_json(p) for p in probes)
    k = d.get("k")
    return MetricConfig(weights, d.get("ideal_norm", "l1"), d.get("mode", "probe"), probes, int(k) if k is not None else None)


def metric_config_to_json(cfg: MetricConfig) -> dict:
    return {
        "weights": {"mode": cfg.weights.mode, "values": list(cfg.weights.values) if cfg.weights.values else None},
        "ideal_norm": cfg.ideal_norm,
        "mode": cfg.mode,
        "k": cfg.k,
        "probes": [p.to_json() for p in cfg.probes] if cfg.probes is not None else "default",
    }


# ---------------------------------------------------------------------------
# output


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats by strings so the output stays valid JSON."""
    if isinstance(o, float) and not math.isfinite(o):
        return "nan" if math.isnan(o) else ("inf" if o > 0 else "-inf")
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, np.generic):
        return _clean(o.item())
    return o


def dumps(obj) -> str:
    """Sorted-key JSON; floats use Python's shortest round-trip repr."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, default=_default, allow_nan=False) + "\n"
