"""JSON manifold manifests: the on-disk description of a manifold.

Schema::

    {
      "name": str,
      "ambient_dim": int,
      "param_dim": int,
      "charts": [
        {
          "domain": {"lo": [...], "hi": [...]},           # optional for builtins
          "kind": "builtin" | "expression",
          "payload": {"key": ..., "params": {...}}         # builtin
                   | {"components": ["...", ...]}          # expression
          "truncated_lo"/"truncated_hi"/"boundary_lo"/"boundary_hi": [bool...]
        }, ...
      ],
      "smoothness_claim": int,            # optional
      "tolerances": {"tol_dist_rel": ..., "tol_sep_rel": ...}   # optional
    }
"""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .catalog import BUILTIN_MANIFOLDS, builtin_chart, expression_chart
from .errors import ManifestError
from .manifolds import Chart, ManifoldSpec


def _facets(entry: dict, key: str, m: int) -> tuple:
    raw = entry.get(key)
    if raw is None:
        return ()
    if len(raw) != m:
        raise ManifestError(f"{key} must list one flag per parameter")
    return tuple(bool(b) for b in raw)


def _chart_from_entry(entry: dict, m: int, d: int) -> Chart:
    kind = entry.get("kind")
    domain = entry.get("domain")
    facet_kwargs = {
        k: _facets(entry, k, m)
        for k in ("truncated_lo", "truncated_hi", "boundary_lo", "boundary_hi")
    }
    facet_kwargs = {k: v for k, v in facet_kwargs.items() if v}
    if kind == "expression":
        payload = entry.get("payload", {})
        comps = payload.get("components")
        if not comps or len(comps) != d:
            raise ManifestError("expression payload needs one component per ambient axis")
        if domain is None:
            raise ManifestError("expression charts require an explicit domain")
        return expression_chart(
            comps, m=m, lo=domain["lo"], hi=domain["hi"], **facet_kwargs
        )
    if kind == "builtin":
        payload = entry.get("payload", {})
        key = payload.get("key")
        if not key:
            raise ManifestError("builtin payload needs a catalog key")
        chart = builtin_chart(key, payload.get("params", {}))
        if (chart.param_dim, chart.ambient_dim) != (m, d):
            raise ManifestError(
                f"builtin {key!r} has dimensions ({chart.param_dim},{chart.ambient_dim}), "
                f"manifest says ({m},{d})"
            )
        overrides = dict(facet_kwargs)
        if domain is not None:
            overrides["lo"] = np.asarray(domain["lo"], dtype=float)
            overrides["hi"] = np.asarray(domain["hi"], dtype=float)
        if overrides:
            chart = dataclasses.replace(chart, **overrides)
        return chart
    raise ManifestError(f"unknown chart kind {kind!r}")


def manifold_from_dict(doc: dict) -> ManifoldSpec:
    try:
        name = doc.get("name", "")
        d = int(doc["ambient_dim"])
        m = int(doc["param_dim"])
        entries = doc["charts"]
    except KeyError as exc:
        raise ManifestError(f"manifest missing required field {exc}") from exc
    if not isinstance(entries, list) or not entries:
        raise ManifestError("manifest needs a nonempty chart list")
    charts = tuple(_chart_from_entry(e, m, d) for e in entries)
    return ManifoldSpec(
        charts=charts,
        name=name,
        smoothness_claim=int(doc.get("smoothness_claim", 2)),
        tolerances=dict(doc.get("tolerances", {})),
    )


def load_manifold(path) -> ManifoldSpec:
    """Read a manifest file (or a catalog shorthand {'catalog': name, ...})."""
    doc = json.loads(Path(path).read_text())
    if "catalog" in doc:
        key = doc["catalog"]
        if key not in BUILTIN_MANIFOLDS:
            raise ManifestError(f"unknown catalog manifold {key!r}")
        return BUILTIN_MANIFOLDS[key](**doc.get("params", {}))
    return manifold_from_dict(doc)


def manifold_to_dict(M: ManifoldSpec) -> dict:
    """Serialize; charts must carry expression components or builtin payloads."""
    charts = []
    for c in M.charts:
        entry: dict = {
            "domain": {"lo": c.lo.tolist(), "hi": c.hi.tolist()},
            "truncated_lo": list(c.truncated_lo),
            "truncated_hi": list(c.truncated_hi),
            "boundary_lo": list(c.boundary_lo),
            "boundary_hi": list(c.boundary_hi),
        }
        if c.expr_components is not None:
            entry["kind"] = "expression"
            entry["payload"] = {"components": list(c.expr_components)}
        elif c.builtin_payload is not None:
            entry["kind"] = "builtin"
            entry["payload"] = c.builtin_payload
        else:
            raise ManifestError(
                f"chart of {M.name!r} holds raw callables and cannot be serialized"
            )
        charts.append(entry)
    return {
        "name": M.name,
        "ambient_dim": M.ambient_dim,
        "param_dim": M.param_dim,
        "smoothness_claim": M.smoothness_claim,
        "charts": charts,
        "tolerances": M.tolerances,
    }


def save_manifold(M: ManifoldSpec, path) -> None:
    Path(path).write_text(json.dumps(manifold_to_dict(M), indent=2, sort_keys=True))
