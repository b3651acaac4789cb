"""Network configuration files (JSON, ``"schema": 1``).

Layout::

    {
      "schema": 1,
      "source_cov": [[...], ...],
      "base": {"mixing": [[...]], "noise_cov": [[...]]},      # optional
      "nodes": [
        {"id": "a", "parent": "b", "mixing": [[...]], "noise_cov": [[...]],
         "alpha": 0.5},                                      # or "distortion": [[...]]
        ...
      ]
    }

Matrices are row-major nested arrays. ``parent`` is another node id or
``"BASE"``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, DscError
from .network import BASE, NetworkSpec, NodeSpec
from .suff_stat import LinearObservation

SCHEMA_VERSION = 1
_NODE_KEYS = {"id", "parent", "mixing", "noise_cov", "alpha", "distortion"}


def _matrix(value, where: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ConfigError(f"{where}: expected a non-empty array of rows")
    widths = {len(r) for r in value}
    if len(widths) != 1:
        raise ConfigError(f"{where}: rows have different lengths {sorted(widths)}")
    for r in value:
        for v in r:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{where}: non-numeric entry {v!r}")
    return np.array(value, dtype=float)


def _field(where: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except DscError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def spec_from_dict(doc) -> NetworkSpec:
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected an object")
    if doc.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"schema: expected {SCHEMA_VERSION}, got {doc.get('schema')!r}")
    unknown = set(doc) - {"schema", "source_cov", "base", "nodes"}
    if unknown:
        raise ConfigError(f"top level: unknown keys {sorted(unknown)}")
    if "source_cov" not in doc:
        raise ConfigError("source_cov: missing")
    source = _matrix(doc["source_cov"], "source_cov")

    base = None
    if doc.get("base") is not None:
        b = doc["base"]
        if not isinstance(b, dict) or set(b) != {"mixing", "noise_cov"}:
            raise ConfigError("base: expected an object with mixing and noise_cov")
        base = _field("base", LinearObservation, _matrix(b["mixing"], "base.mixing"),
                      _matrix(b["noise_cov"], "base.noise_cov"), BASE)

    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise ConfigError("nodes: expected a non-empty array")
    nodes = []
    for i, rn in enumerate(raw_nodes):
        where = f"nodes[{i}]"
        if not isinstance(rn, dict):
            raise ConfigError(f"{where}: expected an object")
        unknown = set(rn) - _NODE_KEYS
        if unknown:
            raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
        for key in ("id", "mixing", "noise_cov"):
            if key not in rn:
                raise ConfigError(f"{where}.{key}: missing")
        alpha = rn.get("alpha")
        if alpha is not None and (isinstance(alpha, bool) or not isinstance(alpha, (int, float))):
            raise ConfigError(f"{where}.alpha: expected a number")
        dist = rn.get("distortion")
        nodes.append(_field(
            where, NodeSpec,
            id=rn["id"],
            mixing=_matrix(rn["mixing"], f"{where}.mixing"),
            noise_cov=_matrix(rn["noise_cov"], f"{where}.noise_cov"),
            parent=rn.get("parent", BASE),
            alpha=alpha,
            distortion=None if dist is None else _matrix(dist, f"{where}.distortion"),
        ))
    return _field("network", NetworkSpec, source, nodes, base)


def parse_config(text: str, source: str = "<config>") -> NetworkSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return spec_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> NetworkSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    return parse_config(text, str(path))


def spec_to_dict(net: NetworkSpec) -> dict:
    doc = {"schema": SCHEMA_VERSION, "source_cov": net.source_cov.tolist()}
    if net.base is not None:
        doc["base"] = {"mixing": net.base.mixing.tolist(), "noise_cov": net.base.noise_cov.tolist()}
    nodes = []
    for n in net.nodes:
        item = {"id": n.id, "parent": n.parent, "mixing": n.mixing.tolist(),
                "noise_cov": n.noise_cov.tolist()}
        if n.alpha is not None:
            item["alpha"] = n.alpha
        else:
            item["distortion"] = n.distortion.tolist()
        nodes.append(item)
    doc["nodes"] = nodes
    return doc


def dump_config(net: NetworkSpec) -> str:
    return json.dumps(spec_to_dict(net), indent=2) + "\n"
