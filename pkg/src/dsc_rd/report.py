"""JSON and CSV report layouts (``"schema": 1``).

JSON is written with sorted keys and two-space indentation; floats use the
shortest round-trip representation. CSV uses a header row and 17
significant digits. Matrix-valued columns are flattened row-major as
``D[i][j]``.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .mc_oracle import Comparison
from .network import NetworkResult, NodeReport, SweepRow

SCHEMA_VERSION = 1
UNITS = "bits per source vector"
BASELINE_KEY = "baseline_rate_bits_no_side"
BASELINE_LABEL = "extension: rate if the decoder ignored its side information"


def _num(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def to_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _entry_names(prefix: str, n: int) -> list[str]:
    return [f"{prefix}[{i}][{j}]" for i in range(n) for j in range(n)]


def node_dict(r: NodeReport, baseline: bool = False) -> dict:
    d = {
        "id": r.node_id,
        "parent": r.parent,
        "children": list(r.children),
        "validity": r.validity.value,
        "alpha": r.alpha,
        "D": _num(r.D),
        "rate_bits": r.rate_bits,
        "sigma_x_given_side": _num(r.sigma_x_side),
        "sigma_x_given_statistic_side": _num(r.sigma_x_stat_side),
        "statistic": {"mixing": _num(r.statistic_mixing), "noise_cov": _num(r.statistic_noise)},
        "scheme_attached": r.scheme_attached,
    }
    if baseline:
        d[BASELINE_KEY] = r.baseline_rate_bits
    return d


def rate_json(result: NetworkResult, command: str = "rate") -> str:
    baseline = command == "compare"
    doc = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "units": UNITS,
        "nodes": [node_dict(r, baseline) for r in result.reports],
        "sum_rate_bits": result.sum_rate_bits,
    }
    if baseline:
        doc["extensions"] = {BASELINE_KEY: BASELINE_LABEL}
        vals = [r.baseline_rate_bits for r in result.reports]
        doc["sum_" + BASELINE_KEY] = None if None in vals else sum(vals)
    return to_json(doc)


def rate_csv(result: NetworkResult, command: str = "rate") -> str:
    n = result.reports[0].D.shape[0]
    header = ["node", "parent", "validity", "alpha", "rate_bits"]
    if command == "compare":
        header.append(BASELINE_KEY + " (extension)")
    header += _entry_names("D", n)
    rows = []
    for r in result.reports:
        row = [r.node_id, r.parent, r.validity.value, r.alpha, r.rate_bits]
        if command == "compare":
            row.append(r.baseline_rate_bits)
        rows.append(row + r.D.ravel().tolist())
    return to_csv(header, rows)


def sweep_csv(rows: list[SweepRow]) -> str:
    n = rows[0].D.shape[0] if rows else 0
    return to_csv(["node", "alpha", "rate_bits"] + _entry_names("D", n),
                  [[r.node_id, r.alpha, r.rate_bits] + r.D.ravel().tolist() for r in rows])


def sweep_json(rows: list[SweepRow]) -> str:
    return to_json({
        "schema": SCHEMA_VERSION,
        "command": "sweep",
        "units": UNITS,
        "rows": [{"node": r.node_id, "alpha": r.alpha, "rate_bits": r.rate_bits, "D": _num(r.D)}
                 for r in rows],
    })


def comparison_dict(c: Comparison) -> dict:
    return {"quantity": c.quantity, "closed_form": _num(c.closed_form),
            "empirical": _num(c.empirical), "se": _num(c.se), "z": c.z, "status": c.status}


def simulate_json(seed: int, samples: int, per_node: list[tuple[str, int, list[Comparison]]]
                  ) -> str:
    zs = [c.z for _, _, cs in per_node for c in cs]
    statuses = [c.status for _, _, cs in per_node for c in cs]
    overall = "fail" if "fail" in statuses else "warn" if "warn" in statuses else "pass"
    return to_json({
        "schema": SCHEMA_VERSION,
        "command": "simulate",
        "seed": seed,
        "samples": samples,
        "nodes": [{"id": nid, "seed": s, "comparisons": [comparison_dict(c) for c in cs]}
                  for nid, s, cs in per_node],
        "max_z": max(zs) if zs else 0.0,
        "status": overall,
    })


def simulate_csv(per_node: list[tuple[str, int, list[Comparison]]]) -> str:
    rows = []
    for nid, _, cs in per_node:
        for c in cs:
            closed = np.atleast_2d(c.closed_form)
            emp = np.atleast_2d(c.empirical)
            se = np.atleast_2d(c.se)
            for (i, j), v in np.ndenumerate(closed):
                z = 0.0 if emp[i, j] == v else abs(emp[i, j] - v) / se[i, j]
                rows.append([nid, c.quantity, f"{i},{j}", float(v), float(emp[i, j]),
                             float(se[i, j]), float(z), c.status])
    return to_csv(["node", "quantity", "entry", "closed_form", "empirical", "se", "z",
                   "status"], rows)
