"""Deterministic text dumps: every float is printed with 17 significant digits."""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .grid import GridFunction, TorusGrid
from .mather import Context, DualityCertificate, OccupationMeasure
from .vanish import ScheduleReport


def fmt(x: float) -> str:
    x = float(x) + 0.0  # no negative zero
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_json(obj: Any, indent: int = 1, _level: int = 0) -> str:
    """JSON with sorted keys and 17-digit floats; NaN/inf become strings."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(to_json(v, indent, _level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        s = fmt(obj)
        return s if math.isfinite(float(obj)) else json.dumps(s)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def table(grid: TorusGrid, columns: dict[str, Any]) -> str:
    """CSV with one row per grid point: index, coordinates, then the given columns."""
    coords = grid.coords
    header = ["index"] + [f"x{i}" for i in range(grid.dim)] + list(columns)
    cols = [np.asarray(v.values if isinstance(v, GridFunction) else v) for v in columns.values()]
    lines = [",".join(header)]
    for i in range(grid.size):
        row = [str(i)] + [fmt(c) for c in coords[i]]
        for col in cols:
            val = col[i]
            row.append(str(int(val)) if np.issubdtype(col.dtype, np.integer) else fmt(val))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def grid_function_table(f: GridFunction, name: str = "value") -> str:
    return table(f.grid, {name: f})


def context_dict(context: Context) -> dict:
    if context.ergodic:
        return {"kind": "ergodic"}
    return {"kind": "discounted", "lambda": context.lam, "z": context.z}


def context_from_dict(d: dict) -> Context:
    if d.get("kind") == "ergodic":
        return Context()
    return Context(float(d["lambda"]), int(d["z"]))


def measure_dump(measure: OccupationMeasure, grid: TorusGrid, context: Context) -> str:
    """Grid/control metadata and nonzero (point, control, weight) triples sorted by point."""
    n, k = measure.weights.shape
    return to_json({
        "grid": {"dim": grid.dim, "n": grid.n_per_axis},
        "n_controls": k,
        "context": context_dict(context),
        "total_mass": measure.total_mass,
        "support": [[p, c, w] for p, c, w in sorted(measure.support())],
    }) + "\n"


def load_measure(text: str) -> tuple[OccupationMeasure, Context, TorusGrid]:
    doc = json.loads(text)
    grid = TorusGrid(int(doc["grid"]["dim"]), int(doc["grid"]["n"]))
    w = np.zeros((grid.size, int(doc["n_controls"])))
    for p, c, val in doc["support"]:
        w[int(p), int(c)] += float(val)
    return OccupationMeasure(w, float(w.sum())), context_from_dict(doc["context"]), grid


def certificate_dict(cert: DualityCertificate) -> dict:
    out = {
        "context": context_dict(cert.context),
        "lp_value": cert.lp_value,
        "pde_value": cert.pde_value,
        "gap": cert.gap,
        "closing_residual": cert.closing_residual,
        "total_mass": cert.measure.total_mass,
    }
    rep = cert.lp_report
    if rep is not None:
        out["lp_certificate"] = {
            "ok": rep.ok,
            "primal_residual": rep.primal_residual,
            "negativity": rep.negativity,
            "dual_infeasibility": rep.dual_infeasibility,
            "gap": rep.gap,
        }
    if cert.lp_solution is not None:
        out["pivots"] = cert.lp_solution.iterations
        # with the measure dump this is enough to re-run check_certificate
        out["dual"] = [float(y) for y in cert.lp_solution.dual]
    return out


def schedule_csv(report: ScheduleReport) -> str:
    lines = ["lambda,c_hat,spread,gap_to_prev,residual"]
    for r in report.records:
        lines.append(",".join(fmt(v) for v in (r.lam, r.c_hat, r.spread, r.gap_to_prev, r.residual)))
    return "\n".join(lines) + "\n"
