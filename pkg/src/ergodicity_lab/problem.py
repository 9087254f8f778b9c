"""Bellman data (a, b, L) tabulated over a finite control set.

The Bellman operator is F(x, p, X) = max_alpha (-tr a X - b . p - L) with
diagonal diffusion a.  Tables are indexed ``[point, control]`` (and
``[point, control, axis]`` for a and b), points in row-major grid order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .grid import TorusGrid

GALLERY_IDS = (
    "constant_cost",
    "eikonal_f",
    "linear_first_order",
    "viscous_superlinear",
    "uniformly_elliptic",
    "superquadratic",
)


class SpecError(ValueError):
    """Problem spec could not be turned into a valid EllipticProblem."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ControlSet:
    points: np.ndarray
    k0_mask: np.ndarray | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("control set must be a nonempty list of control points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("control points must be finite")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("duplicate control points")
        mask = np.ones(len(pts), bool) if self.k0_mask is None else np.array(self.k0_mask, bool)
        if mask.shape != (len(pts),):
            raise ValueError(f"k0 mask has {mask.size} entries for {len(pts)} controls")
        if self.labels is not None and len(self.labels) != len(pts):
            raise ValueError("labels must match the number of controls")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "k0_mask", _frozen(mask, bool))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    def __len__(self):
        return len(self.points)

    def index_of(self, point) -> int:
        hits = np.flatnonzero(np.all(self.points == np.atleast_1d(point), axis=1))
        if not hits.size:
            raise KeyError(f"no control at {point}")
        return int(hits[0])

    def subset(self, keep) -> "ControlSet":
        keep = np.asarray(keep)
        labels = None if self.labels is None else tuple(np.asarray(self.labels)[keep])
        return ControlSet(self.points[keep], self.k0_mask[keep], labels)


@dataclass(frozen=True)
class EllipticProblem:
    grid: TorusGrid
    controls: ControlSet
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    L: np.ndarray = field(repr=False)
    source: Mapping[str, Any] | None = field(default=None, compare=False)

    def __post_init__(self):
        n, k, d = self.grid.size, len(self.controls), self.grid.dim
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        L = np.array(self.L, dtype=float)
        if a.shape != (n, k, d) or b.shape != (n, k, d):
            raise ValueError(f"a and b must have shape {(n, k, d)}, got {a.shape} and {b.shape}")
        if L.shape != (n, k):
            raise ValueError(f"L must have shape {(n, k)}, got {L.shape}")
        for name, arr in (("a", a), ("b", b), ("L", L)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} table has non-finite entries")
        if a.min() < 0:
            p, c, ax = np.unravel_index(np.argmin(a), a.shape)
            raise ValueError(
                f"ellipticity violated: a[point={p}, control={c}, axis={ax}] = {a[p, c, ax]!r} < 0"
            )
        for name, arr in (("a", a), ("b", b), ("L", L)):
            object.__setattr__(self, name, _frozen(arr))

    @property
    def n_points(self) -> int:
        return self.grid.size

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    def with_cost(self, L) -> "EllipticProblem":
        """Same dynamics, different running cost (e.g. a shifted or test cost)."""
        return EllipticProblem(self.grid, self.controls, self.a, self.b, L)

    def shifted(self, kappa: float) -> "EllipticProblem":
        return self.with_cost(self.L + kappa)

    def restricted(self, keep) -> "EllipticProblem":
        """Problem on a subset of the controls."""
        keep = np.asarray(keep)
        return EllipticProblem(
            self.grid, self.controls.subset(keep), self.a[:, keep], self.b[:, keep], self.L[:, keep]
        )

    def m0(self) -> float:
        """max_x |min_alpha L|, the a priori bound on lambda * |v^lambda|."""
        return float(np.max(np.abs(self.L.min(axis=1))))


# --- gallery ---------------------------------------------------------------


def legendre_power(m: float, q) -> float:
    """((m-1)/m) |q|^(m/(m-1)), the convex conjugate of |p|^m / m."""
    if not m > 1:
        raise ValueError(f"legendre_power needs m > 1, got {m}")
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(q, dtype=float))))
    return (m - 1.0) / m * r ** (m / (m - 1.0))


def potential(grid: TorusGrid, amp: float = 1.0, tilt: float = 0.0) -> np.ndarray:
    """f(x) = amp * sum_i (1 - cos 2 pi x_i) + tilt * sum_i sin 4 pi x_i."""
    x = grid.coords
    return amp * np.sum(1.0 - np.cos(2 * np.pi * x), axis=1) + tilt * np.sum(
        np.sin(4 * np.pi * x), axis=1
    )


def ball_lattice(dim: int, k: int, radius: float = 1.0) -> np.ndarray:
    """Centered lattice with k points per axis on [-radius, radius], clipped to the ball."""
    axis = np.linspace(-radius, radius, k)
    axis[k // 2] = 0.0
    pts = np.stack(np.meshgrid(*[axis] * dim, indexing="ij"), axis=-1).reshape(-1, dim)
    return pts[np.linalg.norm(pts, axis=1) <= radius * (1 + 1e-12)]


def box_lattice(dim: int, k: int, radius: float) -> np.ndarray:
    axis = np.linspace(-radius, radius, k)
    axis[k // 2] = 0.0
    return np.stack(np.meshgrid(*[axis] * dim, indexing="ij"), axis=-1).reshape(-1, dim)


_DEFAULTS: dict[str, dict[str, Any]] = {
    "constant_cost": {"ell0": 1.0},
    "eikonal_f": {"amp": 1.0, "tilt": 0.0, "k": 3, "rest": True},
    "linear_first_order": {"amp": 1.0, "tilt": 0.3, "k": 3, "speed_amp": 0.5, "cost_weight": 0.5},
    "viscous_superlinear": {
        "amp": 1.0, "tilt": 0.0, "m": 2.0, "sigma": 0.3, "R": None, "k": None, "core": None,
    },
    "superquadratic": {
        "amp": 1.0, "tilt": 0.0, "m": 3.0, "sigma0": 0.3, "kappa": 0.05, "R": None, "k": None,
        "core": None,
    },
    "uniformly_elliptic": {"amp": 1.0, "tilt": 0.3, "k": 4, "theta": 2.0, "drift": 1.0},
}


def _odd(k, name="k"):
    if int(k) != k or k < 3 or k % 2 == 0:
        raise ValueError(f"{name} must be an odd integer >= 3, got {k}")
    return int(k)


def gallery_params(gallery_id: str, params: Mapping[str, Any] | None = None) -> dict[str, Any]:
    if gallery_id not in _DEFAULTS:
        raise ValueError(f"unknown gallery id {gallery_id!r}; choose from {', '.join(GALLERY_IDS)}")
    merged = dict(_DEFAULTS[gallery_id])
    for key, val in (params or {}).items():
        if key not in merged:
            raise ValueError(f"unknown parameter {key!r} for gallery {gallery_id!r}")
        merged[key] = val
    return merged


def build_gallery(gallery_id: str, params: Mapping[str, Any] | None, grid: TorusGrid) -> EllipticProblem:
    """Tabulate one of the builtin example problems on ``grid``.

    Non-compact control sets (the two Legendre-type entries) are truncated to
    a box [-R, R]^d; the K0 core is the sub-box of radius ``core``.
    """
    p = gallery_params(gallery_id, params)
    n, d = grid.size, grid.dim
    x = grid.coords

    if gallery_id == "constant_cost":
        pts = np.zeros((1, d))
        a = np.zeros((n, 1, d))
        return _finish(grid, ControlSet(pts), a, np.zeros_like(a), np.full((n, 1), float(p["ell0"])), gallery_id, p)

    if gallery_id in ("eikonal_f", "linear_first_order"):
        pts = ball_lattice(d, _odd(p["k"]))
        if gallery_id == "eikonal_f" and not p["rest"]:
            pts = pts[np.any(pts != 0, axis=1)]
        f = potential(grid, p["amp"], p["tilt"])
        k = len(pts)
        a = np.zeros((n, k, d))
        if gallery_id == "eikonal_f":
            speed = np.ones(n)
            L = np.repeat(f[:, None], k, axis=1)
        else:
            if not 0 <= p["speed_amp"] < 1:
                raise ValueError("speed_amp must lie in [0, 1) so the speed stays positive")
            if p["cost_weight"] < 0:
                raise ValueError("cost_weight must be >= 0")
            speed = 1.0 + p["speed_amp"] * np.sin(2 * np.pi * x[:, 0])
            L = f[:, None] + p["cost_weight"] * np.sum(pts**2, axis=1)[None, :]
        b = speed[:, None, None] * pts[None, :, :]
        return _finish(grid, ControlSet(pts), a, b, L, gallery_id, p)

    if gallery_id in ("viscous_superlinear", "superquadratic"):
        m = float(p["m"])
        if gallery_id == "viscous_superlinear" and not m > 1:
            raise ValueError(f"viscous_superlinear needs m > 1, got {m}")
        if gallery_id == "superquadratic" and not m > 2:
            raise ValueError(f"superquadratic needs m > 2, got {m}")
        f = potential(grid, p["amp"], p["tilt"])
        R = p["R"]
        if R is None:
            R = 2.0 * (1.0 + float(np.ptp(f))) ** (1.0 / (m - 1.0))
        if not R > 0:
            raise ValueError(f"R must be positive, got {R}")
        k = _odd(p["k"] if p["k"] is not None else (9 if d == 1 else 5))
        core = p["core"] if p["core"] is not None else R / 2.0
        pts = box_lattice(d, k, R)
        mask = np.max(np.abs(pts), axis=1) <= core * (1 + 1e-12)
        qcost = np.array([legendre_power(m, q) for q in pts])
        L = f[:, None] + qcost[None, :]
        b = np.broadcast_to(pts[None, :, :], (n, len(pts), d)).copy()
        if gallery_id == "viscous_superlinear":
            if p["sigma"] < 0:
                raise ValueError("sigma must be >= 0")
            a = np.full((n, len(pts), d), float(p["sigma"]) ** 2)
        else:
            if p["sigma0"] < 0 or p["kappa"] < 0:
                raise ValueError("sigma0 and kappa must be >= 0")
            diff = p["sigma0"] ** 2 + p["kappa"] * np.sum(pts**2, axis=1)
            a = np.broadcast_to(diff[None, :, None], (n, len(pts), d)).copy()
        p = dict(p, R=float(R), k=k, core=float(core))
        return _finish(grid, ControlSet(pts, mask), a, b, L, gallery_id, p)

    # uniformly_elliptic: compact scalar controls s in [-1, 1]
    theta = float(p["theta"])
    if theta < 1:
        raise ValueError(f"ellipticity bound theta must be >= 1, got {theta}")
    k = int(p["k"])
    if k < 1:
        raise ValueError("k must be >= 1")
    s = np.linspace(-1.0, 1.0, k) if k > 1 else np.zeros(1)
    f = potential(grid, p["amp"], p["tilt"])
    phase = np.cos(2 * np.pi * x)  # (n, d)
    a = theta ** (s[None, :, None] * phase[:, None, :])
    shifts = np.arange(d) / 4.0
    b = p["drift"] * s[None, :, None] * np.sin(2 * np.pi * (x + shifts))[:, None, :]
    L = f[:, None] + 0.5 * s[None, :] ** 2
    return _finish(grid, ControlSet(s[:, None]), a, b, L, gallery_id, p)


def _finish(grid, controls, a, b, L, gallery_id, params):
    return EllipticProblem(grid, controls, a, b, L, source={"id": gallery_id, "params": dict(params)})


# --- condition (L) -----------------------------------------------------------


@dataclass(frozen=True)
class ConditionLReport:
    L0: float
    ok: bool
    margin: float


def check_condition_L(problem: EllipticProblem) -> ConditionLReport:
    """Certify that controls outside the K0 core never undercut L0.

    L0 = max_x min_{K0} L.  Vacuously ok (margin +inf) when K0 is everything.
    """
    mask = problem.controls.k0_mask
    if not mask.any():
        raise ValueError("K0 mask is empty")
    L0 = float(problem.L[:, mask].min(axis=1).max())
    if mask.all():
        return ConditionLReport(L0, True, math.inf)
    outside = float(problem.L[:, ~mask].min())
    return ConditionLReport(L0, outside >= L0, outside - L0)


# --- spec files ----------------------------------------------------------------


def _reject_constant(token):
    raise SpecError(f"non-finite number {token} not allowed")


def parse_spec(text: str) -> EllipticProblem:
    """Parse a JSON problem spec (see docs in README) into an EllipticProblem."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SpecError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise SpecError("top level must be an object")
    grid = _parse_grid(doc.get("grid"))
    if "gallery" in doc:
        gal = doc["gallery"]
        if not isinstance(gal, dict) or "id" not in gal:
            raise SpecError("gallery needs an 'id'", "gallery")
        try:
            return build_gallery(gal["id"], gal.get("params") or {}, grid)
        except ValueError as exc:
            raise SpecError(str(exc), "gallery") from None
    for key in ("controls", "coefficients"):
        if key not in doc:
            raise SpecError(f"missing field '{key}' (or give 'gallery')")
    ctrl = doc["controls"]
    try:
        controls = ControlSet(ctrl["points"], ctrl.get("k0"), ctrl.get("labels"))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(str(exc), "controls") from None
    coeff = doc["coefficients"]
    n, k, d = grid.size, len(controls), grid.dim
    tables = {}
    for name, shape in (("a", (n, k, d)), ("b", (n, k, d)), ("L", (n, k))):
        if name not in coeff:
            raise SpecError("missing table", f"coefficients.{name}")
        try:
            arr = np.asarray(coeff[name], dtype=float).ravel()
        except (TypeError, ValueError) as exc:
            raise SpecError(str(exc), f"coefficients.{name}") from None
        if arr.size != math.prod(shape):
            raise SpecError(f"expected {math.prod(shape)} numbers, got {arr.size}", f"coefficients.{name}")
        tables[name] = arr.reshape(shape)
    try:
        return EllipticProblem(grid, controls, tables["a"], tables["b"], tables["L"])
    except ValueError as exc:
        raise SpecError(str(exc), "coefficients") from None


def _parse_grid(obj) -> TorusGrid:
    if not isinstance(obj, dict):
        raise SpecError("missing or malformed object", "grid")
    try:
        return TorusGrid(int(obj["dim"]), int(obj["n"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(str(exc), "grid") from None


def to_spec(problem: EllipticProblem, tabulated: bool = True) -> str:
    """Serialize to the JSON spec format; ``tabulated=False`` keeps the gallery reference."""
    doc: dict[str, Any] = {"grid": {"dim": problem.grid.dim, "n": problem.grid.n_per_axis}}
    if not tabulated and problem.source is not None:
        doc["gallery"] = {"id": problem.source["id"], "params": problem.source["params"]}
        return json.dumps(doc, indent=1)
    ctrl: dict[str, Any] = {
        "points": problem.controls.points.tolist(),
        "k0": problem.controls.k0_mask.tolist(),
    }
    if problem.controls.labels is not None:
        ctrl["labels"] = list(problem.controls.labels)
    doc["controls"] = ctrl
    doc["coefficients"] = {
        "a": problem.a.ravel().tolist(),
        "b": problem.b.ravel().tolist(),
        "L": problem.L.ravel().tolist(),
    }
    return json.dumps(doc)


def problems_equal(p: EllipticProblem, q: EllipticProblem) -> bool:
    return (
        p.grid == q.grid
        and np.array_equal(p.controls.points, q.controls.points)
        and np.array_equal(p.controls.k0_mask, q.controls.k0_mask)
        and all(np.array_equal(getattr(p, t), getattr(q, t)) for t in "abL")
    )


def two_basins(n: int = 8, cost_gap: float = 1.0) -> EllipticProblem:
    """Non-ergodic 1-D example: two absorbing points with different costs.

    Points drift right until they hit index n/2 - 1 or n - 1, where the drift
    vanishes.  The two basins never communicate, so lambda * v^lambda keeps
    an oscillation of ``cost_gap``.
    """
    grid = TorusGrid(1, n)
    half = n // 2
    b = np.ones(n)
    b[[half - 1, n - 1]] = 0.0
    L = np.zeros(n)
    L[n - 1] = cost_gap
    L[half:n - 1] = cost_gap
    return EllipticProblem(grid, ControlSet([[0.0]]), np.zeros((n, 1, 1)), b[:, None, None], L[:, None])
