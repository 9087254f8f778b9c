"""Occupation-measure LPs for the ergodic and discounted problems.

Variables are weights mu(x, alpha) >= 0, flattened point-major
(column ``x * n_controls + alpha``).  The dual cone of admissible test costs
is represented only through the equality constraints generated by grid
functions: on a finite grid every function is a legitimate test function,
so "<mu, B psi> = 0 for all psi" is the whole closing condition.

Ergodic LP:     min <mu, L>  s.t.  B^T mu = 0,                     sum mu = 1
Discounted LP:  min <mu, L>  s.t.  lam m + B^T mu = lam delta_z,   sum mu = 1
where m(y) = sum_alpha mu(y, alpha).  The optimal values are -c and
lam v^lam(z) respectively.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .generator import DiscreteGenerator, build_generator
from .grid import GridFunction
from .hjb import ErgodicityError, solve_discounted, solve_ergodic_howard
from .lp import LPSolution, StandardFormLP, check_certificate, simplex_solve
from .problem import EllipticProblem

CLIP = 1e-10


class MatherError(RuntimeError):
    pass


@dataclass(frozen=True)
class Context:
    """Ergodic when ``lam`` is None, otherwise discounted at (z, lam)."""

    lam: float | None = None
    z: int | None = None

    @property
    def ergodic(self) -> bool:
        return self.lam is None

    def describe(self) -> str:
        return "ergodic" if self.ergodic else f"discounted(z={self.z}, lambda={self.lam!r})"


ERGODIC = Context()


def discounted(z: int, lam: float) -> Context:
    if not lam > 0:
        raise ValueError(f"discounted context needs lambda > 0, got {lam}")
    return Context(float(lam), int(z))


@dataclass
class OccupationMeasure:
    weights: np.ndarray = field(repr=False)  # (n_points, n_controls)
    total_mass: float

    @classmethod
    def from_vector(cls, x, n_points, n_controls, clip: float = CLIP):
        w = np.asarray(x, float).reshape(n_points, n_controls).copy()
        w[w < clip] = 0.0
        return cls(w, float(w.sum()))

    @classmethod
    def dirac(cls, n_points, n_controls, point, control):
        w = np.zeros((n_points, n_controls))
        w[point, control] = 1.0
        return cls(w, 1.0)

    def marginal(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def support(self) -> list[tuple[int, int, float]]:
        pts, ctl = np.nonzero(self.weights)
        return [(int(p), int(c), float(self.weights[p, c])) for p, c in zip(pts, ctl)]


@dataclass
class DualityCertificate:
    lp_value: float
    pde_value: float
    gap: float
    measure: OccupationMeasure
    context: Context
    closing_residual: float
    lp_report: object = field(default=None, repr=False)
    lp_solution: LPSolution | None = field(default=None, repr=False)


def _flow_matrix(gen: DiscreteGenerator) -> np.ndarray:
    """Dense matrix M with M[y, x*K + alpha] = B_alpha(x, y)."""
    k, n, s = gen.weights.shape
    M = np.zeros((n, n, k))  # [y, x, alpha]
    w = np.transpose(gen.weights, (1, 0, 2))  # (x, alpha, slot)
    M[np.arange(n), np.arange(n), :] = w.sum(axis=2)
    for j in range(s):
        np.add.at(M, (gen.neighbors[j], np.arange(n)), -w[:, :, j])
    return M.reshape(n, n * k)


def build_ergodic_lp(problem: EllipticProblem, gen: DiscreteGenerator | None = None) -> StandardFormLP:
    gen = build_generator(problem) if gen is None else gen
    n = problem.n_points
    A = np.vstack([_flow_matrix(gen), np.ones((1, n * problem.n_controls))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    return StandardFormLP(A, rhs, problem.L.ravel())


def build_discounted_lp(problem: EllipticProblem, gen: DiscreteGenerator | None, z: int, lam: float) -> StandardFormLP:
    if not lam > 0:
        raise ValueError(f"discounted LP needs lambda > 0, got {lam}")
    gen = build_generator(problem) if gen is None else gen
    n, k = problem.n_points, problem.n_controls
    if not 0 <= z < n:
        raise ValueError(f"z = {z} out of range")
    flow = _flow_matrix(gen)
    flow += lam * np.repeat(np.eye(n), k, axis=1)
    # the mass row is implied by the flow rows; kept for conditioning and clearer reports
    A = np.vstack([flow, np.ones((1, n * k))])
    rhs = np.zeros(n + 1)
    rhs[z] = lam
    rhs[-1] = 1.0
    return StandardFormLP(A, rhs, problem.L.ravel())


def closing_residual(gen: DiscreteGenerator, mu, lam: float | None = None, z: int | None = None) -> float:
    """||B^T mu||_inf, or ||lam m + B^T mu - lam delta_z||_inf in the discounted case."""
    w = mu.weights if isinstance(mu, OccupationMeasure) else np.asarray(mu, float)
    r = gen.transpose_apply(w)
    if lam is not None:
        r = r + lam * w.sum(axis=1)
        r[z] -= lam
    return float(np.max(np.abs(r)))


def pair(mu, g) -> float:
    """<mu, g>; a grid function is broadcast over controls."""
    w = mu.weights if isinstance(mu, OccupationMeasure) else np.asarray(mu, float)
    g = g.values if isinstance(g, GridFunction) else np.asarray(g, float)
    if g.ndim == 1:
        if g.shape[0] != w.shape[0]:
            raise ValueError(f"grid function has {g.shape[0]} points, measure has {w.shape[0]}")
        return float(w.sum(axis=1) @ g)
    if g.shape != w.shape:
        raise ValueError(f"shape mismatch: measure {w.shape}, table {g.shape}")
    return float(np.sum(w * g))


def solve_mather(
    problem: EllipticProblem,
    context: Context = ERGODIC,
    gen: DiscreteGenerator | None = None,
    pde_value: float | None = None,
    rule: str = "hybrid",
) -> DualityCertificate:
    """Solve the occupation-measure LP and pair it with the PDE-side value.

    The PDE side is -c from Howard iteration (ergodic) or lam v^lam(z) from
    policy iteration (discounted), unless ``pde_value`` is supplied.  If
    Howard fails, pde_value is NaN and the gap is infinite.  ``rule`` is
    passed to the simplex solver.
    """
    gen = build_generator(problem) if gen is None else gen
    if context.ergodic:
        lp = build_ergodic_lp(problem, gen)
    else:
        lp = build_discounted_lp(problem, gen, context.z, context.lam)
    sol = simplex_solve(lp, rule=rule)
    if sol.status != "optimal":
        raise MatherError(f"no closing measure on this grid (LP {sol.status})")
    measure = OccupationMeasure.from_vector(sol.x, problem.n_points, problem.n_controls)
    if pde_value is None:
        if context.ergodic:
            try:
                pde_value = -solve_ergodic_howard(problem, gen=gen).c
            except ErgodicityError:
                pde_value = float("nan")
        else:
            pde_value = context.lam * float(solve_discounted(problem, context.lam, gen=gen).v.values[context.z])
    gap = abs(sol.objective - pde_value) if np.isfinite(pde_value) else float("inf")
    resid = closing_residual(gen, measure, context.lam, context.z)
    return DualityCertificate(
        sol.objective, float(pde_value), gap, measure, context, resid, check_certificate(lp, sol), sol
    )


def indicator_closing_defect(gen: DiscreteGenerator, mu, lam: float | None = None, z: int | None = None) -> float:
    """max over indicator test functions psi = 1_y of the closing defect.

    Computed by applying each B_alpha to each indicator, independently of
    the transposed flow used in ``closing_residual``.
    """
    w = mu.weights if isinstance(mu, OccupationMeasure) else np.asarray(mu, float)
    n = w.shape[0]
    worst = 0.0
    for y in range(n):
        psi = np.zeros(n)
        psi[y] = 1.0
        val = float(np.sum(w * gen.apply(psi).T))
        if lam is not None:
            val += lam * (w.sum(axis=1)[y] - (1.0 if y == z else 0.0))
        worst = max(worst, abs(val))
    return worst
