"""Policy iteration for the discounted problem and Howard iteration for the ergodic one.

Sign conventions: the discounted equation is lambda v + F_h[v] = 0 and the
ergodic one F_h[u] = c, with F_h[u] = max_alpha (B_alpha u - L).  Hence v is
the minimal discounted cost and -c is the minimal long-run average cost.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .generator import DiscreteGenerator, apply_F, bellman_values, build_generator, greedy_policy, rounding_floor, tie_tolerance
from .grid import GridFunction, sup_norm
from .problem import EllipticProblem


class SolverError(RuntimeError):
    """Iteration failed; ``best`` carries the last iterate when available."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ErgodicityError(SolverError):
    pass


@dataclass
class DiscountedSolution:
    lam: float
    v: GridFunction
    policy: np.ndarray = field(repr=False)
    residual: float
    iterations: int

    @property
    def min_normalized(self) -> GridFunction:
        """v - min v, the normalization used in the classical subsequence argument."""
        return self.v - self.v.values.min()


@dataclass
class ErgodicSolution:
    c: float
    u: GridFunction
    policy: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    x0: int = 0


def _gen(problem, gen):
    return build_generator(problem) if gen is None else gen


def policy_evaluate(gen: DiscreteGenerator, problem: EllipticProblem, policy, lam: float,
                    refine: int = 3) -> GridFunction:
    """Solve (lam I + B_policy) u = L_policy by dense LU.

    The condition number grows like 1/lam along the constants, and the
    assembled diagonal fl(sum of weights) leaves row sums of order 1e-14,
    which acts as a spurious extra discount.  Both are removed by iterative
    refinement whose residual uses the neighbor-difference form (exact on
    constants) in extended precision.
    """
    if not lam > 0:
        raise ValueError(f"policy_evaluate needs lambda > 0, got {lam}; use the ergodic solver for 0")
    policy = np.asarray(policy)
    n = problem.n_points
    M = gen.policy_matrix(policy).toarray()
    M[np.diag_indices(n)] += lam
    rhs = problem.L[np.arange(n), policy]
    lu = scipy.linalg.lu_factor(M, check_finite=False)
    u = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
    if refine:
        w = gen.weights[policy, np.arange(n)].astype(np.longdouble)  # (N, slots)
        rx = rhs.astype(np.longdouble)
        lx = np.longdouble(lam)
        ux = u.astype(np.longdouble)
        for _ in range(refine):
            diffs = ux[None, :] - ux[gen.neighbors]
            r = rx - lx * ux - np.einsum("nj,jn->n", w, diffs)
            ux = ux + scipy.linalg.lu_solve(lu, r.astype(float), check_finite=False)
        u = ux.astype(float)
    return GridFunction(problem.grid, u)


def residual_discounted(problem: EllipticProblem, v, lam: float, gen: DiscreteGenerator | None = None) -> float:
    gen = _gen(problem, gen)
    vals = v.values if isinstance(v, GridFunction) else np.asarray(v, float)
    return sup_norm(lam * vals + apply_F(gen, problem, vals).values)


def solve_discounted(
    problem: EllipticProblem,
    lam: float,
    tol: float = 1e-10,
    init_policy=None,
    gen: DiscreteGenerator | None = None,
    max_iter: int = 500,
) -> DiscountedSolution:
    """Policy iteration; the returned policy breaks argmax ties by lowest control index.

    During the iteration a near-tied current action is kept, so rounding noise
    in the evaluation cannot make two tied policies alternate forever.
    """
    if not lam > 0:
        raise ValueError(f"discount must be positive, got {lam}")
    gen = _gen(problem, gen)
    n = problem.n_points
    policy = np.zeros(n, dtype=int) if init_policy is None else np.asarray(init_policy, dtype=int).copy()
    v = None
    for it in range(1, max_iter + 1):
        v = policy_evaluate(gen, problem, policy, lam)
        values = bellman_values(gen, problem.L, v)
        ties = tie_tolerance(gen, problem.L, v)
        new = greedy_policy(values, current=policy, atol=ties)
        if np.array_equal(new, policy):
            res = residual_discounted(problem, v, lam, gen)
            if res > max(tol * max(1.0, sup_norm(problem.L)), rounding_floor(gen, v)):
                raise SolverError(f"policy is stable but residual {res:.3e} exceeds tol {tol:.1e}", v)
            return DiscountedSolution(lam, v, greedy_policy(values, atol=ties), res, it)
        policy = new
    raise SolverError(f"policy iteration did not stabilize in {max_iter} steps", v)


def _evaluate_average(gen, problem, policy, x0):
    """Solve B_policy u - c = L_policy with u(x0) = 0 for (u, c)."""
    n = problem.n_points
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = gen.policy_matrix(policy).toarray()
    M[:n, n] = -1.0
    M[n, x0] = 1.0
    rhs = np.append(problem.L[np.arange(n), policy], 0.0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            sol = scipy.linalg.solve(M, rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        # several closed classes: usable only if they agree on the average cost
        sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        if np.max(np.abs(M @ sol - rhs)) > 1e-9 * max(1.0, np.max(np.abs(rhs))):
            raise ErgodicityError(
                "discrete ergodicity failure; use vanishing-discount route and inspect spread"
            ) from None
        sol[:n] -= sol[x0]
    return sol[:n], float(sol[n])


def solve_ergodic_howard(
    problem: EllipticProblem,
    tol: float = 1e-10,
    x0: int = 0,
    init_policy=None,
    gen: DiscreteGenerator | None = None,
    max_iter: int = 500,
    restart_lambdas=(1e-2, 1e-4, 1e-6),
) -> ErgodicSolution:
    """Average-cost policy iteration normalized by u(x0) = 0.

    The improvement step keeps the current action when it is among the
    maximizers, which is what makes the average-cost iteration terminate.
    If an iterate is multichain with disagreeing gains, the iteration is
    restarted from the discounted-optimal policy at each of
    ``restart_lambdas`` in turn (for small discounts that policy is
    average-optimal, hence a valid unichain start when one exists).
    """
    gen = _gen(problem, gen)
    n = problem.n_points
    if not 0 <= x0 < n:
        raise ValueError(f"x0 = {x0} out of range")
    start = np.zeros(n, dtype=int) if init_policy is None else np.asarray(init_policy, dtype=int)
    try:
        return _howard(gen, problem, start, tol, x0, max_iter)
    except ErgodicityError as first:
        for lam in restart_lambdas:
            warm = solve_discounted(problem, lam, gen=gen).policy
            try:
                return _howard(gen, problem, warm, tol, x0, max_iter)
            except ErgodicityError:
                continue
        raise first


def _howard(gen, problem, policy, tol, x0, max_iter):
    policy = policy.copy()
    u = None
    for it in range(1, max_iter + 1):
        u, c = _evaluate_average(gen, problem, policy, x0)
        new = greedy_policy(bellman_values(gen, problem.L, u), current=policy, atol=tie_tolerance(gen, problem.L, u))
        if np.array_equal(new, policy):
            res = sup_norm(apply_F(gen, problem, u).values - c)
            if res > max(tol * max(1.0, sup_norm(problem.L)), rounding_floor(gen, u)):
                raise ErgodicityError(
                    f"Howard iteration stalled with residual {res:.3e}; "
                    "discrete ergodicity failure; use vanishing-discount route and inspect spread"
                )
            u = u.copy()
            u[x0] = 0.0
            return ErgodicSolution(c, GridFunction(problem.grid, u), policy, res, it, x0)
        policy = new
    raise SolverError(f"Howard iteration did not stabilize in {max_iter} steps", u)


@dataclass
class ComparisonReport:
    lam: float
    trials: int
    max_distance: float
    iterations: list[int]


def comparison_probe(problem: EllipticProblem, lam: float, trials: int = 5, seed: int = 0,
                     gen: DiscreteGenerator | None = None) -> ComparisonReport:
    """Solve from random initial policies; the fixed point should not depend on the start."""
    if not lam > 0:
        raise ValueError(f"discount must be positive, got {lam}")
    gen = _gen(problem, gen)
    rng = np.random.default_rng(seed)
    sols = [
        solve_discounted(problem, lam, init_policy=rng.integers(problem.n_controls, size=problem.n_points), gen=gen)
        for _ in range(trials)
    ]
    dist = 0.0
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            dist = max(dist, sup_norm(sols[i].v.values - sols[j].v.values))
    return ComparisonReport(lam, trials, dist, [s.iterations for s in sols])
