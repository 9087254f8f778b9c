"""Upwind discretization of L_alpha = -tr a D^2 - b . D and the Bellman operator.

Each B_alpha is stored as nonnegative neighbor weights:
(B_alpha u)(x) = sum_j w_j(x, alpha) * (u(x) - u(nbr_j(x))),
so rows sum to zero and off-diagonals are <= 0 by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .grid import GridFunction, TorusGrid
from .problem import EllipticProblem

MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteGenerator:
    grid: TorusGrid
    weights: np.ndarray = field(repr=False)  # (n_controls, n_points, 2*dim), >= 0
    neighbors: np.ndarray = field(repr=False)  # (2*dim, n_points); slot 2i is +e_i, 2i+1 is -e_i

    @property
    def n_controls(self) -> int:
        return self.weights.shape[0]

    def apply(self, u) -> np.ndarray:
        """B_alpha u for every control at once, shape (n_controls, n_points)."""
        u = _vals(u)
        diffs = u[None, :] - u[self.neighbors]  # (2d, N)
        return np.einsum("knj,jn->kn", self.weights, diffs)

    def apply_control(self, alpha: int, u) -> np.ndarray:
        u = _vals(u)
        return np.einsum("nj,jn->n", self.weights[alpha], u[None, :] - u[self.neighbors])

    def apply_policy(self, policy, u) -> np.ndarray:
        u = _vals(u)
        w = self.weights[np.asarray(policy), np.arange(self.grid.size)]
        return np.einsum("nj,jn->n", w, u[None, :] - u[self.neighbors])

    def transpose_apply(self, mu) -> np.ndarray:
        """(B^T mu)(y) = sum_{x, alpha} mu(x, alpha) B_alpha(x, y); mu is [point, control]."""
        mu = np.asarray(mu, dtype=float)
        flow = np.einsum("nk,knj->nj", mu, self.weights)  # (N, 2d)
        out = flow.sum(axis=1)
        for j in range(self.neighbors.shape[0]):
            out -= np.bincount(self.neighbors[j], weights=flow[:, j], minlength=self.grid.size)
        return out

    def matrix(self, alpha: int) -> sp.csr_matrix:
        return self._assemble(self.weights[alpha])

    def policy_matrix(self, policy) -> sp.csr_matrix:
        return self._assemble(self.weights[np.asarray(policy), np.arange(self.grid.size)])

    def _assemble(self, w) -> sp.csr_matrix:
        n = self.grid.size
        rows = np.concatenate([np.arange(n)] + [np.arange(n)] * self.neighbors.shape[0])
        cols = np.concatenate([np.arange(n)] + list(self.neighbors))
        vals = np.concatenate([w.sum(axis=1)] + [-w[:, j] for j in range(w.shape[1])])
        return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _vals(u) -> np.ndarray:
    return np.asarray(u.values if isinstance(u, GridFunction) else u, dtype=float)


def build_generator(problem: EllipticProblem) -> DiscreteGenerator:
    grid = problem.grid
    h = grid.h
    nbr = grid.neighbor_table.reshape(2 * grid.dim, grid.size)
    a = np.transpose(problem.a, (1, 0, 2))  # (K, N, d)
    b = np.transpose(problem.b, (1, 0, 2))
    w = np.empty(a.shape[:2] + (2 * grid.dim,))
    w[..., 0::2] = a / h**2 + np.maximum(b, 0.0) / h
    w[..., 1::2] = a / h**2 + np.maximum(-b, 0.0) / h
    w.flags.writeable = False
    return DiscreteGenerator(grid, w, nbr)


def bellman_values(gen: DiscreteGenerator, L, u) -> np.ndarray:
    """Per-control affine pieces (B_alpha u)(x) - L(x, alpha), shape (n_points, n_controls)."""
    return gen.apply(u).T - np.asarray(L)


def apply_F(gen: DiscreteGenerator, problem: EllipticProblem, u, L=None) -> GridFunction:
    """F_h[u](x) = max_alpha ((B_alpha u)(x) - L(x, alpha)).

    Passing ``L`` evaluates the same operator with a substituted cost table.
    """
    table = problem.L if L is None else L
    return GridFunction(problem.grid, bellman_values(gen, table, u).max(axis=1))


ROUNDING_FACTOR = 64.0


def rounding_floor(gen: DiscreteGenerator, u) -> float:
    """64 eps * max row weight * |u|: the cancellation error of B_alpha u when u is large."""
    return ROUNDING_FACTOR * np.finfo(float).eps * float(gen.weights.sum(axis=2).max() * np.max(np.abs(_vals(u))))


def tie_tolerance(gen: DiscreteGenerator, L, u, rtol: float = 1e-12) -> float:
    return max(rtol * max(1.0, float(np.max(np.abs(L)))), rounding_floor(gen, u))


def greedy_policy(values: np.ndarray, current=None, rtol: float = 1e-12, atol: float = 0.0) -> np.ndarray:
    """Argmax over controls per point with a tolerance for ties.

    Among near-maximizers the current action is kept if given, otherwise the
    lowest control index wins.
    """
    best = values.max(axis=1, keepdims=True)
    tol = np.maximum(atol, rtol * np.maximum(1.0, np.abs(values).max(axis=1, keepdims=True)))
    near = values >= best - tol
    policy = np.argmax(near, axis=1)
    if current is not None:
        current = np.asarray(current)
        keep = near[np.arange(len(current)), current]
        policy = np.where(keep, current, policy)
    return policy


@dataclass
class MonotoneReport:
    ok: bool
    worst_row_sum: float
    worst_sign: float
    location: tuple | None = None

    def __str__(self):
        status = "pass" if self.ok else "FAIL"
        where = f" at (control, row, col) = {self.location}" if self.location else ""
        return (
            f"monotonicity {status}: max |row sum| = {self.worst_row_sum:.3e}, "
            f"worst sign violation = {self.worst_sign:.3e}{where}"
        )


def validate_monotone(gen, tol: float = MONOTONE_TOL) -> MonotoneReport:
    """Check zero row sums and the M-matrix sign pattern.

    ``gen`` is a DiscreteGenerator or a sequence of square matrices.
    """
    if isinstance(gen, DiscreteGenerator):
        mats = [gen.matrix(k).toarray() for k in range(gen.n_controls)]
    else:
        mats = [m.toarray() if sp.issparse(m) else np.atleast_2d(np.asarray(m, float)) for m in gen]
    worst_sum, worst_sign, loc = 0.0, 0.0, None
    for k, M in enumerate(mats):
        sums = np.abs(M.sum(axis=1))
        worst_sum = max(worst_sum, float(sums.max(initial=0.0)))
        off = M - np.diag(np.diag(M))
        # positive off-diagonal or negative diagonal
        viol = np.maximum(off, 0.0) + np.diag(np.maximum(-np.diag(M), 0.0))
        if viol.size and viol.max() > worst_sign:
            worst_sign = float(viol.max())
            r, c = np.unravel_index(np.argmax(viol), viol.shape)
            loc = (k, int(r), int(c))
        if loc is None and sums.size and sums.max() > tol:
            loc = (k, int(np.argmax(sums)), None)
    ok = worst_sum <= tol and worst_sign <= tol
    return MonotoneReport(ok, worst_sum, worst_sign, None if ok else loc)
