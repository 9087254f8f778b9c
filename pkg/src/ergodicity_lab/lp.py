"""Dense two-phase primal simplex for min c.x s.t. Ax = b, x >= 0.

Degenerate problems (Dirac-type occupation measures are full of them) are
protected against cycling by Bland's rule.  By default it is switched on
whenever progress stalls; rule="bland" uses it for every pivot, which is
exact in spirit but slow and fragile on the larger gallery LPs.
The tableau is periodically rebuilt from the original data, and the final
primal and dual vectors are recomputed from the optimal basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

PIVOT_TOL = 1e-9
BREAKDOWN_TOL = 1e-11
OPT_TOL = 1e-10
REFACTOR_EVERY = 64
STALL = 25
FEAS_TOL = 1e-11
PIVOT_SHARE = 1e-3
SAFE_PIVOT = 1e-6


class LPBreakdownError(RuntimeError):
    pass


@dataclass(frozen=True)
class StandardFormLP:
    A: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    cost: np.ndarray = field(repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        rhs = np.array(self.rhs, dtype=float).ravel()
        cost = np.array(self.cost, dtype=float).ravel()
        m, n = A.shape
        if rhs.shape != (m,) or cost.shape != (n,):
            raise ValueError(f"shape mismatch: A {A.shape}, rhs {rhs.shape}, cost {cost.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(rhs)) and np.all(np.isfinite(cost))):
            raise ValueError("LP data must be finite")
        for name, arr in (("A", A), ("rhs", rhs), ("cost", cost)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def shape(self):
        return self.A.shape


@dataclass
class LPSolution:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray = field(repr=False)
    objective: float
    dual: np.ndarray = field(repr=False)
    basis: list[int] = field(repr=False)
    iterations: int = 0


class _Tableau:
    """Rows of B^{-1}[A | b] plus a reduced-cost row, over an active row set."""

    def __init__(self, A, b, basis):
        self.A = A  # original (sign-normalized) columns including artificials
        self.b = b
        self.rows = np.arange(A.shape[0])
        self.basis = list(basis)
        self.pivots = 0
        self.refactor()

    def refactor(self, clip=True):
        AB = self.A[np.ix_(self.rows, self.basis)]
        try:
            if np.linalg.cond(AB) > 1.0 / BREAKDOWN_TOL:
                raise np.linalg.LinAlgError
            self.T = np.linalg.solve(AB, np.column_stack([self.A[self.rows], self.b[self.rows]]))
        except np.linalg.LinAlgError:
            raise LPBreakdownError(
                f"basis matrix singular at refactorization after {self.pivots} pivots "
                f"(basis {self.basis[:8]}...)"
            ) from None
        self.T[np.abs(self.T) < 1e-14] = 0.0
        if clip:
            self.T[:, -1] = np.maximum(self.T[:, -1], 0.0)

    def pivot(self, r, j, phase):
        piv = self.T[r, j]
        if abs(piv) < BREAKDOWN_TOL:
            raise LPBreakdownError(f"pivot {piv:.3e} below {BREAKDOWN_TOL} in phase {phase} at row {r}, column {j}")
        self.T[r] /= piv
        col = self.T[:, j].copy()
        col[r] = 0.0
        self.T -= np.outer(col, self.T[r])
        self.basis[r] = j
        self.pivots += 1
        if self.pivots % REFACTOR_EVERY == 0:
            self.refactor()

    def reduced_costs(self, cost):
        cb = cost[self.basis]
        return cost - cb @ self.T[:, :-1]

    def run(self, cost, allowed, phase, max_pivots, rule):
        """Simplex iterations; returns 'optimal' or 'unbounded'.

        rule="bland": smallest-index entering and leaving choices throughout.
        An entering column whose best pivot is below SAFE_PIVOT of its
        largest entry is passed over for the next candidate in rule order;
        only if every candidate is unsafe is the least-bad one taken.
        rule="hybrid": Dantzig's most-negative reduced cost with the largest
        pivot among ratio ties, switching to Bland after STALL consecutive
        degenerate pivots and back after the first strict improvement.
        """
        scale = max(1.0, float(np.max(np.abs(cost))))
        stall = 0
        while True:
            d = self.reduced_costs(cost)
            neg = (d < -OPT_TOL * scale) & allowed
            if not neg.any():
                return "optimal"
            bland = rule == "bland" or stall >= STALL
            order = np.flatnonzero(neg)
            if not bland:
                order = order[np.argsort(d[order], kind="stable")]
            choice, fallback = None, None
            for j in order:
                col = self.T[:, j]
                cmax = max(1.0, float(np.max(np.abs(col))))
                pos = np.flatnonzero(col > PIVOT_TOL * cmax)
                if pos.size == 0:
                    return "unbounded"
                r, best = self._leaving_row(col, pos, bland)
                rel = col[r] / cmax
                if rel >= SAFE_PIVOT:
                    choice = (int(j), r, best)
                    break
                if fallback is None or rel > fallback[0]:
                    fallback = (rel, int(j), r, best)
            j, r, best = choice if choice is not None else fallback[1:]
            stall = stall + 1 if best <= 1e-12 else 0
            self.pivot(r, j, phase)
            if self.pivots > max_pivots:
                raise LPBreakdownError(f"pivot limit {max_pivots} exceeded in phase {phase}")

    def _leaving_row(self, col, pos, bland):
        """Two-pass (Harris) ratio test.

        Pass one bounds the step with right-hand sides relaxed by FEAS_TOL;
        pass two picks among rows within that bound, restricted to pivots at
        least PIVOT_SHARE of the largest candidate, the smallest basis index
        (bland) or the largest pivot.  Rejecting small pivots keeps noise-level
        tableau entries out of the basis.
        """
        rhs = np.maximum(self.T[pos, -1], 0.0)
        bound = ((rhs + FEAS_TOL) / col[pos]).min()
        ratios = rhs / col[pos]
        cand = pos[ratios <= bound]
        big = cand[col[cand] >= PIVOT_SHARE * col[cand].max()]
        if bland:
            r = int(big[np.argmin(np.asarray(self.basis)[big])])
        else:
            r = int(big[np.argmax(col[big])])
        return r, float(max(self.T[r, -1], 0.0) / col[r])

    def dual_run(self, cost, allowed, max_pivots):
        """Dual simplex from a dual-feasible basis; Bland-style choices.

        Returns 'optimal' or 'infeasible'.
        """
        scale = max(1.0, float(np.max(np.abs(self.b))))
        while True:
            rhs = self.T[:, -1]
            bad = np.flatnonzero(rhs < -1e-12 * scale)
            if bad.size == 0:
                self.T[:, -1] = np.maximum(rhs, 0.0)
                return "optimal"
            r = int(bad[np.argmin(np.asarray(self.basis)[bad])])
            row = self.T[r, :-1]
            cand = np.flatnonzero((row < -PIVOT_TOL * max(1.0, float(np.max(np.abs(row))))) & allowed)
            if cand.size == 0:
                return "infeasible"
            d = np.maximum(self.reduced_costs(cost)[cand], 0.0)
            ratios = d / -row[cand]
            j = int(cand[np.flatnonzero(ratios <= ratios.min() + 1e-12 * max(1.0, ratios.min()))[0]])
            self.pivot(r, j, "dual")
            if self.pivots > max_pivots:
                raise LPBreakdownError(f"pivot limit {max_pivots} exceeded in the dual simplex")

    def set_rhs(self, b):
        self.b = b
        self.refactor(clip=False)

    def drop_rows(self, keep):
        self.rows = self.rows[keep]
        self.basis = [self.basis[i] for i in np.flatnonzero(keep)]
        self.T = self.T[keep]


def _independent_rows(A) -> np.ndarray:
    """Indices of a maximal set of linearly independent rows (rank-revealing QR)."""
    if A.size == 0:
        return np.arange(A.shape[0])
    _, R, perm = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-10 * max(1.0, diag.max(initial=0.0))))
    return np.sort(perm[:rank])


def _project_rows(A, b, keep):
    """Right-hand sides the dropped rows must have for the system to be consistent."""
    coef, *_ = np.linalg.lstsq(A[keep].T, A[~keep].T, rcond=None)
    return coef.T @ b[keep]


def simplex_solve(lp: StandardFormLP, max_pivots: int | None = None, rule: str = "hybrid",
                  perturb: bool = True) -> LPSolution:
    """Two-phase primal simplex; see ``_Tableau.run`` for the pivoting rules.

    Linearly dependent equality rows are removed up front (rank-revealing
    QR) and, as a fallback, when an artificial cannot leave the basis;
    their dual values are reported as zero.

    With ``perturb`` the right-hand side is moved to b + A delta for a fixed
    pseudo-random delta > 0 of size ~1e-6 / n.  Feasibility is preserved
    (x + delta is feasible whenever x is) while the zero right-hand sides
    that make occupation-measure LPs stall are broken up.  The optimal basis
    of the perturbed problem is dual feasible for the original one and is
    repaired with a few dual simplex pivots.  The whole procedure is
    deterministic.
    """
    if rule not in ("bland", "hybrid"):
        raise ValueError(f"unknown pivot rule {rule!r}")
    A0, b0, c = lp.A, lp.rhs, lp.cost
    m, n = A0.shape
    if max_pivots is None:
        max_pivots = 50 * (m + n) + 1000
    b_work = b0.copy()
    if perturb and n:
        delta = (1e-6 / n) * (0.5 + np.random.default_rng(20240607).random(n))
        b_work = b0 + A0 @ delta
    sign = np.where(b_work < 0, -1.0, 1.0)
    A = np.hstack([A0 * sign[:, None], np.eye(m)])
    b = b0 * sign
    b_work = b_work * sign
    bscale = max(1.0, float(np.max(np.abs(b), initial=0.0)))

    tab = _Tableau(A, b_work, range(n, n + m))
    independent = _independent_rows(A0)
    if independent.size < m:
        keep = np.zeros(m, bool)
        keep[independent] = True
        if np.max(np.abs(b[~keep] - _project_rows(A[:, :n], b, keep)), initial=0.0) > 1e-9 * bscale:
            return LPSolution("infeasible", np.zeros(n), np.nan, np.zeros(m), [], 0)
        tab.drop_rows(keep)
    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    tab.run(phase1_cost, np.ones(n + m, bool), 1, max_pivots, rule)
    infeas = float(phase1_cost[tab.basis] @ tab.T[:, -1])
    if infeas > 1e-9 * bscale:
        return LPSolution("infeasible", np.zeros(n), np.nan, np.zeros(m), [], tab.pivots)

    # drive artificials out of the basis; rows where that is impossible are redundant
    keep = np.ones(len(tab.rows), bool)
    for r in range(len(tab.rows)):
        if tab.basis[r] < n:
            continue
        row = tab.T[r, :n]
        nz = np.flatnonzero(np.abs(row) > PIVOT_TOL * max(1.0, float(np.max(np.abs(row), initial=0.0))))
        if nz.size:
            tab.pivot(r, int(nz[0]), 1)
        else:
            keep[r] = False
    if not keep.all():
        tab.drop_rows(keep)
        tab.refactor()

    cost = np.concatenate([c, np.zeros(m)])
    allowed = np.concatenate([np.ones(n, bool), np.zeros(m, bool)])
    status = tab.run(cost, allowed, 2, max_pivots, rule)
    if status == "unbounded":
        return LPSolution("unbounded", np.zeros(n), -np.inf, np.zeros(m), list(tab.basis), tab.pivots)
    if perturb:
        tab.set_rhs(b)
        if tab.dual_run(cost, allowed, max_pivots) == "infeasible":
            return LPSolution("infeasible", np.zeros(n), np.nan, np.zeros(m), [], tab.pivots)

    # clean primal and dual from the optimal basis
    rows, basis = tab.rows, tab.basis
    AB = A[np.ix_(rows, basis)]
    xb = np.linalg.solve(AB, b[rows])
    x = np.zeros(n + m)
    x[basis] = xb
    x = np.where(np.abs(x) < 1e-13, 0.0, x)[:n]
    y_rows = np.linalg.solve(AB.T, cost[basis])
    dual = np.zeros(m)
    dual[rows] = y_rows
    dual *= sign
    return LPSolution("optimal", x, float(c @ x), dual, [int(j) for j in basis], tab.pivots)


@dataclass
class CertificateReport:
    ok: bool
    primal_residual: float
    negativity: float
    dual_infeasibility: float
    gap: float
    tol: float

    def failures(self) -> list[str]:
        out = []
        if self.primal_residual > self.tol or self.negativity > self.tol:
            out.append("primal")
        if self.dual_infeasibility > self.tol:
            out.append("dual")
        if self.gap > self.tol:
            out.append("gap")
        return out

    def __str__(self):
        return (
            f"{'pass' if self.ok else 'FAIL ' + ','.join(self.failures())}: "
            f"|Ax-b|={self.primal_residual:.2e} min(x)<0 by {self.negativity:.2e} "
            f"dual infeas={self.dual_infeasibility:.2e} gap={self.gap:.2e}"
        )


def check_certificate(lp: StandardFormLP, sol: LPSolution, tol: float = 1e-8) -> CertificateReport:
    """Recompute primal feasibility, dual feasibility and the duality gap."""
    x, y = np.asarray(sol.x, float), np.asarray(sol.dual, float)
    primal = float(np.max(np.abs(lp.A @ x - lp.rhs), initial=0.0))
    neg = float(max(0.0, -x.min(initial=0.0)))
    dual_inf = float(max(0.0, -(lp.cost - y @ lp.A).min(initial=0.0)))
    gap = float(max(abs(sol.objective - y @ lp.rhs), abs(sol.objective - lp.cost @ x)))
    ok = sol.status == "optimal" and max(primal, neg, dual_inf, gap) <= tol
    return CertificateReport(ok, primal, neg, dual_inf, gap, tol)


def dump_lp(lp: StandardFormLP) -> str:
    """Plain-text LP: 'm n', cost row, then m rows of 'a_1 ... a_n | rhs'."""
    m, n = lp.shape
    lines = [f"{m} {n}", " ".join(format(v, ".17g") for v in lp.cost)]
    for i in range(m):
        lines.append(" ".join(format(v, ".17g") for v in lp.A[i]) + " | " + format(lp.rhs[i], ".17g"))
    return "\n".join(lines) + "\n"


def load_lp(text: str) -> StandardFormLP:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    m, n = (int(t) for t in lines[0].split())
    cost = [float(t) for t in lines[1].split()]
    A, rhs = [], []
    for ln in lines[2 : 2 + m]:
        left, right = ln.split("|")
        A.append([float(t) for t in left.split()])
        rhs.append(float(right))
    lp = StandardFormLP(np.array(A).reshape(m, n), rhs, cost)
    return lp
