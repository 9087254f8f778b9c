"""Vanishing-discount driver and the selection checks on its limit.

For a decreasing schedule of discounts the driver solves the discounted
problem, forms w = v^lam + c / lam with the exact critical value c, and
declares convergence from the Cauchy gaps of w.  The limit u0 is then
tested against Mather measures of the problem normalized to c = 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .generator import DiscreteGenerator, apply_F, build_generator
from .grid import GridFunction, oscillation, sup_norm
from .hjb import ErgodicityError, residual_discounted, solve_discounted, solve_ergodic_howard
from .lp import StandardFormLP, simplex_solve
from .mather import ERGODIC, MatherError, OccupationMeasure, build_ergodic_lp, pair, solve_mather
from .problem import EllipticProblem

SPREAD_TOL = 1e-3
GAP_SLACK = 1e-8


def geometric_schedule(k0: int = 0, k1: int = 13) -> list[float]:
    """lam_k = 2^-k for k = k0..k1."""
    if k1 < k0:
        raise ValueError("geometric schedule needs k1 >= k0")
    return [2.0**-k for k in range(k0, k1 + 1)]


def harmonic_schedule(final: float, count: int = 14) -> list[float]:
    """lam_j = 1 / (1 + j s), j = 0..count, with s chosen so the last entry is ``final``."""
    if not 0 < final < 1 or count < 1:
        raise ValueError("harmonic schedule needs 0 < final < 1 and count >= 1")
    step = (1.0 / final - 1.0) / count
    out = [1.0 / (1.0 + j * step) for j in range(count + 1)]
    out[-1] = final
    return out


def parse_schedule(text: str) -> list[float]:
    """'geometric:k0:k1' or 'harmonic:final:count'."""
    kind, *args = text.split(":")
    try:
        if kind == "geometric" and len(args) == 2:
            return geometric_schedule(int(args[0]), int(args[1]))
        if kind == "harmonic" and len(args) == 2:
            return harmonic_schedule(float(args[0]), int(args[1]))
    except ValueError as exc:
        raise ValueError(f"bad schedule {text!r}: {exc}") from None
    raise ValueError(f"bad schedule {text!r}; use geometric:k0:k1 or harmonic:final:count")


def check_schedule(lambdas) -> list[float]:
    lambdas = [float(x) for x in lambdas]
    if not lambdas or any(not x > 0 for x in lambdas):
        raise ValueError("schedule must be nonempty with positive entries")
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("schedule must be strictly decreasing")
    return lambdas


@dataclass
class ScheduleRecord:
    lam: float
    v: GridFunction = field(repr=False)
    c_hat: float
    spread: float
    w: GridFunction = field(repr=False)
    gap_to_prev: float
    residual: float
    iterations: int


@dataclass
class ScheduleReport:
    records: list[ScheduleRecord]
    c: float
    c_source: str
    u0: GridFunction = field(repr=False)
    converged: bool
    spread_ok: bool
    ep_residual: float
    diagnostics: list[str] = field(default_factory=list)

    @property
    def final_spread(self) -> float:
        return self.records[-1].spread

    @property
    def final_gap(self) -> float:
        return self.records[-1].gap_to_prev


def critical_value(problem: EllipticProblem, source: str = "lp", gen: DiscreteGenerator | None = None,
                   diagnostics: list[str] | None = None) -> tuple[float, str]:
    """Exact critical value from the ergodic LP or from Howard iteration."""
    gen = build_generator(problem) if gen is None else gen
    if source == "howard":
        try:
            return solve_ergodic_howard(problem, gen=gen).c, "howard"
        except ErgodicityError as exc:
            msg = f"Howard failed ({exc}); falling back to the ergodic LP"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            if diagnostics is not None:
                diagnostics.append(msg)
    elif source != "lp":
        raise ValueError(f"c_source must be 'lp' or 'howard', got {source!r}")
    cert = solve_mather(problem, ERGODIC, gen, pde_value=float("nan"))
    return -cert.lp_value, "lp"


def run_schedule(
    problem: EllipticProblem,
    lambdas=None,
    c_source: str = "lp",
    tol: float = 1e-4,
    spread_tol: float = SPREAD_TOL,
    c: float | None = None,
    gen: DiscreteGenerator | None = None,
) -> ScheduleReport:
    """Solve along the schedule (policies warm-started) and test for a limit."""
    gen = build_generator(problem) if gen is None else gen
    lambdas = check_schedule(geometric_schedule() if lambdas is None else lambdas)
    diagnostics: list[str] = []
    if c is None:
        c, c_source = critical_value(problem, c_source, gen, diagnostics)
    else:
        c_source = "given"
    records: list[ScheduleRecord] = []
    policy = None
    for lam in lambdas:
        sol = solve_discounted(problem, lam, init_policy=policy, gen=gen)
        policy = sol.policy
        lv = lam * sol.v.values
        w = sol.v + c / lam
        gap = sup_norm(w.values - records[-1].w.values) if records else float("nan")
        records.append(
            ScheduleRecord(lam, sol.v, float(-lv.mean()), oscillation(lv), w, gap,
                           residual_discounted(problem, sol.v, lam, gen), sol.iterations)
        )

    gaps = [r.gap_to_prev for r in records[1:]]
    monotone = all(b <= a + GAP_SLACK for a, b in zip(gaps, gaps[1:]))
    if not monotone:
        diagnostics.append("Cauchy gaps of w are not monotonically decreasing")
    final_gap = gaps[-1] if gaps else float("inf")
    if not final_gap <= tol:
        diagnostics.append(f"final Cauchy gap {final_gap:.3e} exceeds {tol:.1e}")
    spreads = [r.spread for r in records]
    spread_monotone = all(b <= a + 1e-6 for a, b in zip(spreads, spreads[1:]))
    if not spread_monotone:
        diagnostics.append("spread of lam * v is not nonincreasing")
    spread_ok = spreads[-1] <= spread_tol
    if not spread_ok:
        diagnostics.append(
            f"spread diagnostic failed: oscillation(lam v) = {spreads[-1]:.3e} > {spread_tol:.1e} "
            "(discretely non-ergodic problem?)"
        )
    converged = bool(gaps) and monotone and final_gap <= tol and spread_monotone
    u0 = records[-1].w
    ep_residual = sup_norm(apply_F(gen, problem, u0).values - c)
    return ScheduleReport(records, float(c), c_source, u0, converged, spread_ok, ep_residual, diagnostics)


@dataclass
class SelectionReport:
    pairings: list[float]
    ok: bool
    tol: float


def selection_check(problem: EllipticProblem, report: ScheduleReport, measures, tol: float = 1e-6,
                    norm_tol: float = 1e-6) -> SelectionReport:
    """Check <mu, u0> <= tol for Mather measures of the problem with L replaced by L + c.

    Each measure must be optimal for the normalized problem, i.e. pair to
    zero with L + c; otherwise ValueError.
    """
    shifted = problem.L + report.c
    pairings = []
    for mu in measures:
        c_norm = pair(mu, shifted)
        if abs(c_norm) > norm_tol:
            raise ValueError(
                f"measure is not optimal for the c-normalized problem: <mu, L + c> = {c_norm:.3e}"
            )
        pairings.append(pair(mu, report.u0))
    return SelectionReport(pairings, all(p <= tol for p in pairings), tol)


def mather_vertices(problem: EllipticProblem, c: float | None = None, count: int = 4, seed: int = 0,
                    gen: DiscreteGenerator | None = None) -> list[OccupationMeasure]:
    """Distinct vertex Mather measures of the c-normalized problem.

    The first is the simplex optimum of the ergodic LP; further ones minimize
    random linear functionals over the optimal face {closing, mass 1,
    <mu, L + c> = 0}.
    """
    gen = build_generator(problem) if gen is None else gen
    if c is None:
        c, _ = critical_value(problem, "lp", gen)
    norm = problem.shifted(c)
    base = build_ergodic_lp(norm, gen)
    first = simplex_solve(base)
    if first.status != "optimal":
        raise MatherError(f"ergodic LP {first.status}")
    n, k = problem.n_points, problem.n_controls
    out = [OccupationMeasure.from_vector(first.x, n, k)]
    face = StandardFormLP(
        np.vstack([base.A, norm.L.ravel()[None, :]]), np.append(base.rhs, first.objective), base.cost
    )
    rng = np.random.default_rng(seed)
    for _ in range(max(0, count - 1)):
        probe = StandardFormLP(face.A, face.rhs, rng.uniform(-1.0, 1.0, n * k))
        sol = simplex_solve(probe)
        if sol.status != "optimal":
            continue
        mu = OccupationMeasure.from_vector(sol.x, n, k)
        if not any(np.allclose(mu.weights, other.weights, atol=1e-9) for other in out):
            out.append(mu)
    return out


def subsequence_probe(problem: EllipticProblem, schedule_a, schedule_b, c: float | None = None,
                      gen: DiscreteGenerator | None = None, **kwargs) -> float:
    """sup |u0_a - u0_b| for two schedules; whole-family convergence predicts a small value."""
    gen = build_generator(problem) if gen is None else gen
    if c is None:
        c, _ = critical_value(problem, kwargs.pop("c_source", "lp"), gen)
    ra = run_schedule(problem, schedule_a, c=c, gen=gen, **kwargs)
    rb = run_schedule(problem, schedule_b, c=c, gen=gen, **kwargs)
    return sup_norm(ra.u0.values - rb.u0.values)
