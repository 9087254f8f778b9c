"""Command-line front end.

Exit codes: 0 ok, 1 input error, 2 solver failure, 3 certification gap,
4 ergodicity diagnostic.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import io
from .generator import build_generator
from .grid import TorusGrid
from .hjb import ErgodicityError, SolverError, solve_discounted, solve_ergodic_howard
from .lp import LPBreakdownError
from .mather import ERGODIC, MatherError, closing_residual, discounted, pair, solve_mather
from .problem import GALLERY_IDS, SpecError, build_gallery, parse_spec, to_spec, two_basins
from .vanish import check_schedule, geometric_schedule, mather_vertices, parse_schedule, run_schedule, selection_check

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_GAP, EXIT_ERGODIC = 0, 1, 2, 3, 4
THREADS_ENV = "ERGODICITY_LAB_THREADS"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    command: str
    spec: Path | None
    out: Path | None
    lam: float | None = None
    z: list[int] = field(default_factory=list)
    schedule: list[float] = field(default_factory=geometric_schedule)
    tol: float = 1e-10
    cert_tol: float = 1e-6
    gap_tol: float = 1e-4
    seed: int = 0
    c_source: str = "lp"
    vertices: int = 4
    replay: Path | None = None

    def __post_init__(self):
        for name in ("tol", "cert_tol", "gap_tol"):
            if not getattr(self, name) > 0:
                raise CliError(f"--{name.replace('_', '-')} must be positive", EXIT_INPUT)
        try:
            self.schedule = check_schedule(self.schedule)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_INPUT) from None


def thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise CliError(f"{THREADS_ENV} must be an integer, got {raw!r}", EXIT_INPUT) from None


def _load(cfg: RunConfig):
    if cfg.spec is None:
        raise CliError("--spec is required", EXIT_INPUT)
    try:
        text = cfg.spec.read_text()
    except OSError as exc:
        raise CliError(f"cannot read spec: {exc}", EXIT_INPUT) from None
    try:
        return parse_spec(text)
    except SpecError as exc:
        raise CliError(f"bad spec {cfg.spec}: {exc}", EXIT_INPUT) from None


def _write(cfg: RunConfig, name: str, text: str) -> None:
    if cfg.out is None:
        raise CliError("--out is required", EXIT_INPUT)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / name).write_text(text)


def cmd_solve(cfg: RunConfig) -> int:
    if cfg.lam is None or not cfg.lam > 0:
        raise CliError("solve needs --lambda > 0; for lambda = 0 use cmd_ergodic (the 'ergodic' command)", EXIT_INPUT)
    problem = _load(cfg)
    try:
        sol = solve_discounted(problem, cfg.lam, tol=cfg.tol)
    except SolverError as exc:
        raise CliError(f"solver failure: {exc}", EXIT_SOLVER) from None
    _write(cfg, "solution.csv", io.table(problem.grid, {"v": sol.v, "policy": sol.policy}))
    _write(cfg, "summary.json", io.to_json(
        {"lambda": cfg.lam, "residual": sol.residual, "iterations": sol.iterations}) + "\n")
    print(f"solved lambda={io.fmt(cfg.lam)} residual={sol.residual:.3e}")
    return EXIT_OK


def cmd_ergodic(cfg: RunConfig) -> int:
    problem = _load(cfg)
    try:
        sol = solve_ergodic_howard(problem, tol=cfg.tol)
    except ErgodicityError as exc:
        raise CliError(str(exc), EXIT_ERGODIC) from None
    except SolverError as exc:
        raise CliError(f"solver failure: {exc}", EXIT_SOLVER) from None
    _write(cfg, "solution.csv", io.table(problem.grid, {"u": sol.u, "policy": sol.policy}))
    _write(cfg, "summary.json", io.to_json(
        {"c": sol.c, "residual": sol.residual, "iterations": sol.iterations, "x0": sol.x0}) + "\n")
    print(f"c={io.fmt(sol.c)} residual={sol.residual:.3e}")
    return EXIT_OK


def _contexts(cfg: RunConfig, n_points: int):
    if cfg.lam is None:
        if cfg.z:
            raise CliError("--z needs --lambda", EXIT_INPUT)
        return [ERGODIC]
    if not cfg.lam > 0:
        raise CliError("--lambda must be positive; omit it for the ergodic certificate", EXIT_INPUT)
    zs = cfg.z or [0]
    for z in zs:
        if not 0 <= z < n_points:
            raise CliError(f"--z {z} out of range [0, {n_points})", EXIT_INPUT)
    return [discounted(z, cfg.lam) for z in zs]


def _tag(context) -> str:
    return "ergodic" if context.ergodic else f"discounted_z{context.z}"


def cmd_certify(cfg: RunConfig) -> int:
    problem = _load(cfg)
    if cfg.replay is not None:
        return _replay(cfg, problem)
    gen = build_generator(problem)
    contexts = _contexts(cfg, problem.n_points)

    def work(ctx):
        return solve_mather(problem, ctx, gen)

    try:
        with ThreadPoolExecutor(max_workers=min(thread_cap(), len(contexts))) as pool:
            certs = list(pool.map(work, contexts))
    except (MatherError, LPBreakdownError, SolverError) as exc:
        raise CliError(f"solver failure: {exc}", EXIT_SOLVER) from None
    worst = 0.0
    for cert in certs:
        tag = _tag(cert.context)
        _write(cfg, f"certificate_{tag}.json", io.to_json(io.certificate_dict(cert)) + "\n")
        _write(cfg, f"measure_{tag}.json", io.measure_dump(cert.measure, problem.grid, cert.context))
        print(f"{cert.context.describe()}: lp={io.fmt(cert.lp_value)} pde={io.fmt(cert.pde_value)} gap={cert.gap:.3e}")
        worst = max(worst, cert.gap, cert.closing_residual)
    if not worst <= cfg.cert_tol:
        raise CliError(f"certification gap {worst:.3e} exceeds {cfg.cert_tol:.1e}", EXIT_GAP)
    return EXIT_OK


def _replay(cfg: RunConfig, problem) -> int:
    """Re-validate a dumped measure: closing residual and pairing against the PDE value."""
    try:
        measure, context, grid = io.load_measure(cfg.replay.read_text())
    except (OSError, ValueError, KeyError, TypeError, IndexError) as exc:
        raise CliError(f"cannot read measure {cfg.replay}: {exc}", EXIT_INPUT) from None
    if grid != problem.grid or measure.weights.shape[1] != problem.n_controls:
        raise CliError("measure does not match the spec's grid or control set", EXIT_INPUT)
    gen = build_generator(problem)
    try:
        if context.ergodic:
            pde = -solve_ergodic_howard(problem, tol=cfg.tol, gen=gen).c
        else:
            pde = context.lam * float(solve_discounted(problem, context.lam, tol=cfg.tol, gen=gen).v.values[context.z])
    except ErgodicityError as exc:
        raise CliError(str(exc), EXIT_ERGODIC) from None
    except SolverError as exc:
        raise CliError(f"solver failure: {exc}", EXIT_SOLVER) from None
    value = pair(measure, problem.L)
    resid = closing_residual(gen, measure, context.lam, context.z)
    mass_err = abs(measure.total_mass - 1.0)
    neg = float(max(0.0, -measure.weights.min()))
    gap = abs(value - pde)
    _write(cfg, f"replay_{_tag(context)}.json", io.to_json({
        "context": io.context_dict(context), "pairing": value, "pde_value": pde, "gap": gap,
        "closing_residual": resid, "mass_error": mass_err, "negativity": neg,
    }) + "\n")
    print(f"replay {context.describe()}: gap={gap:.3e} closing={resid:.3e} mass error={mass_err:.3e}")
    if max(gap, resid, mass_err, neg) > cfg.cert_tol:
        raise CliError("replayed measure fails certification", EXIT_GAP)
    return EXIT_OK


def cmd_vanish(cfg: RunConfig) -> int:
    problem = _load(cfg)
    gen = build_generator(problem)
    try:
        report = run_schedule(problem, cfg.schedule, c_source=cfg.c_source, tol=cfg.gap_tol, gen=gen)
    except (MatherError, LPBreakdownError, SolverError) as exc:
        raise CliError(f"solver failure: {exc}", EXIT_SOLVER) from None
    _write(cfg, "schedule.csv", io.schedule_csv(report))
    _write(cfg, "u0.csv", io.grid_function_table(report.u0, "u0"))
    summary = {
        "c": report.c, "c_source": report.c_source, "converged": report.converged,
        "spread_ok": report.spread_ok, "final_gap": report.final_gap,
        "final_spread": report.final_spread, "ep_residual": report.ep_residual,
        "diagnostics": report.diagnostics,
    }
    for msg in report.diagnostics:
        print(f"diagnostic: {msg}", file=sys.stderr)
    if not report.spread_ok:
        _write(cfg, "summary.json", io.to_json(summary) + "\n")
        raise CliError("spread diagnostic failed: the problem looks discretely non-ergodic", EXIT_ERGODIC)
    if not report.converged:
        _write(cfg, "summary.json", io.to_json(summary) + "\n")
        raise CliError("vanishing-discount limit not detected on this schedule", EXIT_ERGODIC)
    try:
        measures = mather_vertices(problem, report.c, count=cfg.vertices, seed=cfg.seed, gen=gen)
        sel = selection_check(problem, report, measures)
    except (MatherError, LPBreakdownError) as exc:
        raise CliError(f"solver failure: {exc}", EXIT_SOLVER) from None
    summary["selection"] = {"ok": sel.ok, "tol": sel.tol, "pairings": sel.pairings}
    _write(cfg, "summary.json", io.to_json(summary) + "\n")
    print(f"c={io.fmt(report.c)} converged final gap={report.final_gap:.3e} "
          f"selection max <mu,u0>={max(sel.pairings):.3e}")
    if not sel.ok:
        raise CliError("selection inequality <mu, u0> <= tol violated", EXIT_GAP)
    return EXIT_OK


def cmd_gallery(args) -> int:
    """Write a spec file for a gallery problem (or the two-basin example)."""
    try:
        if args.id == "two_basins":
            text = to_spec(two_basins(args.n))
        else:
            params = {}
            for item in args.param or []:
                key, _, raw = item.partition("=")
                params[key] = _literal(raw)
            problem = build_gallery(args.id, params, TorusGrid(args.dim, args.n))
            text = to_spec(problem, tabulated=args.tabulated)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _literal(raw: str):
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"cannot parse parameter value {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergodicity-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solver_tol=True):
        p.add_argument("--spec", type=Path, required=True, help="problem spec (JSON)")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        if solver_tol:
            p.add_argument("--tol", type=float, default=1e-10, help="solver tolerance")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("solve", help="discounted problem at one lambda")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)

    p = sub.add_parser("ergodic", help="critical value and corrector by Howard iteration")
    common(p)

    p = sub.add_parser("certify", help="occupation-measure LP and duality certificate")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="omit for the ergodic LP")
    p.add_argument("--z", type=str, default=None, help="point index, or comma-separated list")
    p.add_argument("--cert-tol", type=float, default=1e-6)
    p.add_argument("--replay", type=Path, default=None, help="re-validate a dumped measure instead of solving")

    p = sub.add_parser("vanish", help="vanishing-discount schedule and selection check")
    common(p)
    p.add_argument("--schedule", type=str, default="geometric:0:13")
    p.add_argument("--gap-tol", type=float, default=1e-4, help="final Cauchy gap tolerance")
    p.add_argument("--c-source", choices=("lp", "howard"), default="lp")
    p.add_argument("--vertices", type=int, default=4, help="Mather vertices sampled for the selection check")

    p = sub.add_parser("gallery", help="write a gallery spec")
    p.add_argument("--id", required=True, choices=GALLERY_IDS + ("two_basins",))
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--param", action="append", help="key=value, repeatable")
    p.add_argument("--tabulated", action="store_true", help="write coefficient tables instead of the gallery reference")
    p.add_argument("--output", type=str, default=None, help="file to write (default stdout)")
    return parser


def config_from_args(args) -> RunConfig:
    z = []
    if getattr(args, "z", None):
        try:
            z = [int(t) for t in args.z.split(",")]
        except ValueError:
            raise CliError(f"bad --z {args.z!r}", EXIT_INPUT) from None
    schedule = geometric_schedule()
    if getattr(args, "schedule", None):
        try:
            schedule = parse_schedule(args.schedule)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_INPUT) from None
    return RunConfig(
        command=args.command, spec=args.spec, out=args.out, lam=getattr(args, "lam", None), z=z,
        schedule=schedule, tol=args.tol, cert_tol=getattr(args, "cert_tol", 1e-6),
        gap_tol=getattr(args, "gap_tol", 1e-4), seed=args.seed, c_source=getattr(args, "c_source", "lp"),
        vertices=getattr(args, "vertices", 4), replay=getattr(args, "replay", None),
    )


COMMANDS = {"solve": cmd_solve, "ergodic": cmd_ergodic, "certify": cmd_certify, "vanish": cmd_vanish}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        if args.command == "gallery":
            return cmd_gallery(args)
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
