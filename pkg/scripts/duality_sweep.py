"""LP value against the PDE value for every gallery problem.

Prints one line per (gallery, grid): worst |LP - PDE|, worst closing defect
over indicator test functions, and the largest pivot count.
"""

import argparse
import time

import numpy as np

from ergodicity_lab import (
    ERGODIC, GALLERY_IDS, TorusGrid, build_gallery, build_generator, discounted, solve_discounted,
    solve_ergodic_howard, solve_mather,
)
from ergodicity_lab.mather import indicator_closing_defect


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[1.0, 0.25, 0.05])
    ap.add_argument("--points", type=int, default=3, help="random roots z per lambda")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rule", choices=("hybrid", "bland"), default="hybrid")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    start = time.perf_counter()
    print(f"{'gallery':20s} {'grid':>6s} {'max gap':>10s} {'closing':>10s} {'pivots':>7s}")
    for gid in GALLERY_IDS:
        for grid in (TorusGrid(1, 8), TorusGrid(1, 16), TorusGrid(2, 8)):
            p = build_gallery(gid, {}, grid)
            gen = build_generator(p)
            c = solve_ergodic_howard(p, gen=gen).c
            certs = [solve_mather(p, ERGODIC, gen, pde_value=-c, rule=args.rule)]
            defects = [indicator_closing_defect(gen, certs[0].measure)]
            for lam in args.lambdas:
                v = solve_discounted(p, lam, gen=gen).v.values
                for z in rng.choice(p.n_points, args.points, replace=False):
                    cert = solve_mather(p, discounted(int(z), lam), gen, pde_value=lam * v[z], rule=args.rule)
                    certs.append(cert)
                    defects.append(indicator_closing_defect(gen, cert.measure, lam, int(z)))
            label = f"{grid.n_per_axis}^{grid.dim}"
            print(f"{gid:20s} {label:>6s} {max(c.gap for c in certs):10.2e} {max(defects):10.2e} "
                  f"{max(c.lp_solution.iterations for c in certs):7d}")
    print(f"total {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
