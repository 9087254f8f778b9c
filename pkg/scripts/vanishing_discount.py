"""Vanishing-discount experiment on the gallery.

For each problem: the critical value, the final spread of lam v, the last
Cauchy gap of w = v + c / lam, the disagreement of the limits from two
schedules, and the worst selection pairing over sampled Mather vertices.
With --all-2d the first-order galleries are also run on the 8x8 grid, where
the last Cauchy gap at lam = 2^-13 sits just above 1e-4.
"""

import argparse
import time

import numpy as np

from ergodicity_lab import (
    GALLERY_IDS, TorusGrid, build_gallery, build_generator, geometric_schedule, harmonic_schedule,
    mather_vertices, run_schedule, selection_check, two_basins,
)


def cases(all_2d):
    for gid in GALLERY_IDS:
        for n in (8, 16):
            yield gid, TorusGrid(1, n)
    for gid in GALLERY_IDS if all_2d else ("uniformly_elliptic",):
        yield gid, TorusGrid(2, 8)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k1", type=int, default=13, help="last exponent of the geometric schedule")
    ap.add_argument("--harmonic-final", type=float, default=1e-4, help="last entry of the second schedule")
    ap.add_argument("--all-2d", action="store_true")
    args = ap.parse_args()

    head = f"{'gallery':20s} {'grid':>5s} {'c':>12s} {'spread':>9s} {'gap':>9s} {'probe':>9s} {'select':>9s} {'ok':>3s} {'s':>5s}"
    print(head)
    for gid, grid in cases(args.all_2d):
        t0 = time.perf_counter()
        p = build_gallery(gid, {}, grid)
        gen = build_generator(p)
        rep = run_schedule(p, geometric_schedule(0, args.k1), gen=gen)
        other = run_schedule(p, harmonic_schedule(args.harmonic_final, args.k1), c=rep.c, gen=gen)
        probe = float(np.abs(rep.u0.values - other.u0.values).max())
        sel = selection_check(p, rep, mather_vertices(p, rep.c, gen=gen)) if rep.converged else None
        worst = f"{max(sel.pairings):9.1e}" if sel else f"{'-':>9s}"
        print(f"{gid:20s} {grid.n_per_axis:>3d}^{grid.dim} {rep.c:12.6f} {rep.final_spread:9.2e} "
              f"{rep.final_gap:9.2e} {probe:9.1e} {worst} {'yes' if rep.converged else 'no':>3s} "
              f"{time.perf_counter() - t0:5.1f}")
        for msg in rep.diagnostics:
            print(f"    {msg}")
    rep = run_schedule(two_basins())
    print(f"two_basins: spread {rep.final_spread:.3f}, converged {rep.converged}")


if __name__ == "__main__":
    main()
