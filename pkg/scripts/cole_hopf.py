"""Quadratic viscous gallery against the Cole-Hopf eigenvalue.

With u = -2 eps log phi the ergodic problem becomes a linear eigenvalue
problem, so -c should match the principal eigenvalue of
-2 eps^2 D2 + f on the same grid, up to the control truncation and the
upwind discretization error.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from ergodicity_lab import TorusGrid, build_gallery, solve_ergodic_howard
from ergodicity_lab.problem import potential

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from oracles import principal_eigenvalue_inverse_power  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--k", type=int, default=81, help="controls in the truncated lattice (odd)")
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    args = ap.parse_args()

    print(f"{'n':>5s} {'c':>12s} {'eigenvalue':>12s} {'|c + eig|':>10s}")
    for n in args.sizes:
        grid = TorusGrid(1, n)
        p = build_gallery("viscous_superlinear", {"m": 2, "sigma": np.sqrt(args.eps), "k": args.k}, grid)
        c = solve_ergodic_howard(p).c
        eig, _ = principal_eigenvalue_inverse_power(args.eps, potential(grid))
        print(f"{n:5d} {c:12.6f} {eig:12.6f} {abs(c + eig):10.4f}")


if __name__ == "__main__":
    main()
