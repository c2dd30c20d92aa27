"""Grid refinement study for the Cauchy-Green transform and the line solver.

Prints the Pompeiu residual and observed order for a Gaussian datum, then the
CR residual of the bump line solve as N grows.

    python scripts/refinement_study.py --sizes 65 129 257
"""

import argparse

import numpy as np

from jcurves.cauchy_green import cauchy_green, dbar_residual
from jcurves.curve_solver import LineProblem, solve_line
from jcurves.grid import PlaneGrid
from jcurves.structures import make_structure


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[65, 129, 257])
    ap.add_argument("--R", type=float, default=4.0)
    ap.add_argument("--delta", type=float, default=1e-2)
    args = ap.parse_args()

    prev = None
    print(f"{'N':>5} {'h':>10} {'pompeiu':>11} {'order':>6}")
    for N in args.sizes:
        g = PlaneGrid.from_function(args.R, N, lambda z: np.exp(-np.abs(z) ** 2))
        r = dbar_residual(cauchy_green(g, "direct"), g).max
        order = "" if prev is None else f"{np.log2(prev / r):6.2f}"
        print(f"{N:5d} {g.h:10.4e} {r:11.3e} {order:>6}")
        prev = r

    J = make_structure("pushforward_bump", n=2, delta=args.delta)
    v = np.array([1.0, 0.0], dtype=complex)
    print(f"\n{'N':>5} {'residual_CR':>12} {'growth_sup':>11} {'iters':>5}")
    for N in args.sizes:
        sol = solve_line(LineProblem(J, v, 8.0, N))
        print(f"{N:5d} {sol.residual_CR:12.3e} {sol.growth_sup:11.4e} {len(sol.iterations):5d}")


if __name__ == "__main__":
    main()
