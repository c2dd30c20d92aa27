"""Sweep the bump amplitude and report decay constant, growth and contraction.

    python scripts/lambda_sweep.py --deltas 1e-3 3e-3 1e-2 3e-2
"""

import argparse

import numpy as np

from jcurves.acs import decay_report
from jcurves.curve_solver import LineProblem, solve_line
from jcurves.structures import make_structure


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--deltas", type=float, nargs="+", default=[1e-3, 3e-3, 1e-2, 3e-2])
    ap.add_argument("--R", type=float, default=8.0)
    ap.add_argument("--N", type=int, default=129)
    args = ap.parse_args()

    v = np.array([1.0, 0.0], dtype=complex)
    rows = []
    print(f"{'delta':>8} {'lambda':>10} {'growth_sup':>11} {'max ratio':>10} {'iters':>5}")
    for d in args.deltas:
        J = make_structure("pushforward_bump", n=2, delta=d)
        lam = decay_report(J).lam
        sol = solve_line(LineProblem(J, v, args.R, args.N))
        ratios = [r for _, r in sol.iterations if np.isfinite(r)]
        rmax = max(ratios) if ratios else float("nan")
        rows.append((d, sol.growth_sup))
        print(f"{d:8.1e} {lam:10.4e} {sol.growth_sup:11.4e} {rmax:10.3e} {len(sol.iterations):5d}")
    d, g = np.log(np.array(rows)).T
    print(f"\nlog-log slope of growth_sup vs delta: {np.polyfit(d, g, 1)[0]:.4f}")


if __name__ == "__main__":
    main()
