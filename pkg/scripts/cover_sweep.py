"""Cover seeded random targets by points on the solved complex-line family.

    python scripts/cover_sweep.py --count 20 --seed 10
"""

import argparse
import time

import numpy as np

from jcurves.coords import to_complex
from jcurves.curve_solver import LineAtlas
from jcurves.structures import make_structure


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--seed", type=int, default=10)
    ap.add_argument("--delta", type=float, default=1e-2)
    ap.add_argument("--rmin", type=float, default=1.0)
    ap.add_argument("--rmax", type=float, default=5.0)
    ap.add_argument("--tol", type=float, default=1e-4)
    args = ap.parse_args()

    atlas = LineAtlas(make_structure("pushforward_bump", n=2, delta=args.delta), R=20.0, N=257)
    rng = np.random.default_rng(args.seed)
    t0 = time.perf_counter()
    ok = 0
    for k in range(args.count):
        d = rng.normal(size=4)
        r = args.rmin + (args.rmax - args.rmin) * (1.0 - rng.random())
        res = atlas.cover_point(to_complex(r * d / np.linalg.norm(d)), tol=args.tol)
        ok += res.converged
        print(f"{k:3d} |p|={r:5.2f} |zeta|={np.hypot(*res.zeta):6.3f} error={res.error:.2e} steps={res.steps}")
    print(f"\n{ok}/{args.count} covered, {atlas.solves} line solves, {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
