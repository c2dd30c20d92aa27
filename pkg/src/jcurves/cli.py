"""Command line runner: ``jcurves <command> --config run.toml``.

Exit codes: 0 success, 1 failed hard check or audit, 2 configuration
error, 3 numerical non-convergence, 4 request outside the covered region.
"""

import argparse
import json
import logging
import os
import platform
import sys
import time
import warnings

import numpy as np

from . import __version__
from .acs import (
    decay_report,
    levi_lower_bound,
    nijenhuis_extrapolated,
    shell_samples,
    squared_norm,
    validate_structure,
)
from .config import ConfigError, load_config
from .coords import parse_vector, to_complex
from .curve_solver import (
    ContractionFailure,
    InsufficientCenters,
    LineAtlas,
    LineProblem,
    OutOfRegion,
    SolverSettings,
    center_lattice,
    foliation_check,
    solve_disc,
    solve_line,
)
from .dilation import verify_scaled_bounds
from .structures import StructureTooFar, make_structure

log = logging.getLogger("jcurves")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_DIVERGED, EXIT_REGION = 0, 1, 2, 3, 4


def dumps(obj):
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


class Run:
    """Output directory, artifact bookkeeping and the run manifest."""

    def __init__(self, cfg, args, command):
        self.cfg = cfg
        self.args = args
        self.command = command
        self.out = args.out or cfg.output.directory
        os.makedirs(self.out, exist_ok=True)
        self.artifacts = []
        self.t0 = time.perf_counter()
        self.timings = {}

    def path(self, name):
        return os.path.join(self.out, name)

    def write_json(self, name, obj):
        with open(self.path(name), "w", encoding="utf-8") as fh:
            fh.write(dumps(obj))
        self.artifacts.append(name)

    def write_grid(self, stem, grid):
        formats = self.cfg.output.formats
        if "csv" in formats:
            grid.to_csv(self.path(stem + ".csv"))
            self.artifacts.append(stem + ".csv")
        if "bin" in formats:
            with open(self.path(stem + ".bin"), "wb") as fh:
                fh.write(grid.to_bytes())
            self.artifacts.append(stem + ".bin")

    def finish(self, status):
        import numba
        import scipy

        self.timings["total_seconds"] = time.perf_counter() - self.t0
        manifest = {
            "command": self.command,
            "status": status,
            "seed": self.cfg.seed,
            "strict_norm": bool(self.args.strict_norm),
            "threads": self.args.threads,
            "config_sha256": self.cfg.digest(),
            "config": self.cfg.to_dict(),
            "config_source": self.cfg.source,
            "artifacts": sorted(self.artifacts),
            "versions": {
                "jcurves": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "numba": numba.__version__,
            },
            "timings": self.timings,
        }
        with open(self.path("manifest.json"), "w", encoding="utf-8") as fh:
            fh.write(dumps(manifest))
        with open(self.path("config.toml"), "w", encoding="utf-8") as fh:
            fh.write(self.cfg.source)
        return status


def _structure(cfg):
    s = cfg.structure
    return make_structure(s.family, n=s.n, **s.params)


def _settings(cfg, args):
    s = cfg.solver
    return SolverSettings(
        max_iter=s.max_iter,
        tol_fixed_point=s.tol_fixed_point,
        tol_residual=s.tol_residual,
        admissibility_lambda=s.admissibility_lambda,
        quadrature=s.quadrature,
        strict_norm=bool(args.strict_norm),
        seed=cfg.seed,
    )


def _unit(vec):
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ConfigError("direction vector must be nonzero")
    return vec / norm


# ---------------------------------------------------------------------------
# commands


def cmd_check(cfg, args):
    run = Run(cfg, args, "check")
    J = _structure(cfg)
    n = J.n
    d = cfg.decay
    samples = shell_samples(n, d.radii, d.directions)
    validation = validate_structure(J, samples)
    profile = decay_report(J, theta=cfg.norms.theta, K=d.K, radii=d.radii, directions=d.directions)
    levi_pts = shell_samples(n, cfg.levi.radii, cfg.levi.directions)
    levi = levi_lower_bound(J, squared_norm(), levi_pts)
    rng = np.random.default_rng(cfg.seed)
    nij_pts = shell_samples(n, (0.5, 1.0, 2.0), 8)
    nij = 0.0
    for z in nij_pts:
        X, Y = rng.normal(size=(2, 2 * n))
        N, _, _ = nijenhuis_extrapolated(J, z, X, Y)
        nij = max(nij, float(np.linalg.norm(N)))
    theta_p = cfg.norms.theta * cfg.norms.p
    passed = validation.passed and theta_p > 2
    report = {
        "family": J.family,
        "n": n,
        "params": J.params,
        "lambda": profile.lam,
        "theta": profile.theta,
        "K": profile.K,
        "envelopes": profile.envelopes,
        "envelope_argmax": profile.argmax,
        "tau0": levi.tau0_estimate,
        "worst_point": levi.worst_point,
        "levi_samples": levi.sample_count,
        "j_squared_residual": validation.max_residual,
        "j_squared_worst_point": validation.worst_point,
        "nijenhuis_max": nij,
        "theta_p": theta_p,
        "admissible": bool(profile.lam <= cfg.solver.admissibility_lambda),
        "passed": bool(passed),
    }
    run.write_json("check.json", report)
    status = EXIT_OK if passed else EXIT_FAILED
    print(f"check: family={J.family} lambda={profile.lam:.6g} tau0={levi.tau0_estimate:.6g} passed={passed}")
    return run.finish(status)


def _solution_outputs(run, sol, stem):
    run.write_json(stem + ".json", sol.to_dict())
    run.write_grid(stem, sol.samples)


def _log_failure(run, exc, stem):
    payload = {"error": str(exc), "iterations": [list(map(float, it)) for it in getattr(exc, "iterations", [])]}
    run.write_json(stem + "_iterations.json", payload)
    print(f"error: {exc}; iteration log at {run.path(stem + '_iterations.json')}", file=sys.stderr)


def cmd_solve_line(cfg, args):
    run = Run(cfg, args, "solve-line")
    J = _structure(cfg)
    v = to_complex(_unit(parse_vector(args.v, J.n)))
    problem = LineProblem(J, v, cfg.grid.R, cfg.grid.N, cfg.norms, _settings(cfg, args))
    t = time.perf_counter()
    try:
        sol = solve_line(problem)
    except (ContractionFailure, StructureTooFar) as exc:
        _log_failure(run, exc, "line")
        return run.finish(EXIT_DIVERGED)
    run.timings["solve_seconds"] = time.perf_counter() - t
    _solution_outputs(run, sol, "line")
    print(f"solve-line: converged={sol.converged} iterations={len(sol.iterations)} "
          f"residual_CR={sol.residual_CR:.3g} growth_sup={sol.growth_sup:.3g}")
    return run.finish(EXIT_OK if sol.converged else EXIT_DIVERGED)


def cmd_solve_disc(cfg, args):
    run = Run(cfg, args, "solve-disc")
    J = _structure(cfg)
    a = to_complex(parse_vector(args.a, J.n - 1))
    if np.linalg.norm(a) > 1.0:
        print(f"error: center |a| = {np.linalg.norm(a):.6g} > 1", file=sys.stderr)
        return run.finish(EXIT_REGION)
    t = time.perf_counter()
    try:
        sol = solve_disc(J, a, N=cfg.disc.N, norms=cfg.norms, settings=_settings(cfg, args))
    except (ContractionFailure, StructureTooFar) as exc:
        _log_failure(run, exc, "disc")
        return run.finish(EXIT_DIVERGED)
    run.timings["solve_seconds"] = time.perf_counter() - t
    _solution_outputs(run, sol, "disc")
    print(f"solve-disc: converged={sol.converged} residual_CR={sol.residual_CR:.3g} growth_sup={sol.growth_sup:.3g}")
    return run.finish(EXIT_OK if sol.converged else EXIT_DIVERGED)


def cmd_cover(cfg, args):
    run = Run(cfg, args, "cover")
    J = _structure(cfg)
    p = to_complex(parse_vector(args.p, J.n))
    atlas = LineAtlas(J, R=cfg.cover.R, N=cfg.cover.N, norms=cfg.norms, settings=_settings(cfg, args))
    t = time.perf_counter()
    try:
        res = atlas.cover_point(p, tol=cfg.cover.tol, max_steps=cfg.cover.max_steps)
    except OutOfRegion as exc:
        print(f"error: {exc}", file=sys.stderr)
        return run.finish(EXIT_REGION)
    except (ContractionFailure, StructureTooFar) as exc:
        _log_failure(run, exc, "cover")
        return run.finish(EXIT_DIVERGED)
    run.timings["cover_seconds"] = time.perf_counter() - t
    report = res.to_dict()
    report["target"] = parse_vector(args.p, J.n).tolist()
    report["line_solves"] = atlas.solves
    run.write_json("cover.json", report)
    print(f"cover: converged={res.converged} error={res.error:.3g} steps={res.steps}")
    return run.finish(EXIT_OK if res.converged else EXIT_DIVERGED)


def cmd_foliate(cfg, args):
    run = Run(cfg, args, "foliate")
    J = _structure(cfg)
    f = cfg.foliate
    centers = center_lattice(f.lattice, f.spacing)
    t = time.perf_counter()
    try:
        rep = foliation_check(J, centers, N=f.N, norms=cfg.norms, settings=_settings(cfg, args), workers=args.threads)
    except InsufficientCenters as exc:
        print(f"error: {exc}", file=sys.stderr)
        return run.finish(EXIT_CONFIG)
    except RuntimeError as exc:
        _log_failure(run, exc, "foliate")
        return run.finish(EXIT_DIVERGED)
    run.timings["foliate_seconds"] = time.perf_counter() - t
    run.write_json("foliation.json", rep.to_dict())
    print(f"foliate: min_ratio={rep.min_ratio:.6g} certified={rep.certified}")
    return run.finish(EXIT_OK if rep.all_converged else EXIT_DIVERGED)


def cmd_dilate_scan(cfg, args):
    run = Run(cfg, args, "dilate-scan")
    J = _structure(cfg)
    eps = [float(e) for e in parse_vector(args.epsilons)] if args.epsilons else list(cfg.dilate.epsilons)
    for e in eps:
        if not 0 < e <= 1:
            print(f"error: epsilon {e} outside (0,1]", file=sys.stderr)
            return run.finish(EXIT_CONFIG)
    d = cfg.decay
    profile = decay_report(J, theta=cfg.norms.theta, K=d.K, radii=d.radii, directions=d.directions)
    audits = [verify_scaled_bounds(J, e, profile).to_dict() for e in eps]
    passed = all(a["passed"] for a in audits)
    run.write_json("dilate_scan.json", {"profile": profile.to_dict(), "audits": audits, "passed": passed})
    print(f"dilate-scan: epsilons={eps} passed={passed}")
    return run.finish(EXIT_OK if passed else EXIT_FAILED)


COMMANDS = {
    "check": cmd_check,
    "solve-line": cmd_solve_line,
    "solve-disc": cmd_solve_disc,
    "cover": cmd_cover,
    "foliate": cmd_foliate,
    "dilate-scan": cmd_dilate_scan,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="jcurves", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML experiment configuration")
        p.add_argument("--out", default=None, help="output directory (overrides output.directory)")
        p.add_argument("--threads", type=int, default=1, help="worker cap for independent solves")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--strict-norm", action="store_true", help="record weighted C^{1,gamma} diagnostics")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    common(sub.add_parser("check", help="validate a structure and report decay, Levi and Nijenhuis data"))
    common(sub.add_parser("solve-line", help="J-holomorphic line through a direction")).add_argument(
        "--v", default=None, help="direction as comma-separated reals (re_1,im_1,...); default e_1"
    )
    common(sub.add_parser("solve-disc", help="disc through a center in C^{n-1}")).add_argument(
        "--a", default=None, help="center as comma-separated reals; default 0"
    )
    common(sub.add_parser("cover", help="find a line through a point outside the unit ball")).add_argument(
        "--p", required=True, help="target point as comma-separated reals"
    )
    common(sub.add_parser("foliate", help="disc foliation check over a center lattice"))
    common(sub.add_parser("dilate-scan", help="audit dilated decay bounds")).add_argument(
        "--epsilons", default=None, help="comma-separated dilation factors"
    )
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        n = cfg.structure.n
        if args.command == "solve-line" and args.v is None:
            args.v = ",".join(["1"] + ["0"] * (2 * n - 1))
        if args.command == "solve-disc" and args.a is None:
            args.a = ",".join(["0"] * (2 * (n - 1)))
        for key in ("v", "a", "p"):
            if getattr(args, key, None) is not None:
                parse_vector(getattr(args, key), n - 1 if key == "a" else n)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        logging.captureWarnings(True)
        return COMMANDS[args.command](cfg, args)


if __name__ == "__main__":
    sys.exit(main())
