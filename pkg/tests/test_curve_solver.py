import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jcurves.cauchy_green import weighted_c0_norm
from jcurves.coords import to_complex, to_real
from jcurves.curve_solver import (
    ContractionFailure,
    InsufficientCenters,
    LineAtlas,
    LineProblem,
    OutOfRegion,
    SolverSettings,
    beltrami_forcing,
    center_lattice,
    contraction_estimate,
    evaluate,
    foliation_check,
    frechet_derivative,
    line_reference,
    phi,
    residual_CR,
    solve_disc,
    solve_line,
)
from jcurves.cauchy_green import cauchy_green
from jcurves.grid import PlaneGrid, wirtinger
from jcurves.structures import make_structure

from conftest import Wavy

E1 = np.array([1.0, 0.0], dtype=complex)


def bump(delta):
    return make_structure("pushforward_bump", n=2, delta=delta)


def near_reference(ref, rng, scale):
    w = np.exp(-np.abs(ref.nodes) ** 2 / 4)[..., None] * (rng.normal(size=ref.n) + 1j * rng.normal(size=ref.n))
    return ref.like(ref.values + scale * w)


# residual of the CR system ------------------------------------------------------


def test_residual_linear_map_standard(standard):
    z = line_reference(4.0, 33, np.array([0.6, 0.8j]))
    assert residual_CR(standard, z) <= 1e-10


def test_residual_antiholomorphic_is_one(standard):
    v = np.array([0.6, 0.8j])
    z = PlaneGrid.from_function(4.0, 33, lambda s: np.conj(s)[..., None] * v)
    assert residual_CR(standard, z) == pytest.approx(1.0, abs=1e-10)


def test_residual_pushforward_line():
    J = bump(1e-2)
    w = np.array([0.6, 0.8j])
    ref = line_reference(8.0, 257, w)
    z = ref.like(to_complex(J.forward(to_real(ref.values))))
    assert residual_CR(J, z) <= 1e-6


def test_residual_reports_location_of_failure():
    from jcurves.structures import ConstantStructure, StructureTooFar

    J = ConstantStructure(-np.kron(np.eye(1), np.array([[0.0, -1.0], [1.0, 0.0]])))
    with pytest.raises(StructureTooFar, match="grid node"):
        residual_CR(J, line_reference(2.0, 9, np.array([1.0 + 0j])))


# Phi ------------------------------------------------------------------------------------


def test_phi_standard_identity(standard, rng):
    z = near_reference(line_reference(4.0, 33, E1), rng, 0.3)
    assert np.array_equal(phi(standard, z).values, z.values)


def test_phi_deviation_linear_in_lambda():
    ref = line_reference(8.0, 129, E1)
    dev = {}
    for lam in (1e-2, 5e-3):
        out = phi(bump(lam), ref)
        dev[lam] = weighted_c0_norm(out.like(out.values - ref.values))
    assert dev[1e-2] <= 10 * 1e-2
    assert dev[1e-2] / dev[5e-3] == pytest.approx(2.0, rel=0.1)


# line solver ---------------------------------------------------------------------------


def test_line_standard_one_iteration(standard):
    v = np.array([0.6, 0.8j])
    sol = solve_line(LineProblem(standard, v, 8.0, 129))
    assert sol.converged and len(sol.iterations) == 1
    assert np.array_equal(sol.samples.values, line_reference(8.0, 129, v).values)
    assert sol.growth_sup == 0.0


@given(st.floats(0, 2 * np.pi), st.floats(0, np.pi / 2))
def test_line_direction_equivariance_standard(phase, angle):
    J = make_structure("standard", n=2)
    U = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]) * np.exp(1j * phase)
    v = U @ E1
    a = solve_line(LineProblem(J, E1, 4.0, 17)).samples.values
    b = solve_line(LineProblem(J, v, 4.0, 17)).samples.values
    assert np.abs(b - a @ U.T).max() <= 1e-14


def test_line_problem_validation(standard):
    with pytest.raises(ValueError, match="unit"):
        LineProblem(standard, np.array([1.0, 1.0]), 4.0, 17)
    with pytest.raises(ValueError):
        LineProblem(standard, np.array([1.0]), 4.0, 17)


@pytest.fixture(scope="module")
def bump_line():
    J = bump(1e-2)
    return J, solve_line(LineProblem(J, E1, 8.0, 129))


def test_line_bump_converges(bump_line):
    J, sol = bump_line
    assert sol.converged
    assert sol.residual_CR <= 1e-4
    assert 0 < sol.growth_sup <= 20 * 1e-2
    assert sol.iterations[-1][0] <= 1e-12


def test_line_fixed_point_consistency(bump_line):
    J, sol = bump_line
    z = sol.samples
    Q = cauchy_green(beltrami_forcing(J, z), "fft").values + line_reference(z.R, z.N, E1).values
    assert weighted_c0_norm(z.like(z.values - Q)) <= 2 * 1e-12


def test_line_geometric_convergence(bump_line):
    J, sol = bump_line
    rng = np.random.default_rng(0)
    ref = sol.reference
    est = max(contraction_estimate(J, near_reference(ref, rng, 0.05), near_reference(ref, rng, 0.05)) for _ in range(3))
    steps = [s for s, _ in sol.iterations]
    for k in range(2, len(steps)):
        if steps[k] > 1e-14:
            assert steps[k] / steps[k - 1] <= est + 0.1


def test_line_pullback_is_holomorphic(bump_line):
    J, sol = bump_line
    z = sol.samples
    w = to_complex(J.inverse(to_real(z.values)))
    _, wb = wirtinger(w, z.h)
    res = np.linalg.norm(wb, axis=-1)[z.interior(2)].max()
    assert res <= max(1e-5, 10 * z.h**2)


def test_line_growth_linear_in_lambda_quick():
    lams = np.array([1e-3, 3e-3, 1e-2])
    growth = [solve_line(LineProblem(bump(l), E1, 8.0, 65)).growth_sup for l in lams]
    slope = np.polyfit(np.log(lams), np.log(growth), 1)[0]
    assert 0.85 <= slope <= 1.15


def test_line_max_iter_reports_divergence():
    sol = solve_line(LineProblem(bump(1e-2), E1, 8.0, 65, settings=SolverSettings(max_iter=2)))
    assert not sol.converged and len(sol.iterations) == 2


def test_line_contraction_failure_raises():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ContractionFailure) as info:
            solve_line(LineProblem(Wavy(), np.array([1.0 + 0j]), 8.0, 65))
    assert info.value.iterations and info.value.iterations[-1][1] >= 1


def test_admissibility_warning():
    with pytest.warns(RuntimeWarning, match="admissibility"):
        solve_line(LineProblem(bump(1e-2), E1, 8.0, 33, settings=SolverSettings(admissibility_lambda=1e-3)))


def test_strict_norm_diagnostics():
    sol = solve_line(LineProblem(bump(1e-2), E1, 8.0, 33, settings=SolverSettings(strict_norm=True)))
    assert sol.diagnostics["distance_to_reference_C1gamma_w"] > 0
    assert "within_epsilon0" in sol.diagnostics


def test_solution_serializes(bump_line):
    import json

    _, sol = bump_line
    d = json.loads(json.dumps(sol.to_dict()))
    assert d["kind"] == "line" and d["converged"] and len(d["iterations"]) == len(sol.iterations)


# discs ------------------------------------------------------------------------------------


def test_disc_standard_exact(standard):
    a = np.array([0.3 - 0.2j])
    sol = solve_disc(standard, a, N=33)
    Z = sol.samples.nodes
    assert np.array_equal(sol.samples.values[..., 0], np.full(Z.shape, a[0]))
    assert np.array_equal(sol.samples.values[..., 1], Z)


def test_disc_bump_bounds_and_pin():
    devs = {}
    for lam in (1e-2, 5e-3):
        sol = solve_disc(bump(lam), np.array([0j]), N=129)
        assert sol.converged
        c = sol.samples.N // 2
        assert np.array_equal(sol.samples.values[c, c], np.zeros(2, complex))
        devs[lam] = sol.growth_sup
    assert devs[1e-2] <= 20 * 1e-2
    assert devs[1e-2] / devs[5e-3] == pytest.approx(2.0, rel=0.15)


def test_disc_validation(standard):
    with pytest.raises(ValueError, match="odd"):
        solve_disc(standard, np.array([0j]), N=32)
    with pytest.raises(ValueError):
        solve_disc(standard, np.array([2.0 + 0j]), N=33)


# Frechet derivative and contraction -----------------------------------------------------


def test_frechet_standard_identity(standard, rng):
    ref = line_reference(4.0, 33, E1)
    zd = near_reference(ref, rng, 1.0)
    assert np.array_equal(frechet_derivative(standard, ref, zd).values, zd.values)


def test_frechet_gateaux_first_order(bump_line, rng):
    J, sol = bump_line
    z = sol.samples
    zd = near_reference(z, rng, 1.0)
    zd = zd.like(zd.values - z.values)
    D = frechet_derivative(J, z, zd).values
    errs = []
    for eps in (1e-3, 1e-4):
        fd = (phi(J, z.like(z.values + eps * zd.values)).values - phi(J, z).values) / eps
        errs.append(np.abs(fd - D).max())
    # the Gateaux quotient approaches the B-formula at rate O(eps)
    assert errs[1] <= 0.2 * errs[0]


def test_frechet_operator_proxy_linear(bump_line, rng):
    J, sol = bump_line
    z = sol.samples
    ratios = []
    for _ in range(20):
        zd = near_reference(z, rng, 1.0)
        zd = zd.like(zd.values - z.values)
        out = frechet_derivative(J, z, zd)
        ratios.append(weighted_c0_norm(out.like(out.values - zd.values)) / weighted_c0_norm(zd))
    assert max(ratios) <= 10 * 1e-2


def test_frechet_shape_mismatch(standard):
    with pytest.raises(ValueError):
        frechet_derivative(standard, line_reference(4.0, 33, E1), line_reference(4.0, 17, E1))


def test_contraction_standard_zero(standard, rng):
    ref = line_reference(4.0, 33, E1)
    assert contraction_estimate(standard, near_reference(ref, rng, 0.1), near_reference(ref, rng, 0.1)) == 0.0


def test_contraction_degenerate_pair(standard):
    ref = line_reference(4.0, 33, E1)
    with pytest.raises(ValueError, match="degenerate"):
        contraction_estimate(standard, ref, ref)


# evaluation and covering ------------------------------------------------------------------


def test_evaluate_standard_exact(standard):
    assert np.array_equal(evaluate(standard, 2.5, E1, R=8.0, N=33), 2.5 * E1)


def test_cover_standard_one_step(standard):
    p = np.array([1.5, 1.0j])
    res = LineAtlas(standard, R=8.0, N=33).cover_point(p)
    assert res.converged and res.steps == 1 and res.error == 0.0
    assert to_complex(np.array(res.v)) == pytest.approx(p / np.linalg.norm(p))
    assert res.zeta == pytest.approx([np.linalg.norm(p), 0.0])


def test_cover_out_of_region(standard):
    with pytest.raises(OutOfRegion):
        LineAtlas(standard, R=8.0, N=33).cover_point(np.array([0.5, 0.5j]))


def test_cover_bump_near_ball():
    atlas = LineAtlas(bump(1e-2), R=20.0, N=129)
    p = np.array([0.9 + 0.2j, 0.5 - 0.3j])
    res = atlas.cover_point(p)
    assert res.converged and res.error <= 1e-4
    again = atlas.cover_point(p)
    assert again.error == res.error


def test_atlas_caches_lines(standard):
    atlas = LineAtlas(standard, R=8.0, N=33)
    atlas.line(E1)
    atlas.line(E1)
    assert atlas.solves == 1


# foliation ----------------------------------------------------------------------------------


def test_foliation_standard_ratio_one(standard):
    rep = foliation_check(standard, center_lattice(3, 0.3), N=33)
    assert rep.min_ratio == pytest.approx(1.0, abs=1e-14)
    assert rep.certified


def test_foliation_insufficient_centers(standard):
    with pytest.raises(InsufficientCenters, match="insufficient centers"):
        foliation_check(standard, [0j], N=33)


def test_foliation_bump_lattice():
    rep = foliation_check(bump(1e-2), center_lattice(5, 0.3), N=65, workers=2)
    assert rep.min_ratio >= 0.8 and rep.all_converged


def test_foliation_reports_failing_center():
    with pytest.raises(RuntimeError, match="center"):
        foliation_check(bump(1e-2), [0j, 0.5 + 0j], N=64)
