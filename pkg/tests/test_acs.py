import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from jcurves.acs import (
    coframe,
    decay_report,
    deformation_matrix,
    deformation_real,
    dbar_function,
    levi_form,
    levi_form_frame,
    levi_lower_bound,
    nijenhuis,
    nijenhuis_extrapolated,
    re_z1_squared,
    shell_samples,
    squared_norm,
    structure_coefficients,
    unit_directions,
    validate_structure,
    volume_density,
)
from jcurves.coords import complex_basis, linear_to_real, standard_structure
from jcurves.structures import ConstantStructure, StructureTooFar, make_structure

points4 = arrays(np.float64, 4, elements=st.floats(-3, 3))


def stretch(eps):
    D = np.diag([1.0 + eps, 1.0])
    return ConstantStructure(D @ standard_structure(1) @ np.linalg.inv(D))


def levi_oracle(J, phi, p, v, h=1e-4):
    """1/4 d(-dphi o J)(v, Jv) by centered differences of the 1-form alpha = -dphi J."""

    def alpha(x):
        return -phi.gradient(x) @ J.evaluate(x)

    def d_alpha(e):
        return (alpha(p + h * e) - alpha(p - h * e)) / (2 * h)

    Jv = J.evaluate(p) @ v
    return 0.25 * (d_alpha(v) @ Jv - d_alpha(Jv) @ v)


def top_form(forms):
    """Evaluate prod_j (i/2) omega_j ^ omegabar_j on the ordered real basis by antisymmetrization."""
    n = forms.shape[0]
    rows = []
    for f in forms:
        rows += [f, np.conj(f)]
    total = 0.0
    for perm in itertools.permutations(range(2 * n)):
        sign = np.linalg.det(np.eye(2 * n)[list(perm)])
        term = 1.0
        for k in range(2 * n):
            term = term * rows[k][perm[k]]
        total += sign * term
    return (0.5j) ** n * total


# validation ----------------------------------------------------------------


def test_standard_validates_exactly(standard, rng):
    rep = validate_structure(standard, rng.normal(size=(20, 4)))
    assert rep.max_residual == 0.0 and rep.passed


def test_pushforward_squares_to_minus_identity(bump, rational, rng):
    pts = rng.normal(size=(100, 4)) * 2
    for J in (bump, rational):
        assert validate_structure(J, pts, tol=1e-12).passed


def test_non_structure_fails_with_expected_residual():
    eps = 1e-3
    E = np.eye(4)
    J = ConstantStructure(standard_structure(2) + eps * E)
    rep = validate_structure(J, np.zeros((3, 4)))
    expected = np.linalg.norm(eps * (standard_structure(2) @ E + E @ standard_structure(2)) + eps**2 * E @ E, 2)
    assert not rep.passed
    assert rep.max_residual == pytest.approx(expected, rel=1e-12)
    assert rep.max_residual == pytest.approx(2e-3, rel=1e-3)


def test_validate_rejects_empty(standard):
    with pytest.raises(ValueError):
        validate_structure(standard, np.zeros((0, 4)))


@given(points4)
def test_gallery_squares_property(z):
    for fam, kw in [("pushforward_bump", {"delta": 1e-2}), ("pushforward_rational", {"delta": 1e-2}), ("nonintegrable", {"amplitude": 1e-2})]:
        M = make_structure(fam, 2, **kw).evaluate(z)
        assert np.linalg.norm(M @ M + np.eye(4)) <= 1e-10


# Nijenhuis ------------------------------------------------------------------


def test_nijenhuis_standard_is_zero(standard, rng):
    z, X, Y = rng.normal(size=(3, 4))
    assert np.all(nijenhuis(standard, z, X, Y) == 0.0)


@given(points4, points4, points4)
def test_nijenhuis_antisymmetric_bitwise(z, X, Y):
    J = make_structure("nonintegrable", 2, amplitude=0.1)
    assert np.array_equal(nijenhuis(J, z, X, Y), -nijenhuis(J, z, Y, X))


def test_nijenhuis_j_relation(rng):
    J = make_structure("nonintegrable", 2, amplitude=0.1)
    z, X, Y = rng.normal(size=(3, 4)) * 0.7
    lhs = nijenhuis(J, z, J.evaluate(z) @ X, Y)
    rhs = -J.evaluate(z) @ nijenhuis(J, z, X, Y)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(1.0, np.linalg.norm(rhs))


def test_nijenhuis_fd_integrable_shrinks_under_halving(bump, rng):
    z, X, Y = rng.normal(size=(3, 4))
    J = bump.with_mode("fd")
    norms = [np.linalg.norm(nijenhuis(J, z, X, Y, h=h)) for h in (4e-2, 2e-2, 1e-2)]
    # fourth-order stencils: the error falls by at least 4 per halving until rounding
    assert norms[1] < norms[0] / 4 and norms[2] < norms[1] / 4


def test_nijenhuis_nonintegrable_two_resolutions_agree():
    lam = 1e-2
    J = make_structure("nonintegrable", 2, amplitude=lam).with_mode("fd")
    z = np.array([0.5, 0.0, 0.0, 0.0])
    X, Y = np.eye(4)[0], np.eye(4)[2]
    a = nijenhuis(J, z, X, Y, h=1e-3)
    b = nijenhuis(J, z, X, Y, h=5e-4)
    assert np.linalg.norm(a - b) <= 1e-3 * np.linalg.norm(a)
    assert np.linalg.norm(a) >= 0.1 * lam


def test_nonintegrable_tensor_vanishes_on_unit_circle_of_first_coordinate():
    # d/dzbar_1 (zbar_1 e^{-|z|^2}) = (1 - |z_1|^2) e^{-|z|^2} vanishes at |z_1| = 1
    J = make_structure("nonintegrable", 2, amplitude=1e-2)
    N, _, _ = nijenhuis_extrapolated(J, np.array([1.0, 0, 0, 0]), np.eye(4)[0], np.eye(4)[2])
    assert np.linalg.norm(N) <= 1e-12


def test_nijenhuis_dimension_mismatch(standard):
    with pytest.raises(ValueError):
        nijenhuis(standard, np.zeros(4), np.zeros(3), np.zeros(4))


# deformation matrix and coframe --------------------------------------------


def test_deformation_standard_is_zero(standard, rng):
    assert np.all(deformation_matrix(standard, rng.normal(size=4)) == 0)


def test_deformation_stretch_closed_form():
    # J = D J_st D^{-1}, D = diag(a, 1): Q = diag((1-a)/(1+a), (a-1)/(a+1)), A = Q_00 + i Q_10
    eps = 0.1
    a = 1 + eps
    J = stretch(eps)
    Jm = J.evaluate(np.zeros(2))
    P, M = Jm + standard_structure(1), Jm - standard_structure(1)
    Q = np.linalg.inv(P) @ M
    assert Q == pytest.approx(np.diag([(1 - a) / (1 + a), (a - 1) / (a + 1)]), abs=1e-15)
    assert deformation_matrix(J, np.zeros(2))[0, 0] == pytest.approx(-eps / (2 + eps), abs=1e-15)


def test_deformation_singular_raises():
    J = ConstantStructure(-standard_structure(1))
    with pytest.raises(StructureTooFar, match="too far"):
        deformation_real(J, np.zeros(2))


def test_deformation_antilinear(gallery_member, rng):
    Jst = gallery_member.J_st
    for z in rng.normal(size=(50, 4)):
        Q = deformation_real(gallery_member, z)
        assert np.linalg.norm(Q @ Jst + Jst @ Q) <= 1e-12


def test_coframe_standard_zero(standard):
    assert np.all(coframe(standard, np.ones(4)).b == 0)


def test_coframe_forms_are_type_10(gallery_member, rng):
    for z in rng.normal(size=(10, 4)):
        cf = coframe(gallery_member, z)
        om = cf.forms()
        M = gallery_member.evaluate(z)
        assert np.abs(om @ M - 1j * om).max() <= 1e-12 * (1 + np.linalg.norm(M, 2))


def test_coframe_matches_deformation_on_basis(gallery_member, rng):
    # omega_j(e_m) computed from b and from A must coincide on every real basis vector
    E = complex_basis(2)
    for z in rng.normal(size=(10, 4)):
        b = coframe(gallery_member, z).b
        A = deformation_matrix(gallery_member, z)
        assert np.abs((E + b @ np.conj(E)) - (E + A @ np.conj(E))).max() <= 1e-12


def test_coframe_stretch():
    eps = 0.1
    assert coframe(stretch(eps), np.zeros(2)).b[0, 0] == pytest.approx(-eps / (2 + eps), abs=1e-15)


def test_coframe_singular_raises():
    with pytest.raises(StructureTooFar):
        coframe(ConstantStructure(-standard_structure(1)), np.zeros(2))


# structure coefficients -----------------------------------------------------


def test_structure_coefficients_standard(standard):
    assert np.abs(structure_coefficients(standard, np.ones(4))).max() == 0.0


def test_structure_coefficients_constant_vanish():
    c = structure_coefficients(stretch(0.2), np.array([0.3, -0.1]))
    assert np.abs(c).max() <= 1e-12


def test_structure_coefficients_step_halving(bump):
    a = structure_coefficients(bump, np.zeros(4), h_fd=1e-3)
    b = structure_coefficients(bump, np.zeros(4), h_fd=5e-4)
    assert np.abs(a).max() > 1e-4
    assert np.abs(a - b).max() <= 1e-3 * np.abs(a).max()


# Levi form --------------------------------------------------------------------


def test_levi_standard_normalization(standard, rng):
    for p, v in rng.normal(size=(10, 2, 4)):
        assert levi_form(standard, squared_norm(), p, v) == pytest.approx(v @ v, rel=1e-14)


def test_levi_pluriharmonic_vanishes(standard, rng):
    for p in rng.normal(size=(10, 4)):
        assert levi_form(standard, re_z1_squared(), p, np.eye(4)[0]) == pytest.approx(0.0, abs=1e-14)


def test_levi_against_fd_oracle(bump, rng):
    for _ in range(100):
        p = rng.normal(size=4)
        v = rng.normal(size=4)
        v /= np.linalg.norm(v)
        val = levi_form(bump, squared_norm(), p, v)
        assert val == pytest.approx(levi_oracle(bump, squared_norm(), p, v), abs=1e-7)
        assert abs(val - 1.0) <= 20 * 1e-2


def test_levi_frame_formula_agrees(gallery_member, rng):
    h = 1e-3
    for _ in range(5):
        p, v = rng.normal(size=(2, 4))
        a = levi_form(gallery_member, squared_norm(), p, v)
        b = levi_form_frame(gallery_member, squared_norm(), p, v, h_fd=h)
        assert abs(a - b) <= 10 * h


def test_levi_lower_bound_standard(standard):
    assert levi_lower_bound(standard, squared_norm(), shell_samples(2, (1.0, 2.0), 10)).tau0_estimate == pytest.approx(1.0, abs=1e-15)


def test_levi_lower_bound_large_deformation_reports():
    J = make_structure("pushforward_bump", 2, delta=0.4)
    rep = levi_lower_bound(J, squared_norm(), shell_samples(2, (0.5, 1.0, 2.0, 4.0), 250))
    assert rep.sample_count == 1000 and np.isfinite(rep.tau0_estimate)


# volume density --------------------------------------------------------------


def test_volume_standard(standard):
    assert volume_density(standard, np.ones(4)) == pytest.approx(1.0, abs=1e-15)


def test_volume_stretch_matches_top_form():
    J = stretch(0.3)
    b = coframe(J, np.zeros(2)).b[0, 0]
    top = top_form(coframe(J, np.zeros(2)).forms())
    assert volume_density(J, np.zeros(2)) == pytest.approx(abs(1 - abs(b) ** 2), rel=1e-12)
    assert abs(top) == pytest.approx(volume_density(J, np.zeros(2)), rel=1e-12)


def test_volume_gallery_top_form(gallery_member, rng):
    for z in rng.normal(size=(5, 4)):
        dens = volume_density(gallery_member, z)
        assert abs(top_form(coframe(gallery_member, z).forms())) == pytest.approx(dens, rel=1e-12)
        assert abs(dens - 1) <= 0.1


# dbar of functions ----------------------------------------------------------------


def test_dbar_coordinates_standard(standard, rng):
    z = rng.normal(size=4)
    E = complex_basis(2)
    for k in range(2):
        hol = dbar_function(standard, lambda x, k=k: x[..., 2 * k] + 1j * x[..., 2 * k + 1], z, gradient=lambda x, k=k: E[k])
        anti = dbar_function(standard, None, z, gradient=lambda x, k=k: np.conj(E[k]))
        assert np.abs(hol).max() == 0.0
        assert anti == pytest.approx(np.eye(2)[k], abs=1e-15)


def test_dbar_coordinates_gallery_fd(bump, rng):
    z = rng.normal(size=4)
    E = complex_basis(2)
    from jcurves.acs import coframe as cf

    Wbar = cf(bump, z).dual_frame()[:, 2:]
    for k in range(2):
        f = lambda x, k=k: x[..., 2 * k] + 1j * x[..., 2 * k + 1]
        expected = 0.5j * E[k] @ (bump.evaluate(z) - bump.J_st) @ Wbar
        assert dbar_function(bump, f, z) == pytest.approx(expected, abs=1e-10)


def test_pushforward_coordinates_are_holomorphic(bump, rational, rng):
    for J in (bump, rational):
        for x in rng.normal(size=(5, 4)):
            y = J.forward(x)
            for k in range(2):
                f = lambda p, k=k: (lambda w: w[..., 2 * k] + 1j * w[..., 2 * k + 1])(J.inverse(p))
                assert np.abs(dbar_function(J, f, y)).max() <= 1e-8


# decay -------------------------------------------------------------------------


def test_decay_standard_zero(standard):
    prof = decay_report(standard)
    assert prof.lam == 0.0 and all(e == 0.0 for e in prof.envelopes)


def test_decay_rational_against_dense_sampling(rational):
    prof = decay_report(rational, theta=2.0, K=2)
    radii = sorted(set(prof.radii) | set(np.linspace(0, 12, 40).tolist()))
    dense = decay_report(rational, theta=2.0, K=2, radii=radii, directions=250)
    assert dense.lam >= prof.lam
    # the second-order envelope near |z| = 1/2 sets lambda at about 2.2 delta
    assert 0.5 * 1e-2 <= dense.lam <= 2.5 * 1e-2


def test_decay_bump_vanishes_far_out(bump):
    prof = decay_report(bump, radii=(6.0, 7.0, 8.0), directions=64)
    assert prof.lam <= 1e-10


def test_decay_monotone_in_samples(bump):
    a = decay_report(bump, radii=(0.5, 1.0), directions=16)
    b = decay_report(bump, radii=(0.5, 1.0, 1.5), directions=16)
    assert b.lam >= a.lam


def test_decay_rejects_bad_parameters(bump):
    with pytest.raises(ValueError):
        decay_report(bump, theta=1.0)
    with pytest.raises(ValueError):
        decay_report(bump, K=1)


def test_shell_samples_reproducible():
    assert np.array_equal(shell_samples(2, (1, 2), 32), shell_samples(2, (1, 2), 32))
    assert np.linalg.norm(unit_directions(3, 10), axis=-1) == pytest.approx(np.ones(10))


def test_linear_to_real_is_complex_multiplication():
    M = np.array([[1 + 2j]])
    assert linear_to_real(np.array([[1j]])) == pytest.approx(standard_structure(1))
    assert linear_to_real(M) @ np.array([1.0, 0.0]) == pytest.approx([1.0, 2.0])
