"""Tensor calculus for almost complex structures close to J_st.

Covectors are complex row vectors of length 2n (their values on the real
coordinate basis); vectors of the complexified tangent space are complex
column vectors of the same length.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc, norm as _normal

from .coords import antilinear_from_real, complex_basis
from .structures import StructureTooFar


# ---------------------------------------------------------------------------
# sampling


def shell_samples(n, radii, directions):
    """Concentric shells: every radius times a fixed low-discrepancy direction set.

    Directions come from an unscrambled Halton sequence pushed through the
    Gaussian quantile and normalized, so the set is reproducible bit-for-bit.
    """
    dirs = unit_directions(n, directions)
    radii = np.asarray(radii, dtype=float)
    return (radii[:, None, None] * dirs[None]).reshape(-1, 2 * n)


def unit_directions(n, count):
    u = qmc.Halton(d=2 * n, scramble=False).random(count + 1)[1:]
    g = _normal.ppf(u)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    max_residual: float
    passed: bool
    worst_point: list
    tol: float


def validate_structure(J, samples, tol=1e-10):
    """Check J(z)^2 = -I at every sample (spectral norm of J^2 + I)."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    M = J.evaluate(samples)
    res = np.linalg.norm(M @ M + np.eye(2 * J.n), ord=2, axis=(-2, -1))
    k = int(np.argmax(res))
    worst = float(res[k])
    return ValidationReport(worst, bool(worst <= tol), samples[k].tolist(), tol)


# ---------------------------------------------------------------------------
# Nijenhuis tensor


def nijenhuis(J, z, X, Y, h=None):
    """N(X, Y) at z for constant coordinate fields X, Y.

    With brackets of the fields JX, JY expanded through directional
    derivatives of J::

        N = -(DJ[JX] Y - DJ[JY] X) + J (DJ[X] Y - DJ[Y] X)

    ``h`` forces a finite-difference derivative with that relative step.
    """
    z = np.asarray(z, dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    dim = 2 * J.n
    if z.shape[-1] != dim or X.shape[-1] != dim or Y.shape[-1] != dim:
        raise ValueError(f"point and vectors must have {dim} real components")
    Jz = J.evaluate(z)
    JX = np.einsum("...ij,...j->...i", Jz, X)
    JY = np.einsum("...ij,...j->...i", Jz, Y)

    def dJ(e):
        return J.derivative(z, e, h=h)

    def mv(M, v):
        return np.einsum("...ij,...j->...i", M, v)

    a = mv(dJ(JX), Y) - mv(dJ(JY), X)
    b = mv(dJ(X), Y) - mv(dJ(Y), X)
    return -a + mv(Jz, b)


def nijenhuis_extrapolated(J, z, X, Y, h=1e-3):
    """Richardson-extrapolated finite-difference Nijenhuis tensor.

    Returns ``(N_extrapolated, N_h, N_h/2)``; the stencils are fourth order.
    """
    Nh = nijenhuis(J, z, X, Y, h=h)
    Nh2 = nijenhuis(J, z, X, Y, h=h / 2)
    return (16.0 * Nh2 - Nh) / 15.0, Nh, Nh2


# ---------------------------------------------------------------------------
# deformation matrix and coframe


def deformation_real(J, z):
    """Q = (J + J_st)^{-1} (J - J_st) as a real matrix field."""
    z = np.asarray(z, dtype=float)
    M = J.evaluate(z)
    P = M + J.J_st
    # Hadamard ratio |det P| / prod(row norms) lies in [0, 1]; 0 means singular
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(np.linalg.det(P)) / np.prod(np.linalg.norm(P, axis=-1), axis=-1)
    bad = ~np.isfinite(ratio) | (ratio < 1e-12)
    if np.any(bad):
        where = z.reshape(-1, z.shape[-1])[int(np.argmax(bad.reshape(-1)))]
        raise StructureTooFar(f"structure too far from standard: J + J_st singular at {where.tolist()}")
    return np.linalg.solve(P, M - J.J_st)


def deformation_matrix(J, z):
    """Complex n x n matrix A(z) with (J + J_st)^{-1}(J - J_st) w = A conj(w)."""
    return antilinear_from_real(deformation_real(J, z))


@dataclass
class Coframe:
    """Coefficients b of the (1,0)-forms omega_j = dz_j + sum_k b_jk dzbar_k."""

    b: np.ndarray
    residual: float = 0.0

    @property
    def n(self):
        return self.b.shape[-1]

    def forms(self):
        """Rows omega_1..omega_n as complex covectors on R^{2n}."""
        E = complex_basis(self.n)
        return E + self.b @ np.conj(E)

    def dual_frame(self):
        """Vectors (W_1..W_n, Wbar_1..Wbar_n) dual to (omega, omegabar), as columns."""
        om = self.forms()
        M = np.concatenate([om, np.conj(om)], axis=-2)
        return np.linalg.inv(M)


def coframe_coefficients(J, z):
    """Vectorized coframe coefficients b at points z (shape ``(..., n, n)``)."""
    z = np.asarray(z, dtype=float)
    n = J.n
    E = complex_basis(n)
    M = J.evaluate(z)
    # omega(J r) = i omega(r) with omega = E + b conj(E):  b conj(U) = -V
    U = E @ M + 1j * E
    V = E @ M - 1j * E
    Uc = np.conj(U)
    G = Uc @ np.conj(np.swapaxes(Uc, -1, -2))
    cond = np.linalg.cond(G)
    bad = ~np.isfinite(cond) | (cond > 1e12)
    if np.any(bad):
        where = z.reshape(-1, z.shape[-1])[int(np.argmax(bad.reshape(-1)))]
        raise StructureTooFar(f"J is not tamed by the standard splitting at {where.tolist()}")
    rhs = -V @ np.conj(np.swapaxes(Uc, -1, -2))
    # b G = rhs  <=>  G^T b^T = rhs^T
    bT = np.linalg.solve(np.swapaxes(G, -1, -2), np.swapaxes(rhs, -1, -2))
    return np.swapaxes(bT, -1, -2)


def coframe(J, z):
    """Coframe at a single point, with the residual max |omega o J - i omega|."""
    z = np.asarray(z, dtype=float)
    b = coframe_coefficients(J, z)
    cf = Coframe(b)
    om = cf.forms()
    cf.residual = float(np.abs(om @ J.evaluate(z) - 1j * om).max())
    return cf


def _fd_along(fun, z, e, h):
    """Fourth-order centered difference of an array-valued function along e."""
    step = h * (1.0 + np.linalg.norm(z))
    return (fun(z - 2 * step * e) - 8 * fun(z - step * e) + 8 * fun(z + step * e) - fun(z + 2 * step * e)) / (
        12 * step
    )


def structure_coefficients(J, z, h_fd=1e-3):
    """Coefficients c[j, k, l] of the (1,1)-part of d omega_j in the basis omegabar_k ^ omega_l.

    The sum runs over the full index range (k, l).  The exterior derivative
    is taken by finite differences of the coframe field.
    """
    z = np.asarray(z, dtype=float)
    n = J.n
    dim = 2 * n
    Ebar = np.conj(complex_basis(n))
    # db[m] = d b / d x_m
    db = np.stack(
        [_fd_along(lambda p: coframe_coefficients(J, p), z, np.eye(dim)[m], h_fd) for m in range(dim)]
    )
    # d omega_j = sum_k db_jk ^ dzbar_k ; as antisymmetric matrices B[j, m, m']
    dbk = np.einsum("mjk,kq->jmq", db, Ebar)  # (j, m, m') = d_m b_jk dzbar_k(e_m')
    B = dbk - np.swapaxes(dbk, -1, -2)
    W = coframe(J, z).dual_frame()
    Wv, Wbar = W[:, :n], W[:, n:]
    return np.einsum("mk,jmq,ql->jkl", Wbar, B, Wv)


# ---------------------------------------------------------------------------
# Levi form


@dataclass
class ScalarField:
    """A real function given by value, gradient and Hessian callables."""

    value: object
    gradient: object
    hessian: object
    name: str = "phi"


def squared_norm():
    """phi(z) = |z|^2."""
    return ScalarField(
        value=lambda x: np.sum(np.asarray(x) ** 2, axis=-1),
        gradient=lambda x: 2.0 * np.asarray(x, dtype=float),
        hessian=lambda x: 2.0 * np.broadcast_to(np.eye(np.shape(x)[-1]), np.shape(x) + (np.shape(x)[-1],)),
        name="|z|^2",
    )


def re_z1_squared():
    """phi(z) = Re(z_1^2) = x_1^2 - y_1^2, pluriharmonic for J_st."""

    def hess(x):
        x = np.asarray(x, dtype=float)
        H = np.zeros(x.shape + (x.shape[-1],))
        H[..., 0, 0] = 2.0
        H[..., 1, 1] = -2.0
        return H

    def grad(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        g[..., 0] = 2.0 * x[..., 0]
        g[..., 1] = -2.0 * x[..., 1]
        return g

    return ScalarField(lambda x: np.asarray(x)[..., 0] ** 2 - np.asarray(x)[..., 1] ** 2, grad, hess, "Re(z1^2)")


def levi_matrix(J, phi, p):
    """Symmetric real matrix S with L^J(phi, p, v) = v^T S v.

    Coordinate-free value 1/4 d(-dphi o J)(v, Jv), which equals |v|^2 for
    J_st and |z|^2.
    """
    p = np.asarray(p, dtype=float)
    dim = 2 * J.n
    M = J.evaluate(p)
    H = phi.hessian(p)
    g = phi.gradient(p)
    base = H + np.swapaxes(M, -1, -2) @ H @ M
    # first-order terms: g^T (DJ[Jv] v - DJ[v] Jv)
    dJ = np.stack([J.derivative(p, np.eye(dim)[m]) for m in range(dim)], axis=-3)  # (..., m, i, b)
    gD = np.einsum("...i,...mib->...mb", g, dJ)
    T1 = np.einsum("...mc,...mb->...cb", M, gD)
    T2 = np.einsum("...mb,...bc->...mc", gD, M)
    T = T1 - T2
    S = base + 0.5 * (T + np.swapaxes(T, -1, -2))
    return 0.25 * 0.5 * (S + np.swapaxes(S, -1, -2))


def levi_form(J, phi, p, v):
    """Coordinate-free Levi form L^J(phi, p, v), normalized so L^{J_st}(|z|^2, p, v) = |v|^2."""
    v = np.asarray(v, dtype=float)
    S = levi_matrix(J, phi, p)
    return np.einsum("...i,...ij,...j->...", v, S, v)


def levi_form_frame(J, phi, p, v, h_fd=1e-3):
    """Levi form through the coframe: sum phi_kl omega_k(v) conj(omega_l(v)) with

    phi_kl = W_k(Wbar_l phi) + sum_j conj(c^j_kl) Wbar_j phi.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    n = J.n
    dim = 2 * n
    cf = coframe(J, p)
    W = cf.dual_frame()
    Wv, Wbar = W[:, :n], W[:, n:]
    c = structure_coefficients(J, p, h_fd)
    g = phi.gradient(p)
    H = phi.hessian(p)

    def frame(x):
        return coframe(J, x).dual_frame()

    dW = np.stack([_fd_along(frame, p, np.eye(dim)[m], h_fd) for m in range(dim)])  # (m, a, col)
    # derivative of Wbar_l along the complex vector W_k
    dWbar_along = np.einsum("mk,mal->kla", Wv, dW[:, :, n:])
    first = np.einsum("ak,ab,bl->kl", Wv, H, Wbar) + np.einsum("kla,a->kl", dWbar_along, g)
    second = np.einsum("jkl,j->kl", np.conj(c), g @ Wbar)
    phikl = first + second
    om = cf.forms() @ v
    return float(np.real(np.einsum("kl,k,l->", phikl, om, np.conj(om))))


@dataclass
class LeviReport:
    tau0_estimate: float
    sample_count: int
    worst_point: list


def levi_lower_bound(J, phi, samples):
    """Smallest eigenvalue of the Levi matrix over the samples (against |v|^2)."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    S = levi_matrix(J, phi, samples)
    lam = np.linalg.eigvalsh(S)[..., 0]
    k = int(np.argmin(lam))
    return LeviReport(float(lam[k]), int(samples.shape[0]), samples[k].tolist())


# ---------------------------------------------------------------------------
# volume and dbar


def volume_density(J, z):
    """1 + Phi: the Hermitian volume prod (i/2) omega_j ^ omegabar_j against dV_0.

    Equals |det [[I, b], [conj(b), I]]|.
    """
    b = coframe_coefficients(J, z)
    n = J.n
    eye = np.broadcast_to(np.eye(n), b.shape)
    M = np.concatenate(
        [np.concatenate([eye, b], axis=-1), np.concatenate([np.conj(b), eye], axis=-1)], axis=-2
    )
    return np.abs(np.linalg.det(M))


def dbar_function(J, f, z, gradient=None, h_fd=1e-3):
    """Coefficients of dbar_J f = 1/2 (df + i df o J) in the basis omegabar_k at z.

    ``f`` maps points ``(..., 2n)`` to complex values; ``gradient`` may give
    df directly (complex row of length 2n), otherwise it is differenced.
    """
    z = np.asarray(z, dtype=float)
    dim = 2 * J.n
    if gradient is not None:
        df = np.asarray(gradient(z), dtype=complex)
    else:
        df = np.array([_fd_along(f, z, np.eye(dim)[m], h_fd) for m in range(dim)], dtype=complex)
    alpha = 0.5 * (df + 1j * df @ J.evaluate(z))
    W = coframe(J, z).dual_frame()
    return alpha @ W[:, J.n:]


# ---------------------------------------------------------------------------
# decay


@dataclass
class DecayProfile:
    """Weighted sup envelopes of D^alpha (J - J_st), one per derivative order."""

    lam: float
    theta: float
    K: int
    envelopes: list
    argmax: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    directions: int = 0

    def samples(self, n):
        return shell_samples(n, self.radii, self.directions)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "theta": self.theta,
            "K": self.K,
            "envelopes": list(self.envelopes),
            "argmax": list(self.argmax),
            "radii": list(self.radii),
            "directions": self.directions,
        }


def multi_indices(dim, order):
    return list(itertools.combinations_with_replacement(range(dim), order))


def decay_weight(r, order, theta):
    if order <= 1:
        return 1.0 + r ** (order + theta)
    return 1.0 + r ** order


def derivative_norms(J, points, order):
    """max over |alpha| = order of the operator norm of D^alpha (J - J_st), per point."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    best = np.zeros(points.shape[0])
    for alpha in multi_indices(2 * J.n, order):
        D = J.partial(points, alpha)
        if order == 0:
            D = D - J.J_st
        best = np.maximum(best, np.linalg.norm(D, ord=2, axis=(-2, -1)))
    return best


def decay_report(J, theta=2.0, K=2, radii=(0.0, 0.5, 1.0, 2.0, 4.0, 8.0), directions=64):
    """Measure the envelopes sup |D^alpha (J - J_st)(z)| w_alpha(z) on shells."""
    if theta <= 1:
        raise ValueError("theta must exceed 1")
    if K < 2:
        raise ValueError("K must be at least 2")
    samples = shell_samples(J.n, radii, directions)
    r = np.linalg.norm(samples, axis=-1)
    envelopes, argmax = [], []
    for order in range(K + 1):
        vals = derivative_norms(J, samples, order) * decay_weight(r, order, theta)
        k = int(np.argmax(vals))
        envelopes.append(float(vals[k]))
        argmax.append(samples[k].tolist())
    return DecayProfile(
        lam=float(max(envelopes)),
        theta=float(theta),
        K=int(K),
        envelopes=envelopes,
        argmax=argmax,
        radii=[float(x) for x in radii],
        directions=int(directions),
    )
