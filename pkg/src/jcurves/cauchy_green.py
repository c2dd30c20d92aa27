"""Cauchy-Green transform on a planar grid and the weighted norm toolbox.

The transform

    T g(zeta) = 1/(2 pi i) \\iint g(tau) dtau ^ dtaubar / (tau - zeta)
              = 1/pi \\iint g(tau) / (zeta - tau) dA(tau)

is discretized with piecewise-constant panels on the square cells centered
at the nodes.  The kernel is integrated in closed form over every cell,
including the one containing zeta, so the weights depend only on the node
offset and the discrete operator is a convolution.
"""

import functools
from dataclasses import dataclass

import numba
import numpy as np

from .grid import GridMismatch, PlaneGrid, node_grid, wirtinger


def _antiderivative(x, y):
    """F with d^2 F / dx dy = 1 / (x + i y), continuous across the axes."""
    r2 = x * x + y * y
    safe_r2 = np.where(r2 > 0, r2, 1.0)
    lr = np.where(r2 > 0, np.log(safe_r2), 0.0)
    sx = np.where(x != 0, x, 1.0)
    sy = np.where(y != 0, y, 1.0)
    ax = np.where(x != 0, x * np.arctan(y / sx), 0.0)
    ay = np.where(y != 0, y * np.arctan(x / sy), 0.0)
    re = 0.5 * y * lr + ax - y  # d^2/dxdy -> x / r^2
    im = 0.5 * x * lr + ay - x  # d^2/dxdy -> y / r^2
    return re - 1j * im


def cell_integral(u1, u2, v1, v2):
    """\\iint over [u1,u2] x [v1,v2] of dA / (u + i v), exact."""
    F = _antiderivative
    return F(u2, v2) - F(u1, v2) - F(u2, v1) + F(u1, v1)


@functools.lru_cache(maxsize=16)
def panel_kernel(N, h):
    """Weights K[dj + N - 1, dk + N - 1] = 1/pi \\iint_cell dA / (zeta - tau) for offset (dj, dk)."""
    d = np.arange(-(N - 1), N, dtype=float)
    dj, dk = np.meshgrid(d, d, indexing="ij")
    K = (h / np.pi) * cell_integral(dj - 0.5, dj + 0.5, dk - 0.5, dk + 0.5)
    K.setflags(write=False)
    return K


@functools.lru_cache(maxsize=16)
def _kernel_fft(N, h):
    size = 2 * N - 1
    shape = (_fft_size(size + N - 1), _fft_size(size + N - 1))
    Kf = np.fft.fft2(panel_kernel(N, h), s=shape)
    Kf.setflags(write=False)
    return Kf, shape


def _fft_size(m):
    # next 5-smooth length
    while True:
        k = m
        for p in (2, 3, 5):
            while k % p == 0:
                k //= p
        if k == 1:
            return m
        m += 1


@numba.njit(cache=True)
def _direct(K, g, out):
    N = g.shape[0]
    nc = g.shape[2]
    for m1 in range(N):
        for m2 in range(N):
            for c in range(nc):
                acc = 0j
                for j1 in range(N):
                    row = m1 - j1 + N - 1
                    for j2 in range(N):
                        acc += K[row, m2 - j2 + N - 1] * g[j1, j2, c]
                out[m1, m2, c] = acc


def apply_kernel(values, h, method="direct"):
    """Discrete transform of raw grid values of shape (N, N, n)."""
    values = np.asarray(values, dtype=complex)
    N = values.shape[0]
    if method == "direct":
        out = np.empty_like(values)
        _direct(np.ascontiguousarray(panel_kernel(N, h)), np.ascontiguousarray(values), out)
        return out
    if method == "fft":
        Kf, shape = _kernel_fft(N, h)
        gf = np.fft.fft2(values, s=shape, axes=(0, 1))
        full = np.fft.ifft2(gf * Kf[..., None], axes=(0, 1))
        return full[N - 1 : 2 * N - 1, N - 1 : 2 * N - 1]
    raise ValueError(f"unknown quadrature method {method!r}")


def cauchy_green(g, method="direct", mask=None):
    """Panel approximation of T g on the nodes of ``g``.

    ``mask`` (boolean N x N) restricts the integration to the selected
    cells, e.g. a disc.  ``method`` chooses the summation strategy over the
    same closed-form weights: "direct" (fixed row-major accumulation per
    output node) or "fft" (zero-padded convolution).
    """
    vals = g.values if mask is None else np.where(mask[..., None], g.values, 0.0)
    return g.like(apply_kernel(vals, g.h, method))


def transform_at(g, points, mask=None):
    """Evaluate the panel transform of ``g`` at arbitrary complex points (off-grid allowed)."""
    points = np.atleast_1d(np.asarray(points, dtype=complex))
    vals = g.values if mask is None else np.where(mask[..., None], g.values, 0.0)
    x = g.axis
    h = g.h
    flat = vals.reshape(-1, g.n)
    out = np.empty(points.shape + (g.n,), dtype=complex)
    X = x[:, None] + 0.0 * x[None, :]
    Y = 0.0 * x[:, None] + x[None, :]
    for idx, zeta in np.ndenumerate(points):
        u1 = zeta.real - (X + h / 2)
        u2 = zeta.real - (X - h / 2)
        v1 = zeta.imag - (Y + h / 2)
        v2 = zeta.imag - (Y - h / 2)
        w = cell_integral(u1, u2, v1, v2).reshape(-1) / np.pi
        out[idx] = w @ flat
    return out


# ---------------------------------------------------------------------------
# residuals and norms


@dataclass
class DbarResidual:
    max: float
    lp: float
    p: float

    def __iter__(self):
        return iter((self.max, self.lp))


def dbar_residual(u, g, p=2.0, width=2):
    """max and L^p aggregate of |u_zetabar - g| over interior nodes."""
    if not u.same_grid(g) or u.n != g.n:
        raise GridMismatch("u and g must live on identical grids")
    _, ub = wirtinger(u.values, u.h)
    res = np.linalg.norm(ub - g.values, axis=-1)
    m = u.interior(width)
    return DbarResidual(float(res[m].max()), float((np.sum(res[m] ** p) * u.h**2) ** (1.0 / p)), p)


def weighted_c0_norm(z):
    """sup |z(zeta)| (1 + |zeta|^2)^(-1/2) over nodes."""
    w = np.sqrt(1.0 + np.abs(z.nodes) ** 2)
    return float((np.linalg.norm(z.values, axis=-1) / w).max())


def lp_norm(g, p):
    if p < 1:
        raise ValueError("p >= 1 required")
    return float(np.sum(np.linalg.norm(g.values, axis=-1) ** p * g.h**2) ** (1.0 / p))


@dataclass
class HolderNorms:
    c0_weighted: float
    c1_sup: float
    holder_seminorm: float
    combined: float


def holder_seminorm(D, nodes, gamma, pairs=100_000, seed=0):
    """Lower-bound estimate of sup |D(a) - D(b)| / |a - b|^gamma.

    Uses every horizontal and vertical nearest-neighbour pair plus ``pairs``
    seeded long-range pairs.
    """
    vals = D.reshape(-1, D.shape[-1]) if D.ndim == 3 else D.reshape(-1, 1)
    pts = nodes.reshape(-1)
    N = nodes.shape[0]
    idx = np.arange(N * N).reshape(N, N)
    a = np.concatenate([idx[:-1, :].ravel(), idx[:, :-1].ravel()])
    b = np.concatenate([idx[1:, :].ravel(), idx[:, 1:].ravel()])
    if pairs:
        # one (pairs, 2) draw: a larger pair count extends the smaller set
        ra, rb = np.random.default_rng(seed).integers(0, N * N, (pairs, 2)).T
        keep = ra != rb
        a = np.concatenate([a, ra[keep]])
        b = np.concatenate([b, rb[keep]])
    num = np.linalg.norm(vals[a] - vals[b], axis=-1)
    den = np.abs(pts[a] - pts[b]) ** gamma
    return float((num / den).max())


def holder_norms(z, params, pairs=100_000, seed=0):
    """Weighted C^{1,gamma} norm: |z|_w + |z_zeta|_{C^{0,gamma}} + |z_zetabar|_{C^{0,gamma}}."""
    if z.N < 5:
        raise ValueError("stencil underflow: N too small")
    dz, dzb = wirtinger(z.values, z.h)
    c0 = weighted_c0_norm(z)
    c1 = float(np.linalg.norm(dz, axis=-1).max() + np.linalg.norm(dzb, axis=-1).max())
    semi = holder_seminorm(dz, z.nodes, params.gamma, pairs, seed) + holder_seminorm(
        dzb, z.nodes, params.gamma, pairs, seed
    )
    return HolderNorms(c0, c1, semi, c0 + c1 + semi)


__all__ = [
    "PlaneGrid",
    "node_grid",
    "cell_integral",
    "panel_kernel",
    "cauchy_green",
    "transform_at",
    "dbar_residual",
    "weighted_c0_norm",
    "lp_norm",
    "holder_norms",
    "holder_seminorm",
    "HolderNorms",
]
