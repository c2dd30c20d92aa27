"""Identification of R^{2n} with C^n.

Real coordinates are interleaved, ``(x_1, y_1, ..., x_n, y_n)`` with
``z_j = x_j + i y_j``.  The standard structure acts as multiplication by ``i``.
"""

import numpy as np


def standard_structure(n):
    """Block-diagonal J_st with blocks [[0, -1], [1, 0]]."""
    return np.kron(np.eye(n), np.array([[0.0, -1.0], [1.0, 0.0]]))


def to_real(w):
    w = np.asarray(w, dtype=complex)
    out = np.empty(w.shape[:-1] + (2 * w.shape[-1],))
    out[..., 0::2] = w.real
    out[..., 1::2] = w.imag
    return out


def to_complex(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def linear_to_real(M):
    """Real 2n x 2n matrix of w -> M w."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[-1]
    out = np.empty(M.shape[:-2] + (2 * n, 2 * n))
    out[..., 0::2, 0::2] = M.real
    out[..., 0::2, 1::2] = -M.imag
    out[..., 1::2, 0::2] = M.imag
    out[..., 1::2, 1::2] = M.real
    return out


def antilinear_to_real(A):
    """Real 2n x 2n matrix of w -> A conj(w)."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[-1]
    out = np.empty(A.shape[:-2] + (2 * n, 2 * n))
    out[..., 0::2, 0::2] = A.real
    out[..., 0::2, 1::2] = A.imag
    out[..., 1::2, 0::2] = A.imag
    out[..., 1::2, 1::2] = -A.real
    return out


def antilinear_from_real(Q):
    """Complex matrix A with Q(w) = A conj(w); Q must be J_st-antilinear."""
    Q = np.asarray(Q, dtype=float)
    return Q[..., 0::2, 0::2] + 1j * Q[..., 1::2, 0::2]


def complex_basis(n):
    """Rows dz_1..dz_n as complex covectors on R^{2n}."""
    E = np.zeros((n, 2 * n), dtype=complex)
    for j in range(n):
        E[j, 2 * j] = 1.0
        E[j, 2 * j + 1] = 1j
    return E


def parse_vector(text, n=None):
    """Parse comma-separated reals into a real vector (interleaved coordinates)."""
    try:
        vals = np.array([float(s) for s in text.split(",") if s.strip()])
    except ValueError as exc:
        raise ValueError(f"cannot parse vector {text!r}: {exc}") from None
    if n is not None and vals.size != 2 * n:
        raise ValueError(f"expected {2 * n} comma-separated reals, got {vals.size}")
    return vals
