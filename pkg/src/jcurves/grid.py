"""Uniform square grids on [-R, R]^2 carrying C^n-valued samples."""

import csv
import io
import struct
from dataclasses import dataclass

import numpy as np


@dataclass
class NormParams:
    """Holder exponent gamma, integrability exponent p with theta * p > 2, radius epsilon0."""

    gamma: float = 0.5
    p: float = 1.5
    epsilon0: float = 0.5
    theta: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma in (0,1) required, got {self.gamma}")
        if not 1.0 < self.p < 2.0:
            raise ValueError(f"p in (1,2) required, got {self.p}")
        if self.epsilon0 <= 0:
            raise ValueError(f"epsilon0 > 0 required, got {self.epsilon0}")
        if self.theta <= 1.0:
            raise ValueError(f"theta > 1 required, got {self.theta}")
        if self.theta * self.p <= 2.0:
            raise ValueError(f"theta*p > 2 required, got theta*p = {self.theta * self.p}")


class GridMismatch(ValueError):
    pass


@dataclass
class PlaneGrid:
    """Samples ``values[j, k]`` at zeta = (-R + j h) + i (-R + k h), h = 2R / (N - 1)."""

    R: float
    N: int
    values: np.ndarray

    def __post_init__(self):
        self.R = float(self.R)
        self.N = int(self.N)
        if self.N < 8:
            raise ValueError("N >= 8 required")
        if self.R <= 0:
            raise ValueError("R > 0 required")
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 2:
            v = v[..., None]
        if v.shape[:2] != (self.N, self.N):
            raise ValueError(f"values must have shape (N, N, n), got {v.shape}")
        self.values = v

    @property
    def n(self):
        return self.values.shape[-1]

    @property
    def h(self):
        return 2.0 * self.R / (self.N - 1)

    @property
    def axis(self):
        return -self.R + self.h * np.arange(self.N)

    @property
    def nodes(self):
        return node_grid(self.R, self.N)

    @classmethod
    def zeros(cls, R, N, n=1):
        return cls(R, N, np.zeros((N, N, n), dtype=complex))

    @classmethod
    def from_function(cls, R, N, fun):
        """Sample ``fun(zeta)`` (complex array in, ``(..., n)`` or scalar out) on the nodes."""
        vals = np.asarray(fun(node_grid(R, N)), dtype=complex)
        return cls(R, N, vals)

    def like(self, values):
        return PlaneGrid(self.R, self.N, values)

    def same_grid(self, other):
        return self.N == other.N and self.R == other.R

    def interior(self, width=2):
        m = np.zeros((self.N, self.N), dtype=bool)
        m[width:-width, width:-width] = True
        return m

    # serialization -------------------------------------------------------

    def to_csv(self, path_or_buf=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.n
        w.writerow(["zeta_re", "zeta_im"] + [f"re_{i + 1}" for i in range(n)] + [f"im_{i + 1}" for i in range(n)])
        Z = self.nodes
        for j in range(self.N):
            for k in range(self.N):
                v = self.values[j, k]
                row = [Z[j, k].real, Z[j, k].imag] + list(v.real) + list(v.imag)
                w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        with open(path_or_buf, "w") as fh:
            fh.write(text)

    @classmethod
    def from_csv(cls, path_or_text):
        if "\n" in str(path_or_text):
            text = path_or_text
        else:
            with open(path_or_text) as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        header, data = rows[0], np.array(rows[1:], dtype=float)
        n = (len(header) - 2) // 2
        N = int(round(np.sqrt(data.shape[0])))
        R = -data[0, 0]
        vals = (data[:, 2 : 2 + n] + 1j * data[:, 2 + n :]).reshape(N, N, n)
        return cls(R, N, vals)

    def to_bytes(self):
        """Header R, N, n as little-endian 64-bit values, then row-major complex doubles."""
        head = struct.pack("<dqq", self.R, self.N, self.n)
        return head + np.ascontiguousarray(self.values, dtype="<c16").tobytes()

    @classmethod
    def from_bytes(cls, data):
        R, N, n = struct.unpack("<dqq", data[:24])
        vals = np.frombuffer(data[24:], dtype="<c16").reshape(N, N, n).copy()
        return cls(R, N, vals)


def node_grid(R, N):
    h = 2.0 * R / (N - 1)
    x = -R + h * np.arange(N)
    return x[:, None] + 1j * x[None, :]


def _diff_axis(f, h, axis):
    """Fourth-order first derivative; one-sided within two nodes of the boundary."""
    f = np.moveaxis(f, axis, 0)
    if f.shape[0] < 5:
        raise ValueError("stencil underflow: need at least 5 nodes per axis")
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return np.moveaxis(d, 0, axis)


def wirtinger(values, h):
    """(d/dzeta, d/dzetabar) of grid values of shape (N, N, ...)."""
    fx = _diff_axis(values, h, 0)
    fy = _diff_axis(values, h, 1)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


def d_zeta(grid):
    return grid.like(wirtinger(grid.values, grid.h)[0])


def d_zetabar(grid):
    return grid.like(wirtinger(grid.values, grid.h)[1])
