"""Almost complex structure fields on R^{2n} and the analytic test gallery.

A structure field maps points of shape ``(..., 2n)`` to real matrices of shape
``(..., 2n, 2n)``.  Gallery members provide exact first derivatives; every
field falls back to centered fourth-order finite differences otherwise.
"""

import itertools

import numpy as np

from .coords import antilinear_to_real, standard_structure

# first-derivative stencil (4th order) and the higher ones used for mixed partials
_STENCILS = {
    1: ((-2, -1, 1, 2), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
    2: ((-2, -1, 0, 1, 2), np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0),
    3: ((-2, -1, 1, 2), np.array([-1.0, 2.0, -2.0, 1.0]) / 2.0),
}


class StructureTooFar(ValueError):
    """J(z) + J_st is singular, or the standard splitting degenerates."""


class StructureField:
    """Base class for a field z -> J(z).

    Parameters
    ----------
    n : int
        Complex dimension.
    jacobian_mode : {"analytic", "fd"}
        Whether :meth:`derivative` uses the family's exact derivative.
    h_fd : float
        Relative finite-difference step; the absolute step at z is
        ``h_fd * (1 + |z|)``.
    """

    family = "generic"

    def __init__(self, n, jacobian_mode="analytic", h_fd=1e-3):
        if n < 1:
            raise ValueError("dimension n must be positive")
        if jacobian_mode not in ("analytic", "fd"):
            raise ValueError(f"unknown jacobian_mode {jacobian_mode!r}")
        self.n = int(n)
        self.jacobian_mode = jacobian_mode
        self.h_fd = float(h_fd)
        self.J_st = standard_structure(self.n)
        self._cache = {}

    @property
    def params(self):
        return {}

    def describe(self):
        return {"family": self.family, "n": self.n, "params": self.params}

    def evaluate(self, points):
        raise NotImplementedError

    def _analytic_derivative(self, points, direction):
        raise NotImplementedError

    @property
    def has_analytic_derivative(self):
        return type(self)._analytic_derivative is not StructureField._analytic_derivative

    def _check(self, points):
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != 2 * self.n:
            raise ValueError(f"points must have trailing dimension {2 * self.n}, got {points.shape}")
        return points

    def derivative(self, points, direction, h=None):
        """Directional derivative DJ(z)[direction]."""
        points = self._check(points)
        direction = np.broadcast_to(np.asarray(direction, dtype=float), points.shape)
        if self.jacobian_mode == "analytic" and self.has_analytic_derivative and h is None:
            return self._analytic_derivative(points, direction)
        return self.derivative_fd(points, direction, h)

    def derivative_fd(self, points, direction, h=None):
        points = self._check(points)
        direction = np.broadcast_to(np.asarray(direction, dtype=float), points.shape)
        size = np.linalg.norm(direction, axis=-1)
        unit = direction / np.where(size > 0, size, 1.0)[..., None]
        rel = self.h_fd if h is None else h
        step = rel * (1.0 + np.linalg.norm(points, axis=-1))
        offsets, weights = _STENCILS[1]
        acc = 0.0
        for o, w in zip(offsets, weights):
            acc = acc + w * self.evaluate(points + (o * step)[..., None] * unit)
        return acc / step[..., None, None] * size[..., None, None]

    def partial(self, points, alpha):
        """Coordinate partial derivative D^alpha J.

        ``alpha`` is a sequence of coordinate indices, e.g. ``(0, 0, 3)`` for
        the third-order mixed partial d^3/dx_1^2 dx_3.  Order one is
        delegated to :meth:`derivative`; higher orders apply tensor-product
        centered differences to the first derivative.
        """
        points = self._check(points)
        alpha = tuple(int(a) for a in alpha)
        if not alpha:
            return self.evaluate(points)
        first = np.zeros(2 * self.n)
        first[alpha[0]] = 1.0
        if len(alpha) == 1:
            return self.derivative(points, first)
        counts = {}
        for a in alpha[1:]:
            counts[a] = counts.get(a, 0) + 1
        if max(counts.values()) > 3:
            raise ValueError("mixed partials with more than 3 repeats per coordinate are not supported")
        rel = self.h_fd if len(alpha) == 2 else 10.0 * self.h_fd
        step = rel * (1.0 + np.linalg.norm(points, axis=-1))
        coords = sorted(counts)
        stencils = [_STENCILS[counts[c]] for c in coords]
        acc = 0.0
        for combo in itertools.product(*[list(zip(*s)) for s in stencils]):
            shift = np.zeros(2 * self.n)
            weight = 1.0
            for c, (o, w) in zip(coords, combo):
                shift[c] = o
                weight *= w
            acc = acc + weight * self.derivative(points + step[..., None] * shift, first)
        return acc / (step ** (len(alpha) - 1))[..., None, None]

    def with_mode(self, jacobian_mode, h_fd=None):
        """Copy of this field with a different derivative mode."""
        other = object.__new__(type(self))
        other.__dict__.update(self.__dict__)
        other.jacobian_mode = jacobian_mode
        if h_fd is not None:
            other.h_fd = float(h_fd)
        other._cache = {}
        return other


class StandardStructure(StructureField):
    family = "standard"

    def evaluate(self, points):
        points = self._check(points)
        return np.broadcast_to(self.J_st, points.shape[:-1] + self.J_st.shape).copy()

    def _analytic_derivative(self, points, direction):
        return np.zeros(points.shape[:-1] + self.J_st.shape)


class ConstantStructure(StructureField):
    """Constant matrix field; not validated, so it can also hold non-structures."""

    family = "constant"

    def __init__(self, matrix, **kw):
        matrix = np.asarray(matrix, dtype=float)
        super().__init__(matrix.shape[0] // 2, **kw)
        self.matrix = matrix

    @property
    def params(self):
        return {"matrix": self.matrix.tolist()}

    def evaluate(self, points):
        points = self._check(points)
        return np.broadcast_to(self.matrix, points.shape[:-1] + self.matrix.shape).copy()

    def _analytic_derivative(self, points, direction):
        return np.zeros(points.shape[:-1] + self.matrix.shape)


class PushforwardStructure(StructureField):
    """J = F_*(J_st) for F(x) = x + delta * g(x) * u with a scalar profile g.

    Subclasses supply the profile value, gradient and Hessian.
    """

    newton_tol = 1e-15
    newton_maxiter = 60

    def __init__(self, n, delta, u, **kw):
        super().__init__(n, **kw)
        u = np.asarray(u, dtype=float)
        if u.shape != (2 * self.n,):
            raise ValueError(f"direction vector must have {2 * self.n} real entries")
        self.delta = float(delta)
        self.u = u
        if abs(self.delta) * np.linalg.norm(u) * self.lipschitz() >= 1.0:
            raise ValueError("delta * |u| * Lip(profile) >= 1: F is not a diffeomorphism")

    def profile(self, x):
        """Return (g, grad g, Hess g) at x."""
        raise NotImplementedError

    def lipschitz(self):
        raise NotImplementedError

    def forward(self, x):
        g, _, _ = self.profile(np.asarray(x, dtype=float))
        return x + self.delta * g[..., None] * self.u

    def differential(self, x):
        _, grad, _ = self.profile(x)
        eye = np.eye(2 * self.n)
        return eye + self.delta * self.u[:, None] * grad[..., None, :]

    def _solve_differential(self, grad, r):
        # dF = I + delta u grad^T is a rank-one update (Sherman-Morrison)
        return r - self.delta * self.u * ((grad * r).sum(-1) / (1.0 + self.delta * grad @ self.u))[..., None]

    def differential_inverse(self, x):
        _, grad, _ = self.profile(x)
        eye = np.eye(2 * self.n)
        denom = 1.0 + self.delta * grad @ self.u
        return eye - self.delta * self.u[:, None] * (grad / denom[..., None])[..., None, :]

    def inverse(self, y):
        """F^{-1}(y) by Newton iteration started at y."""
        y = self._check(y)
        x = y.copy()
        scale = 1.0 + np.linalg.norm(y, axis=-1)
        for _ in range(self.newton_maxiter):
            g, grad, _ = self.profile(x)
            r = x + self.delta * g[..., None] * self.u - y
            dx = self._solve_differential(grad, r)
            x = x - dx
            if np.all(np.linalg.norm(dx, axis=-1) <= self.newton_tol * scale):
                break
        return x

    def evaluate(self, points):
        x = self.inverse(points)
        return self.differential(x) @ self.J_st @ self.differential_inverse(x)

    def _analytic_derivative(self, points, direction):
        x = self.inverse(points)
        D = self.differential(x)
        Dinv = self.differential_inverse(x)
        J = D @ self.J_st @ Dinv
        xdot = np.einsum("...ij,...j->...i", Dinv, direction)
        _, _, hess = self.profile(x)
        hx = np.einsum("...ij,...j->...i", hess, xdot)
        M = self.delta * self.u[:, None] * hx[..., None, :]
        M = M @ Dinv
        return M @ J - J @ M


class BumpPushforward(PushforwardStructure):
    """F(z) = z + delta * exp(-|z|^2) * u."""

    family = "pushforward_bump"

    def __init__(self, n=2, delta=1e-2, u=None, **kw):
        if u is None:
            u = np.zeros(2 * n)
            u[0::2] = 1.0
            u = u / np.linalg.norm(u)
        super().__init__(n, delta, u, **kw)

    @property
    def params(self):
        return {"delta": self.delta, "u": self.u.tolist()}

    def lipschitz(self):
        return np.sqrt(2.0) * np.exp(-0.5)

    def profile(self, x):
        r2 = np.sum(x * x, axis=-1)
        g = np.exp(-r2)
        grad = -2.0 * x * g[..., None]
        hess = g[..., None, None] * (4.0 * x[..., :, None] * x[..., None, :] - 2.0 * np.eye(x.shape[-1]))
        return g, grad, hess


class RationalPushforward(PushforwardStructure):
    """F(z) = z + delta * c / (1 + |z|^2)^s; decay exponent theta = 2s + 1."""

    family = "pushforward_rational"

    def __init__(self, n=2, delta=1e-2, c=None, s=0.5, **kw):
        if c is None:
            c = np.zeros(2 * n)
            c[0] = 1.0
        self.s = float(s)
        if self.s <= 0:
            raise ValueError("s must be positive")
        super().__init__(n, delta, c, **kw)

    @property
    def params(self):
        return {"delta": self.delta, "c": self.u.tolist(), "s": self.s}

    def lipschitz(self):
        # max over r of 2 s r (1 + r^2)^(-s-1), attained at r^2 = 1 / (2s + 1)
        r2 = 1.0 / (2.0 * self.s + 1.0)
        return 2.0 * self.s * np.sqrt(r2) * (1.0 + r2) ** (-self.s - 1.0)

    def profile(self, x):
        q = 1.0 + np.sum(x * x, axis=-1)
        s = self.s
        g = q ** (-s)
        grad = -2.0 * s * x * (q ** (-s - 1.0))[..., None]
        hess = (-2.0 * s * q ** (-s - 1.0))[..., None, None] * np.eye(x.shape[-1]) + (
            4.0 * s * (s + 1.0) * q ** (-s - 2.0)
        )[..., None, None] * (x[..., :, None] * x[..., None, :])
        return g, grad, hess


class DeformationStructure(StructureField):
    """Structure rebuilt from a deformation matrix A(z).

    With Q the real matrix of w -> A conj(w), J = J_st (I + Q)(I - Q)^{-1},
    which inverts Q = (J + J_st)^{-1}(J - J_st).
    """

    def deformation(self, points):
        raise NotImplementedError

    def deformation_derivative(self, points, direction):
        raise NotImplementedError

    def evaluate(self, points):
        points = self._check(points)
        Q = antilinear_to_real(self.deformation(points))
        eye = np.eye(2 * self.n)
        return self.J_st @ (eye + Q) @ np.linalg.inv(eye - Q)

    def _analytic_derivative(self, points, direction):
        Q = antilinear_to_real(self.deformation(points))
        dQ = antilinear_to_real(self.deformation_derivative(points, direction))
        inv = np.linalg.inv(np.eye(2 * self.n) - Q)
        return 2.0 * self.J_st @ inv @ dQ @ inv


class NonintegrableStructure(DeformationStructure):
    """A_{12}(z) = amplitude * conj(z_1) * exp(-|z|^2), all other entries zero (n >= 2)."""

    family = "nonintegrable"

    def __init__(self, n=2, amplitude=1e-2, **kw):
        if n < 2:
            raise ValueError("the nonintegrable family needs n >= 2")
        super().__init__(n, **kw)
        self.amplitude = float(amplitude)

    @property
    def params(self):
        return {"amplitude": self.amplitude}

    def deformation(self, points):
        points = self._check(points)
        A = np.zeros(points.shape[:-1] + (self.n, self.n), dtype=complex)
        r2 = np.sum(points * points, axis=-1)
        A[..., 0, 1] = self.amplitude * (points[..., 0] - 1j * points[..., 1]) * np.exp(-r2)
        return A

    def deformation_derivative(self, points, direction):
        dA = np.zeros(points.shape[:-1] + (self.n, self.n), dtype=complex)
        r2 = np.sum(points * points, axis=-1)
        e = np.exp(-r2)
        zbar1 = points[..., 0] - 1j * points[..., 1]
        dzbar1 = direction[..., 0] - 1j * direction[..., 1]
        xe = np.sum(points * direction, axis=-1)
        dA[..., 0, 1] = self.amplitude * e * (dzbar1 - 2.0 * xe * zbar1)
        return dA


GALLERY = {
    "standard": StandardStructure,
    "pushforward_bump": BumpPushforward,
    "pushforward_rational": RationalPushforward,
    "nonintegrable": NonintegrableStructure,
}


def make_structure(family, n=2, **params):
    """Build a gallery member by name, e.g. ``make_structure("pushforward_bump", 2, delta=1e-2)``."""
    try:
        cls = GALLERY[family]
    except KeyError:
        raise ValueError(f"unknown structure family {family!r}; known: {sorted(GALLERY)}") from None
    return cls(n=n, **params)
