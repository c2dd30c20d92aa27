"""Isotropic dilations J_eps(z') = J(z'/eps) and audits of the scaled decay bounds."""

from dataclasses import dataclass, field

import numpy as np

from .acs import DecayProfile, derivative_norms
from .structures import StructureField

# relative slack for rounding in z'/eps and in the finite-difference partials
AUDIT_RTOL = 1e-9


class DilatedStructure(StructureField):
    """Push-forward of ``base`` under z -> eps z.

    A real scalar map conjugates a (1,1)-tensor by a scalar, so the matrix
    is unchanged: J_eps(z') = base(z' / eps).  Derivatives of order k pick up
    eps^{-k}.  Dilating a dilation multiplies the factors.
    """

    family = "dilated"

    def __init__(self, base, epsilon):
        epsilon = float(epsilon)
        if not epsilon > 0.0:
            raise ValueError(f"epsilon > 0 required, got {epsilon}")
        if epsilon > 1.0:
            raise ValueError(f"epsilon <= 1 required, got {epsilon}")
        if isinstance(base, DilatedStructure):
            epsilon = base.epsilon * epsilon
            base = base.base
        super().__init__(base.n, base.jacobian_mode, base.h_fd)
        self.base = base
        self.epsilon = epsilon

    @property
    def params(self):
        return {"epsilon": self.epsilon, "base": self.base.describe()}

    def _pull(self, points):
        return self._check(points) / self.epsilon

    def evaluate(self, points):
        return self.base.evaluate(self._pull(points))

    def derivative(self, points, direction, h=None):
        direction = np.asarray(direction, dtype=float)
        return self.base.derivative(self._pull(points), direction, h) / self.epsilon

    def _analytic_derivative(self, points, direction):
        return self.base.derivative(points / self.epsilon, direction) / self.epsilon

    def partial(self, points, alpha):
        alpha = tuple(alpha)
        return self.base.partial(self._pull(points), alpha) / self.epsilon ** len(alpha)


def dilate(J, epsilon):
    """Lazily rescaled field J_eps with 0 < eps <= 1."""
    return DilatedStructure(J, epsilon)


def scaled_bound(r, order, epsilon, lam, theta):
    """Right-hand side of the dilated decay conditions at |z'| = r."""
    if order <= 1:
        return epsilon**theta * lam / (epsilon ** (order + theta) + r ** (order + theta))
    return lam / (epsilon**order + r**order)


def shell_bound(order, lam, theta):
    """Uniform bound on |z'| >= 1/2 valid for every eps <= 1."""
    if order <= 1:
        return 2.0 ** (order + theta) * lam
    return 2.0**order * lam


def _jsonable(x):
    return "inf" if np.isinf(x) else float(x)


@dataclass
class AuditReport:
    epsilon: float
    lam: float
    theta: float
    worst_margin: dict
    worst_shell_margin: dict
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "lambda": self.lam,
            "theta": self.theta,
            "worst_margin": {k: _jsonable(v) for k, v in self.worst_margin.items()},
            "worst_shell_margin": {k: _jsonable(v) for k, v in self.worst_shell_margin.items()},
            "violations": self.violations,
            "passed": self.passed,
        }


def verify_scaled_bounds(J, epsilon, profile, samples=None):
    """Audit the dilated decay bounds of J_eps against a profile measured on J.

    Margins are bound / value (infinite where the value vanishes); a sample
    violates when its margin is below 1 - AUDIT_RTOL.  Samples default to
    eps times the profile's shell set, so every audited point maps back to
    a point where the profile was measured.  Shell bounds are checked only
    on |z'| >= 1/2.
    """
    if not isinstance(profile, DecayProfile):
        raise TypeError("profile must be a DecayProfile")
    Je = dilate(J, epsilon)
    if samples is None:
        samples = Je.epsilon * profile.samples(J.n)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    r = np.linalg.norm(samples, axis=-1)
    shell = r >= 0.5
    lam, theta = profile.lam, profile.theta
    worst, worst_shell, violations = {}, {}, []
    for order in range(profile.K + 1):
        vals = derivative_norms(Je, samples, order)
        with np.errstate(divide="ignore", invalid="ignore"):
            margin = np.where(vals > 0, scaled_bound(r, order, Je.epsilon, lam, theta) / vals, np.inf)
            smargin = np.where(vals > 0, shell_bound(order, lam, theta) / vals, np.inf)
        worst[str(order)] = float(margin.min())
        worst_shell[str(order)] = float(smargin[shell].min()) if shell.any() else float("inf")
        for k in np.flatnonzero(margin < 1.0 - AUDIT_RTOL):
            violations.append({"order": order, "bound": "scaled", "point": samples[k].tolist(), "margin": float(margin[k])})
        for k in np.flatnonzero(shell & (smargin < 1.0 - AUDIT_RTOL)):
            violations.append({"order": order, "bound": "shell", "point": samples[k].tolist(), "margin": float(smargin[k])})
    return AuditReport(Je.epsilon, float(lam), float(theta), worst, worst_shell, violations)
