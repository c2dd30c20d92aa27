import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jcurves.structures import DeformationStructure, make_structure

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

GALLERY_KW = {
    "standard": {},
    "pushforward_bump": {"delta": 1e-2},
    "pushforward_rational": {"delta": 1e-2},
    "nonintegrable": {"amplitude": 1e-2},
}


@pytest.fixture(params=sorted(GALLERY_KW))
def gallery_member(request):
    return make_structure(request.param, n=2, **GALLERY_KW[request.param])


@pytest.fixture
def standard():
    return make_structure("standard", n=2)


@pytest.fixture
def bump():
    return make_structure("pushforward_bump", n=2, delta=1e-2)


@pytest.fixture
def rational():
    return make_structure("pushforward_rational", n=2, delta=1e-2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class Wavy(DeformationStructure):
    """n = 1, A(z) = c exp(i k x) exp(-|z|^2 / 4): rapidly oscillating, far outside the contraction regime."""

    family = "wavy"

    def __init__(self, c=0.5, k=20.0):
        super().__init__(1)
        self.c, self.k = c, k

    def _profile(self, p):
        return self.c * np.exp(1j * self.k * p[..., 0]) * np.exp(-np.sum(p * p, -1) / 4)

    def deformation(self, points):
        p = self._check(points)
        A = np.zeros(p.shape[:-1] + (1, 1), complex)
        A[..., 0, 0] = self._profile(p)
        return A

    def deformation_derivative(self, points, direction):
        p = self._check(points)
        dA = np.zeros(p.shape[:-1] + (1, 1), complex)
        dA[..., 0, 0] = self._profile(p) * (1j * self.k * direction[..., 0] - 0.5 * np.sum(p * direction, -1))
        return dA


# acceptance summary: one line per criterion, printed whatever the capture mode
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
