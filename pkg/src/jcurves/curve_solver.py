"""J-holomorphic lines and discs through the Cauchy-Green fixed point.

A map zeta -> z(zeta) is J-holomorphic (dz o J_st = J o dz) iff

    z_zetabar + A(z) conj(z_zeta) = 0,

with A the deformation matrix of (J + J_st)^{-1}(J - J_st).  Writing
mu(z) = -A(z), lines solve z = L^v + T(mu(z) conj(z_zeta)) with
L^v(zeta) = zeta v, and Phi_J(z) = z - T(mu(z) conj(z_zeta)).
"""

import logging
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .acs import decay_report, deformation_real
from .cauchy_green import cauchy_green, holder_norms, transform_at, weighted_c0_norm
from .coords import antilinear_from_real, to_complex, to_real
from .grid import NormParams, PlaneGrid, node_grid, wirtinger
from .structures import StructureTooFar

log = logging.getLogger(__name__)


class ContractionFailure(RuntimeError):
    """Successive fixed-point steps stopped shrinking."""

    def __init__(self, message, iterations):
        super().__init__(message)
        self.iterations = iterations


class OutOfRegion(ValueError):
    pass


class InsufficientCenters(ValueError):
    pass


@dataclass
class SolverSettings:
    max_iter: int = 60
    tol_fixed_point: float = 1e-12
    tol_residual: float = 1e-4
    admissibility_lambda: float = 0.05
    quadrature: str = "fft"
    strict_norm: bool = False
    seed: int = 0


@dataclass
class LineProblem:
    J: object
    v: np.ndarray
    R: float = 8.0
    N: int = 129
    norms: NormParams = field(default_factory=NormParams)
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=complex)
        if self.v.shape != (self.J.n,):
            raise ValueError(f"v must have {self.J.n} complex entries")
        if abs(np.linalg.norm(self.v) - 1.0) > 1e-12:
            raise ValueError("v must be a unit vector")


@dataclass
class CurveSolution:
    kind: str
    anchor: list
    samples: PlaneGrid
    iterations: list
    residual_CR: float
    growth_sup: float
    converged: bool
    forcing: PlaneGrid = None
    reference: PlaneGrid = None
    mask: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "kind": self.kind,
            "anchor": self.anchor,
            "R": self.samples.R,
            "N": self.samples.N,
            "n": self.samples.n,
            "iterations": [list(map(float, it)) for it in self.iterations],
            "residual_CR": self.residual_CR,
            "growth_sup": self.growth_sup,
            "converged": self.converged,
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# building blocks


def _matvec(M, x):
    return np.einsum("...ij,...j->...i", M, x)


def deformation_field(J, z):
    """A(z(zeta)) on a grid, shape (N, N, n, n); failures report the node."""
    pts = to_real(z.values)
    try:
        return antilinear_from_real(deformation_real(J, pts))
    except StructureTooFar as exc:
        raise StructureTooFar(f"{exc} (grid node search over {z.N}x{z.N})") from None


def beltrami_forcing(J, z):
    """mu(z) conj(z_zeta) = -A(z) conj(z_zeta) on the grid."""
    dz, _ = wirtinger(z.values, z.h)
    return z.like(-_matvec(deformation_field(J, z), np.conj(dz)))


def residual_CR(J, z, mask=None, width=2):
    """max over interior nodes of |z_zetabar + A(z) conj(z_zeta)|."""
    dz, dzb = wirtinger(z.values, z.h)
    A = deformation_field(J, z)
    res = np.linalg.norm(dzb + _matvec(A, np.conj(dz)), axis=-1)
    m = z.interior(width)
    if mask is not None:
        m = m & mask
    return float(res[m].max())


def phi(J, z, method="fft"):
    """Phi_J(z) = z - T(mu(z) conj(z_zeta))."""
    return z.like(z.values - cauchy_green(beltrami_forcing(J, z), method).values)


def line_reference(R, N, v):
    return PlaneGrid(R, N, node_grid(R, N)[..., None] * np.asarray(v, dtype=complex))


def _q_map(J, z, v, method):
    """Q(z) = T(mu(z) conj(z_zeta)) + L^v, returning (Q(z), forcing)."""
    G = beltrami_forcing(J, z)
    Tg = cauchy_green(G, method)
    return Tg.values + z.nodes[..., None] * v, G


def contraction_estimate(J, z1, z2, method="fft"):
    """|Q(z1) - Q(z2)|_w / |z1 - z2|_w; L^v cancels, so no direction is needed."""
    den = weighted_c0_norm(z1.like(z1.values - z2.values))
    if den == 0.0:
        raise ValueError("degenerate pair: z1 == z2")
    T1 = cauchy_green(beltrami_forcing(J, z1), method).values
    T2 = cauchy_green(beltrami_forcing(J, z2), method).values
    return weighted_c0_norm(z1.like(T1 - T2)) / den


def frechet_derivative(J, z, zdot, method="fft"):
    """D Phi_J(z)[zdot] = zdot - T(mu(z) conj(zdot_zeta)) - T(Dmu[zdot] conj(z_zeta)).

    Dmu = -B with B(zdot) = P^{-1} DJ(zdot) - P^{-1} DJ(zdot) P^{-1} (J - J_st),
    P = J + J_st, the derivative of the deformation along zdot.
    """
    if not z.same_grid(zdot) or z.n != zdot.n:
        raise ValueError("z and zdot must share a grid")
    pts = to_real(z.values)
    Jz = J.evaluate(pts)
    P = Jz + J.J_st
    DJ = J.derivative(pts, to_real(zdot.values))
    PinvDJ = np.linalg.solve(P, DJ)
    Breal = PinvDJ - PinvDJ @ np.linalg.solve(P, Jz - J.J_st)
    B = antilinear_from_real(Breal)
    A = antilinear_from_real(np.linalg.solve(P, Jz - J.J_st))
    dz, _ = wirtinger(z.values, z.h)
    dzd, _ = wirtinger(zdot.values, zdot.h)
    forcing = -_matvec(A, np.conj(dzd)) - _matvec(B, np.conj(dz))
    return zdot.like(zdot.values - cauchy_green(zdot.like(forcing), method).values)


# ---------------------------------------------------------------------------
# admissibility


def structure_lambda(J, theta=2.0):
    """Cached decay amplitude used for the admissibility precheck."""
    key = ("lambda", float(theta))
    if key not in J._cache:
        J._cache[key] = decay_report(J, theta=theta, K=2, radii=(0.0, 0.5, 1.0, 2.0, 4.0), directions=32).lam
    return J._cache[key]


def _precheck(J, norms, settings):
    lam = structure_lambda(J, norms.theta)
    if lam > settings.admissibility_lambda:
        warnings.warn(
            f"decay amplitude {lam:.3g} exceeds admissibility threshold {settings.admissibility_lambda}; attempting anyway",
            RuntimeWarning,
            stacklevel=3,
        )
    return lam


# ---------------------------------------------------------------------------
# Picard iteration


def _picard(J, reference, settings, mask=None, pin_center=False):
    """Iterate z <- reference + T(mu(z) conj(z_zeta)) [- value at 0]."""
    z = reference.like(reference.values.copy())
    R, N = reference.R, reference.N
    center = (N // 2, N // 2)
    iterations = []
    prev = None
    converged = False
    G = reference.like(np.zeros_like(reference.values))
    for _ in range(settings.max_iter):
        G = beltrami_forcing(J, z)
        Tg = cauchy_green(G, settings.quadrature, mask=mask).values
        if pin_center:
            Tg = Tg - Tg[center]
        znew = reference.values + Tg
        step = weighted_c0_norm(reference.like(znew - z.values))
        ratio = step / prev if prev else 0.0
        iterations.append((step, ratio))
        z = reference.like(znew)
        if step <= settings.tol_fixed_point:
            converged = True
            break
        if prev is not None and ratio >= 1.0 and step > 1e3 * settings.tol_fixed_point:
            raise ContractionFailure(
                f"contraction ratio {ratio:.3g} >= 1 at iteration {len(iterations)}", iterations
            )
        prev = step
    # forcing consistent with the returned iterate
    G_final = G
    return z, G_final, iterations, converged


def _finish(J, kind, anchor, z, G, reference, iterations, converged, settings, norms, mask=None, width=2):
    res = residual_CR(J, z, mask=mask, width=width)
    dev = np.linalg.norm(z.values - reference.values, axis=-1)
    growth = float(dev[mask].max() if mask is not None else dev.max())
    diag = {"fixed_point_steps": len(iterations)}
    ok = converged and res <= settings.tol_residual
    if settings.strict_norm:
        hn = holder_norms(z.like(z.values - reference.values), norms, seed=settings.seed)
        diag["distance_to_reference_C1gamma_w"] = hn.combined
        diag["within_epsilon0"] = bool(hn.combined <= norms.epsilon0)
    return CurveSolution(
        kind=kind,
        anchor=anchor,
        samples=z,
        iterations=iterations,
        residual_CR=res,
        growth_sup=growth,
        converged=bool(ok),
        forcing=G,
        reference=reference,
        mask=mask,
        diagnostics=diag,
    )


def solve_line(problem):
    """J-complex line through direction v: Picard iteration started at L^v."""
    J, v, s = problem.J, problem.v, problem.settings
    lam = _precheck(J, problem.norms, s)
    reference = line_reference(problem.R, problem.N, v)
    z, G, iterations, converged = _picard(J, reference, s)
    sol = _finish(J, "line", to_real(v).tolist(), z, G, reference, iterations, converged, s, problem.norms)
    sol.diagnostics["structure_lambda"] = lam
    sol.diagnostics["truncation_bound_factor"] = lam * problem.R ** (1.0 - problem.norms.theta)
    if not sol.converged:
        log.warning("line solve did not converge: %d iterations, residual %.3g", len(iterations), sol.residual_CR)
    return sol


def disc_mask(R, N, radius):
    return np.abs(node_grid(R, N)) <= radius + 1e-12


def solve_disc(J, a, N=129, radius=2.0, norms=None, settings=None):
    """Disc N^a_J with N^a_J(0) = (a, 0), close to N^a(zeta) = (a, 0) + zeta (0, ..., 0, 1)."""
    norms = norms or NormParams()
    settings = settings or SolverSettings()
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    if a.shape != (J.n - 1,):
        raise ValueError(f"center must have {J.n - 1} complex entries")
    if np.linalg.norm(a) > 1.0 + 1e-12:
        raise ValueError("|a| <= 1 required")
    if N % 2 == 0:
        raise ValueError("N must be odd so that zeta = 0 is a node")
    lam = _precheck(J, norms, settings)
    Z = node_grid(radius, N)
    ref = np.zeros((N, N, J.n), dtype=complex)
    ref[..., :-1] = a
    ref[..., -1] = Z
    reference = PlaneGrid(radius, N, ref)
    mask = disc_mask(radius, N, radius)
    z, G, iterations, converged = _picard(J, reference, settings, mask=mask, pin_center=True)
    h = reference.h
    inner = np.abs(Z) <= radius - 3 * h
    sol = _finish(J, "disc", to_real(a).tolist(), z, G, reference, iterations, converged, settings, norms, mask=inner)
    dev = np.linalg.norm(z.values - reference.values, axis=-1)
    sol.growth_sup = float(dev[mask].max())
    sol.mask = mask
    sol.diagnostics["structure_lambda"] = lam
    sol.diagnostics["center_error"] = float(np.linalg.norm(z.values[N // 2, N // 2] - ref[N // 2, N // 2]))
    return sol


# ---------------------------------------------------------------------------
# evaluation map and covering


class LineAtlas:
    """Line solutions cached per direction, with off-grid evaluation.

    The cache is a single-writer-per-key map: concurrent readers share
    finished entries, a lock serializes insertion.
    """

    def __init__(self, J, R=20.0, N=129, norms=None, settings=None):
        self.J = J
        self.R = float(R)
        self.N = int(N)
        self.norms = norms or NormParams()
        self.settings = settings or SolverSettings()
        self._lines = {}
        self._lock = threading.Lock()
        self.solves = 0

    def line(self, v):
        v = np.asarray(v, dtype=complex)
        key = to_real(v).tobytes()
        sol = self._lines.get(key)
        if sol is None:
            sol = solve_line(LineProblem(self.J, v, self.R, self.N, self.norms, self.settings))
            with self._lock:
                sol = self._lines.setdefault(key, sol)
                self.solves += 1
        return sol

    def point(self, v, zeta):
        """L_J^v(zeta) for complex zeta, using the panel transform off-grid."""
        v = np.asarray(v, dtype=complex)
        sol = self.line(v)
        zeta = complex(zeta)
        return zeta * v + transform_at(sol.forcing, [zeta])[0]

    def evaluate(self, t, v):
        if t < 0:
            raise ValueError("t must be nonnegative")
        return self.point(v, t)

    def cover_point(self, p, tol=1e-4, max_steps=20, fd_step=1e-6):
        """Find (v, zeta) with L_J^v(zeta) = p by Gauss-Newton on S^{2n-1} x C.

        Steps start as chord steps with the Jacobian of zeta v (exact for
        J_st, O(lambda) off otherwise); if the error stops shrinking by half
        per step a finite-difference Jacobian is built.  The parametrization
        is redundant along v -> e^{i phi} v, so each step takes the
        least-squares solution that moves v the least, then v is
        renormalized.
        """
        p = np.asarray(p, dtype=complex)
        radius = float(np.linalg.norm(p))
        if radius <= 1.0:
            raise OutOfRegion(f"|p| = {radius:.6g} <= 1: only C^n minus the unit ball is covered")
        v = p / radius
        zeta = complex(radius)
        history = []
        exact = False
        for step in range(max_steps + 1):
            achieved = self.point(v, zeta)
            r = to_real(achieved - p)
            err = float(np.linalg.norm(r))
            history.append(err)
            if err <= tol:
                return CoverResult(to_real(v).tolist(), [zeta.real, zeta.imag], to_real(achieved).tolist(), err, True, step + 1, history)
            if step == max_steps:
                break
            vr = to_real(v)
            basis = _tangent_basis(vr)
            if not exact and len(history) > 1 and history[-1] > 0.5 * history[-2]:
                exact = True
            if exact:
                jac = self._jacobian(v, zeta, basis, achieved, fd_step)
            else:
                jac = _standard_jacobian(v, zeta, basis)
            delta = _least_v_step(jac, -r, basis.shape[1])
            vr = vr + basis @ delta[:-2]
            vr = vr / np.linalg.norm(vr)
            v = to_complex(vr)
            zeta = zeta + complex(delta[-2], delta[-1])
        return CoverResult(to_real(v).tolist(), [zeta.real, zeta.imag], to_real(achieved).tolist(), err, False, max_steps + 1, history)

    def _jacobian(self, v, zeta, basis, base, h):
        cols = []
        vr = to_real(v)
        for i in range(basis.shape[1]):
            w = vr + h * basis[:, i]
            w = to_complex(w / np.linalg.norm(w))
            cols.append(to_real(self.point(w, zeta) - base) / h)
        for dz in (h, 1j * h):
            cols.append(to_real(self.point(v, zeta + dz) - base) / h)
        return np.stack(cols, axis=1)


def _standard_jacobian(v, zeta, basis):
    """Jacobian of (v, zeta) -> zeta v in the tangent basis and (Re zeta, Im zeta)."""
    cols = [to_real(zeta * to_complex(basis[:, i])) for i in range(basis.shape[1])]
    cols += [to_real(v), to_real(1j * v)]
    return np.stack(cols, axis=1)


@dataclass
class CoverResult:
    v: list
    zeta: list
    achieved: list
    error: float
    converged: bool
    steps: int
    history: list

    def to_dict(self):
        return dict(self.__dict__)


def _tangent_basis(vr):
    """Orthonormal basis of the tangent space of the unit sphere at vr."""
    q, _ = np.linalg.qr(np.column_stack([vr, np.eye(vr.size)]))
    return q[:, 1 : vr.size]


def _least_v_step(jac, rhs, nv):
    """Solution of jac x = rhs (least squares) minimizing the v-part of x."""
    x0, *_ = np.linalg.lstsq(jac, rhs, rcond=None)
    _, s, vt = np.linalg.svd(jac)
    if jac.shape[1] <= len(s) or s[-1] == 0:
        return x0
    null = vt[-1]
    pv = null[:nv]
    denom = pv @ pv
    if denom == 0:
        return x0
    t = -(x0[:nv] @ pv) / denom
    return x0 + t * null


def evaluate(J, t, v, atlas=None, **kw):
    """ev_J(t, v) = L_J^v(t)."""
    atlas = atlas or LineAtlas(J, **kw)
    return atlas.evaluate(t, v)


def cover_point(J, p, atlas=None, tol=1e-4, **kw):
    atlas = atlas or LineAtlas(J, **kw)
    return atlas.cover_point(p, tol=tol)


# ---------------------------------------------------------------------------
# foliation


@dataclass
class FoliationReport:
    min_ratio: float
    worst_pair: list
    centers: int
    certified: bool
    max_deviation: float
    all_converged: bool

    def to_dict(self):
        return dict(self.__dict__)


def center_lattice(size=5, spacing=0.3):
    k = np.arange(size) - (size - 1) / 2
    return [complex(x * spacing, y * spacing) for x in k for y in k]


def foliation_check(J, centers, N=65, radius=2.0, zeta_samples=None, norms=None, settings=None, workers=1):
    """Minimal |N^a_J(zeta) - N^b_J(zeta)| / |a - b| over pairs of centers and zeta samples.

    Centers vary in the first coordinate of C^{n-1}; remaining entries are 0.
    Disc solves are independent and run on up to ``workers`` threads; the
    reduction over pairs runs in a fixed order.
    """
    centers = [complex(c) for c in centers]
    if len(set(centers)) < 2:
        raise InsufficientCenters("insufficient centers: need at least two distinct centers")
    if J.n < 2:
        raise ValueError("discs through centers in C^{n-1} need n >= 2")

    def one(c):
        a = np.zeros(J.n - 1, dtype=complex)
        a[0] = c
        try:
            return solve_disc(J, a, N=N, radius=radius, norms=norms, settings=settings)
        except Exception as exc:
            raise RuntimeError(f"disc solve failed at center {c}: {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            discs = list(pool.map(one, centers))
    else:
        discs = [one(c) for c in centers]
    mask = discs[0].mask
    if zeta_samples is None:
        sel = mask
    else:
        sel = np.zeros_like(mask)
        Z = node_grid(radius, N)
        for zs in zeta_samples:
            sel[np.unravel_index(np.argmin(np.abs(Z - zs)), Z.shape)] = True
        sel &= mask
    images = np.stack([d.samples.values[sel] for d in discs])
    best, worst = np.inf, None
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            dist = np.linalg.norm(images[i] - images[j], axis=-1).min()
            ratio = dist / abs(centers[i] - centers[j])
            if ratio < best:
                best, worst = ratio, [[centers[i].real, centers[i].imag], [centers[j].real, centers[j].imag]]
    return FoliationReport(
        min_ratio=float(best),
        worst_pair=worst,
        centers=len(centers),
        certified=bool(best >= 0.5),
        max_deviation=float(max(d.growth_sup for d in discs)),
        all_converged=all(d.converged for d in discs),
    )
