"""
Exact Gaussian solution of harmonic quantum Brownian motion.

The oscillator (unit mass, frequency omega0, counter-term included so that
omega_R^2 = omega0^2 + gamma * cutoff) obeys a quantum Langevin equation
with memory kernel chi(t). Its response function g(t) has Laplace transform

    g^(s) = 1 / (s^2 + omega_R^2 - chi^(s)) = (s + cutoff) / D(s),
    D(s)  = (s^2 + omega_R^2)(s + cutoff) - gamma cutoff^2,

so g(t) = sum_j A_j exp(s_j t) over the three roots of the cubic D. The
propagator is G(t) = [[g', g], [g'', g']] and the covariance matrix evolves
as Sigma(t) = G Sigma_0 G^T + Sigma_noise(t).
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .quadrature import (DegenerateRootsWarning, QuadratureSpec, cubic_roots,
                         integrate_semi_infinite)
from .spectral import (BathSpec, counterterm_frequency_sq,
                       dissipation_kernel_laplace, noise_density)

__all__ = [
    "OscillatorSpec",
    "CovarianceMatrix",
    "GaussianState",
    "PropagatorKernel",
    "QbmTrajectory",
    "InvalidStateError",
    "HEISENBERG_TOL",
    "characteristic_roots",
    "propagator",
    "noise_covariance",
    "evolve_covariance",
    "evolve_trajectory",
    "steady_covariance",
    "wave_packet",
    "ground_state",
    "symplectic_eigenvalue",
    "gaussian_entropy",
    "gaussian_fidelity",
]

HEISENBERG_TOL = 1e-9

_DEFAULT_QUAD = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-15)


class InvalidStateError(ValueError):
    """Second moments violate positivity or the uncertainty relation."""


@dataclass(frozen=True)
class OscillatorSpec:
    omega0: float
    bath: BathSpec

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")

    @property
    def omega_r_sq(self) -> float:
        """Bare frequency squared plus the counter-term."""
        return self.omega0**2 + counterterm_frequency_sq(self.bath)


@dataclass(frozen=True)
class CovarianceMatrix:
    """
    Symmetrised second moments (sxx, sxp, spp) of one mode.

    Construction enforces sxx, spp > 0 and the uncertainty relation
    det >= 1/4 up to :data:`HEISENBERG_TOL`.
    """

    sxx: float
    sxp: float
    spp: float

    def __post_init__(self):
        if not (self.sxx > 0 and self.spp > 0):
            raise InvalidStateError(
                f"variances must be positive, got sxx={self.sxx}, "
                f"spp={self.spp}")
        if self.det < 0.25 - HEISENBERG_TOL:
            raise InvalidStateError(
                f"uncertainty relation violated: det = {self.det!r} < 1/4")

    @property
    def det(self) -> float:
        return self.sxx * self.spp - self.sxp**2

    def as_array(self) -> np.ndarray:
        return np.array([[self.sxx, self.sxp], [self.sxp, self.spp]])

    @classmethod
    def from_array(cls, m) -> "CovarianceMatrix":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])),
                   float(m[1, 1]))


@dataclass(frozen=True)
class GaussianState:
    cov: CovarianceMatrix
    mean: tuple = (0.0, 0.0)

    @property
    def purity(self) -> float:
        return 0.5 / np.sqrt(self.cov.det)


@dataclass(frozen=True, eq=False)
class PropagatorKernel:
    """
    Exponential-sum representation g(t) = sum_j residues[j] exp(roots[j] t).

    For gamma > 0 there are three roots of D(s); in the decoupled case
    the (s + cutoff) factor cancels and only +-i omega0 remain.
    """

    roots: np.ndarray
    residues: np.ndarray
    spec: OscillatorSpec = field(repr=False)

    def _sum(self, power, t):
        t = np.asarray(t, dtype=float)
        ex = np.exp(np.multiply.outer(t, self.roots))
        return (ex @ (self.residues * self.roots**power)).real

    def g(self, t):
        return self._sum(0, t)

    def dg(self, t):
        return self._sum(1, t)

    def ddg(self, t):
        return self._sum(2, t)

    def transform(self, s):
        """g^(s) evaluated from the partial-fraction form."""
        s = np.asarray(s, dtype=complex)
        return np.sum(self.residues / (s[..., None] - self.roots), axis=-1)

    @property
    def slowest_rate(self) -> float:
        return float(np.min(np.abs(self.roots.real)))


def characteristic_roots(spec: OscillatorSpec) -> PropagatorKernel:
    """Roots and partial-fraction residues of the response function."""
    g, lam = spec.bath.gamma, spec.bath.lambda_cutoff
    if g == 0:
        w = spec.omega0
        roots = np.array([-1j * w, 1j * w])
        return PropagatorKernel(roots, 1.0 / (2.0 * roots), spec)

    def solve(gamma):
        wr2 = spec.omega0**2 + gamma * lam
        coeffs = [1.0, lam, wr2, wr2 * lam - gamma * lam**2]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateRootsWarning)
            roots = cubic_roots(coeffs)
        degenerate = any(issubclass(w.category, DegenerateRootsWarning)
                         for w in caught)
        return roots, degenerate

    roots, degenerate = solve(g)
    if degenerate:
        warnings.warn(
            "repeated roots in the response denominator; perturbing gamma "
            "by 1e-12 relative", DegenerateRootsWarning, stacklevel=2)
        roots, _ = solve(g * (1 + 1e-12))
    # D'(s_j) as a product of root differences: identical for a monic cubic
    # and free of cancellation when two roots nearly coincide
    diff = roots[:, None] - roots[None, :]
    np.fill_diagonal(diff, 1.0)
    residues = (roots + lam) / diff.prod(axis=1)
    return PropagatorKernel(roots, residues, spec)


def propagator(kernel: PropagatorKernel, t):
    """G(t) = [[g', g], [g'', g']]; vectorised over ``t`` (shape (..., 2, 2))."""
    g, dg, ddg = kernel.g(t), kernel.dg(t), kernel.ddg(t)
    return np.stack([np.stack([dg, g], -1), np.stack([ddg, dg], -1)], -2)


# -- noise part ---------------------------------------------------------------

def _resonance_splits(kernel):
    pts = [kernel.spec.omega0, kernel.spec.bath.lambda_cutoff]
    for s in kernel.roots:
        w, a = abs(s.imag), abs(s.real)
        if w == 0:
            continue
        pts.append(w)
        for k in (1.0, 10.0, 100.0):
            for p in (w - k * a, w + k * a):
                if p > 0:
                    pts.append(p)
    return sorted(set(pts))


@functools.lru_cache(maxsize=64)
def _resonance_table(spec: OscillatorSpec, quad: QuadratureSpec):
    """
    kappa[j, l] = (1/pi) int_0^inf J coth / ((s_j + i w)(conj(s_l) - i w)) dw.

    These are the time-independent pieces of the noise integrals; the
    sharply peaked factors are handled once here on the real axis.
    """
    kernel = characteristic_roots(spec)
    s = kernel.roots
    n = len(s)

    def f(w):
        iw = 1j * w[:, None]
        d = 1.0 / (s[None, :] + iw)
        dbar = 1.0 / (np.conj(s)[None, :] - iw)
        prod = d[:, :, None] * dbar[:, None, :]
        return (noise_density(w, spec.bath)[:, None, None] / np.pi
                * prod).reshape(len(w), n * n)

    res = integrate_semi_infinite(f, quad.with_splits(*_resonance_splits(kernel)))
    return kernel, res.value.reshape(n, n)


def _ray_angle(pole_args):
    theta = np.pi / 4
    if any(abs(a - theta) < 0.1 for a in pole_args):
        grid = sorted([0.0, *pole_args, np.pi / 2])
        gaps = np.diff(grid)
        k = int(np.argmax(gaps))
        theta = 0.5 * (grid[k] + grid[k + 1])
    return theta


def _oscillatory_part(kernel, t, quad):
    """
    W[u, v](t) = (1/pi) int_0^inf J coth a_u(w) b_v(w) dw, with
    a_u = sum_j u_j exp((s_j + i w) t) / (s_j + i w),
    b_v = sum_l conj(v_l) / (conj(s_l) - i w),
    for u, v in {g, g'} weights. Rotated onto the ray w = r exp(i theta);
    the poles of b_v swept over are added back as residues.
    Returns a (2, 2) complex array indexed [u, v].
    """
    s = kernel.roots
    bath = kernel.spec.bath
    weights = np.stack([kernel.residues, kernel.residues * s])  # (2, n)
    poles = -1j * np.conj(s)
    in_quadrant = (poles.real > 0) & (poles.imag > 0)
    theta = _ray_angle([np.angle(p) for p in poles[in_quadrant]])
    direction = np.exp(1j * theta)
    est = np.exp(s * t)

    def a_of(w):
        iw = 1j * w[:, None]
        num = np.exp(iw * t) * est[None, :]
        return (num / (s[None, :] + iw)) @ weights.T            # (m, 2)

    def f(r):
        w = r * direction
        a = a_of(w)
        b = (1.0 / (np.conj(s)[None, :] - 1j * w[:, None])) @ np.conj(weights).T
        pref = noise_density(w, bath) / np.pi * direction
        return (pref[:, None, None] * a[:, :, None] * b[:, None, :]).reshape(
            len(r), 4)

    decay = 1.0 / (t * np.sin(theta))
    splits = [decay, 5 * decay, 30 * decay, kernel.spec.omega0,
              bath.lambda_cutoff] + [abs(p) for p in poles]
    res = integrate_semi_infinite(f, quad.with_splits(*splits))
    out = res.value.reshape(2, 2)

    swept = in_quadrant & (np.angle(poles) < theta)
    for l in np.flatnonzero(swept):
        wl = poles[l:l + 1]
        a = a_of(wl)
        jc = noise_density(wl, bath)[0]
        out += -2.0 * jc * a[0][:, None] * np.conj(weights[:, l])[None, :]
    return out


def noise_covariance(spec: OscillatorSpec, kernel: PropagatorKernel, t: float,
                     quad: QuadratureSpec | None = None,
                     method: str = "contour") -> np.ndarray:
    """
    Bath-driven part of the covariance matrix at time ``t``.

    Returns the 2x2 array with entries (1/pi) int J coth |I_g|^2,
    (1/pi) int J coth Re(I_g conj I_g'), (1/pi) int J coth |I_g'|^2, where
    I_f(w, t) = int_0^t f(tau) exp(i w tau) dtau is evaluated in closed form
    from the exponential sum.

    ``method="contour"`` splits the integrand into a smooth part (cached
    real-axis integrals) and a part oscillating as exp(+-i w t), which is
    integrated along a ray in the complex plane. ``method="direct"``
    integrates the oscillatory integrand on the real axis and is only
    practical for moderate ``t``.
    """
    quad = quad or _DEFAULT_QUAD
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0 or spec.bath.gamma == 0:
        return np.zeros((2, 2))
    if method == "direct":
        return _noise_direct(spec, kernel, t, quad)
    if method != "contour":
        raise ValueError(f"unknown method {method!r}")
    kernel, kappa = _resonance_table(spec, quad)
    s = kernel.roots
    weights = np.stack([kernel.residues, kernel.residues * s])
    growth = 1.0 + np.exp(np.add.outer(s, np.conj(s)) * t)
    smooth = np.einsum("uj,vl,jl,jl->uv", weights, np.conj(weights), kappa,
                       growth)
    osc = _oscillatory_part(kernel, t, quad)
    q = smooth - osc - np.conj(osc.T)
    return np.array([[q[0, 0].real, q[0, 1].real],
                     [q[0, 1].real, q[1, 1].real]])


def _noise_direct(spec, kernel, t, quad):
    s = kernel.roots
    weights = np.stack([kernel.residues, kernel.residues * s])

    def f(w):
        z = s[None, :] + 1j * w[:, None]
        ig = ((np.exp(z * t) - 1.0) / z) @ weights.T           # (m, 2)
        nd = noise_density(w, spec.bath) / np.pi
        return np.stack([nd * np.abs(ig[:, 0])**2,
                         nd * (ig[:, 0] * np.conj(ig[:, 1])).real,
                         nd * np.abs(ig[:, 1])**2], axis=-1)

    quad = QuadratureSpec(max(quad.rel_tol, 1e-10), max(quad.abs_tol, 1e-14),
                          tuple(_resonance_splits(kernel)),
                          max_intervals=max(quad.max_intervals, 200000))
    v = integrate_semi_infinite(f, quad).value
    return np.array([[v[0], v[1]], [v[1], v[2]]])


def evolve_covariance(spec: OscillatorSpec, state0: GaussianState, t: float,
                      kernel: PropagatorKernel | None = None,
                      quad: QuadratureSpec | None = None) -> GaussianState:
    """Gaussian state at time ``t`` for an initially uncorrelated bath."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return state0
    kernel = kernel or characteristic_roots(spec)
    G = propagator(kernel, t)
    sigma = G @ state0.cov.as_array() @ G.T
    sigma = sigma + noise_covariance(spec, kernel, t, quad)
    mean = G @ np.asarray(state0.mean, dtype=float)
    return GaussianState(CovarianceMatrix.from_array(sigma),
                         (float(mean[0]), float(mean[1])))


@dataclass
class QbmTrajectory:
    times: np.ndarray
    states: list
    entropy: np.ndarray
    fidelity_ground: np.ndarray
    base: float = np.e

    @property
    def sxx(self):
        return np.array([s.cov.sxx for s in self.states])

    @property
    def sxp(self):
        return np.array([s.cov.sxp for s in self.states])

    @property
    def spp(self):
        return np.array([s.cov.spp for s in self.states])

    @property
    def det(self):
        return np.array([s.cov.det for s in self.states])


def evolve_trajectory(spec: OscillatorSpec, state0: GaussianState, times,
                      base: float = np.e,
                      quad: QuadratureSpec | None = None) -> QbmTrajectory:
    """Evaluate the exact solution independently at every grid time."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    kernel = characteristic_roots(spec)
    vacuum = ground_state(spec.omega0)
    states = [evolve_covariance(spec, state0, t, kernel, quad) for t in times]
    entropy = np.array([gaussian_entropy(s.cov, base) for s in states])
    fid = np.array([gaussian_fidelity(s, vacuum) for s in states])
    return QbmTrajectory(times, states, entropy, fid, base)


def steady_covariance(spec: OscillatorSpec,
                      quad: QuadratureSpec | None = None) -> CovarianceMatrix:
    """
    Long-time covariances from the frequency-domain response.

    Uses g^(i w) = 1 / (omega_R^2 - w^2 - chi^(i w)) directly (not the cubic
    roots), so it is an independent route to the t -> infinity limit.
    """
    bath = spec.bath
    if bath.gamma == 0:
        raise ValueError("no unique steady state without coupling")
    quad = quad or _DEFAULT_QUAD
    w0, lam = spec.omega0, bath.lambda_cutoff
    width = bath.gamma * lam**2 / (2 * (lam**2 + w0**2))
    peak = np.sqrt(w0**2 + bath.gamma * lam * w0**2 / (lam**2 + w0**2))
    splits = [w0, lam, peak]
    for k in (1.0, 10.0, 100.0):
        splits += [p for p in (peak - k * width, peak + k * width) if p > 0]

    def f(w):
        ghat = 1.0 / (spec.omega_r_sq - w**2
                      - dissipation_kernel_laplace(1j * w, bath))
        weight = noise_density(w, bath) * np.abs(ghat)**2 / np.pi
        return np.stack([weight, w**2 * weight], axis=-1)

    v = integrate_semi_infinite(f, quad.with_splits(*splits)).value
    return CovarianceMatrix(float(v[0]), 0.0, float(v[1]))


# -- states and information measures -----------------------------------------

def wave_packet(delta: float) -> GaussianState:
    """Minimum-uncertainty packet with position variance ``delta``."""
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    return GaussianState(CovarianceMatrix(delta, 0.0, 0.25 / delta))


def ground_state(omega0: float) -> GaussianState:
    return wave_packet(0.5 / omega0)


def symplectic_eigenvalue(cov: CovarianceMatrix) -> float:
    det = cov.det
    if det < 0.25 - HEISENBERG_TOL:
        raise InvalidStateError(f"det = {det!r} below 1/4")
    return float(np.sqrt(max(det, 0.25)))


def gaussian_entropy(cov: CovarianceMatrix, base: float = np.e) -> float:
    """
    von Neumann entropy of a single-mode Gaussian state,
    (nu + 1/2) log(nu + 1/2) - (nu - 1/2) log(nu - 1/2), in units of
    log(base).
    """
    nu = symplectic_eigenvalue(cov)
    hi, lo = nu + 0.5, max(nu - 0.5, 0.0)
    s = xlogy(hi, hi) - xlogy(lo, lo)
    return float(max(s, 0.0) / np.log(base)) + 0.0


def gaussian_fidelity(a: GaussianState, b: GaussianState) -> float:
    """
    Uhlmann fidelity F = (tr sqrt(sqrt(rho_a) rho_b sqrt(rho_a)))^2 of two
    single-mode Gaussian states (vacuum covariance I/2).
    """
    sa, sb = a.cov.as_array(), b.cov.as_array()
    total = sa + sb
    big_delta = np.linalg.det(total)
    small_delta = 4.0 * (a.cov.det - 0.25) * (b.cov.det - 0.25)
    small_delta = max(small_delta, 0.0)
    d = np.asarray(a.mean, dtype=float) - np.asarray(b.mean, dtype=float)
    expo = np.exp(-0.5 * d @ np.linalg.solve(total, d))
    f = expo / (np.sqrt(big_delta + small_delta) - np.sqrt(small_delta))
    return float(min(f, 1.0))
