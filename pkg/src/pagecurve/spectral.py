"""
Ohmic bath with Lorentz-Drude cutoff.

Conventions (hbar = k_B = 1):

    J(w)    = gamma * w / (1 + (w / cutoff)^2)
    chi(t)  = (2/pi) int_0^inf J(w) sin(w t) dw         = gamma cutoff^2 exp(-cutoff t)
    C(t)    = (1/pi) int_0^inf J(w) [coth(w / 2T) cos(w t) - i sin(w t)] dw

so that ``Im C(t) = -chi(t) / 2``. The exponential decomposition of C(t)
used by the hierarchy solver is

    C(t) = sum_k c_k exp(-nu_k t),

with one Drude pole term (rate = cutoff) and Matsubara terms at
nu_k = 2 pi k T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .quadrature import QuadratureError

__all__ = [
    "BathSpec",
    "ExponentialTerm",
    "spectral_density",
    "noise_density",
    "counterterm_frequency_sq",
    "dissipation_kernel",
    "dissipation_kernel_laplace",
    "bath_correlation",
    "matsubara_expansion",
    "terminator_strength",
    "correlation_from_terms",
]


@dataclass(frozen=True)
class BathSpec:
    """Ohmic Lorentz-Drude bath at temperature ``temperature``."""

    gamma: float
    lambda_cutoff: float
    temperature: float = 0.0

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.lambda_cutoff > 0:
            raise ValueError(
                f"lambda_cutoff must be > 0, got {self.lambda_cutoff}")
        if not self.temperature >= 0:
            raise ValueError(
                f"temperature must be >= 0, got {self.temperature}")

    @property
    def beta(self) -> float:
        return np.inf if self.temperature == 0 else 1.0 / self.temperature


@dataclass(frozen=True)
class ExponentialTerm:
    """One term ``coefficient * exp(-rate * t)`` of the correlation function."""

    coefficient: complex
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"exponential rate must be > 0, got {self.rate}")


def _check_frequency(omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    return omega


def spectral_density(omega, bath: BathSpec):
    """J(omega) for omega >= 0; accepts scalars or arrays."""
    omega = _check_frequency(omega)
    lam = bath.lambda_cutoff
    out = bath.gamma * omega / (1.0 + (omega / lam) ** 2)
    return out if out.ndim else float(out)


def omega_coth(omega, temperature: float):
    """
    ``omega * coth(omega / 2T)``, finite at omega = 0 (limit 2T).

    Works for complex ``omega`` (analytic continuation); at T = 0 it is
    ``omega`` exactly.
    """
    omega = np.asarray(omega)
    if temperature == 0:
        return omega.astype(complex) if omega.dtype.kind == "c" else omega
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        x = omega / (2.0 * temperature)
        small = np.abs(x) < 1e-4
        big = x.real > 20.0
        safe = np.where(small | big, 1.0, x)
        # x coth x = 1 + x^2/3 - x^4/45 + ...
        xs = np.where(small, x, 0.0)
        series = 2.0 * temperature * (1.0 + xs**2 / 3.0 - xs**4 / 45.0)
        val = np.where(small, series,
                       np.where(big, omega, omega / np.tanh(safe)))
    return val[()] if np.ndim(val) == 0 else val


def noise_density(omega, bath: BathSpec):
    """
    Symmetrised noise weight J(omega) coth(omega / 2T).

    ``omega`` may be complex, in which case the analytic continuation of the
    Lorentz-Drude form is returned (used for contour-deformed integrals).
    """
    omega = np.asarray(omega)
    lam = bath.lambda_cutoff
    out = (bath.gamma * lam**2 / (lam**2 + omega**2)
           * omega_coth(omega, bath.temperature))
    return out if out.ndim else out[()]


def counterterm_frequency_sq(bath: BathSpec) -> float:
    """Counter-term shift (2/pi) int J(w)/w dw, equal to gamma * cutoff."""
    return bath.gamma * bath.lambda_cutoff


def dissipation_kernel(t, bath: BathSpec):
    """Memory kernel chi(t) = gamma cutoff^2 exp(-cutoff t) for t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("dissipation kernel is defined for t >= 0")
    lam = bath.lambda_cutoff
    out = bath.gamma * lam**2 * np.exp(-lam * t)
    return out if out.ndim else float(out)


def dissipation_kernel_laplace(s, bath: BathSpec):
    """Laplace transform of the memory kernel, gamma cutoff^2 / (s + cutoff)."""
    s = np.asarray(s, dtype=complex)
    lam = bath.lambda_cutoff
    if np.any(s == -lam):
        raise ZeroDivisionError(
            f"dissipation kernel transform has a pole at s = -{lam}")
    out = bath.gamma * lam**2 / (s + lam)
    return out if out.ndim else complex(out)


def bath_correlation(t: float, bath: BathSpec, epsabs: float = 1e-14,
                     epsrel: float = 1e-12) -> complex:
    """
    C(t) by direct Fourier quadrature of its defining integral.

    Uses QUADPACK's semi-infinite Fourier rule (QAWF), which is unrelated to
    the pole expansion in :func:`matsubara_expansion` and therefore serves
    as its oracle. The real part diverges logarithmically as t -> 0 for this
    spectral density; ``t = 0`` returns ``inf`` for the real part.
    """
    if t < 0:
        raise ValueError("bath correlation is evaluated for t >= 0")
    if bath.gamma == 0:
        return 0j
    if t == 0:
        return complex(np.inf, 0.0)

    def weight(w):
        return float(noise_density(w, bath)) / np.pi

    def spectral(w):
        return spectral_density(w, bath) / np.pi

    re = _fourier_quad(weight, "cos", t, epsabs, epsrel)
    im = _fourier_quad(spectral, "sin", t, epsabs, epsrel)
    return complex(re, -im)


def _fourier_quad(f, kind, t, epsabs, epsrel):
    # QAWF flags individual difficult cycles even when the extrapolated total
    # is accurate, so success is judged on the returned global error bound.
    out = integrate.quad(f, 0, np.inf, weight=kind, wvar=t, epsabs=epsabs,
                         epsrel=epsrel, limlst=200, full_output=1)
    value, err = out[0], out[1]
    if len(out) > 3 and err > 100 * max(epsabs, epsrel * abs(value)):
        raise QuadratureError(
            f"Fourier quadrature ({kind}) failed at t={t}: {out[3]}",
            value=value, error=err)
    return value


def matsubara_expansion(bath: BathSpec, n_terms: int) -> list[ExponentialTerm]:
    """
    Drude pole term plus ``n_terms`` Matsubara terms of C(t).

    Term 0 has rate ``cutoff`` and coefficient
    ``(gamma cutoff^2 / 2) (cot(cutoff / 2T) - i)``; term k >= 1 has rate
    ``nu_k = 2 pi k T`` and real coefficient
    ``2 gamma cutoff^2 T nu_k / (nu_k^2 - cutoff^2)``.
    """
    if bath.temperature <= 0:
        raise NotImplementedError(
            "the Matsubara expansion diverges at T = 0; use a small "
            "positive temperature")
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    g, lam, T = bath.gamma, bath.lambda_cutoff, bath.temperature
    nu = 2 * np.pi * T * np.arange(1, n_terms + 1)
    ratio = lam / (2 * np.pi * T)
    if abs(ratio - round(ratio)) < 1e-12 and round(ratio) >= 1:
        raise ValueError(
            "cutoff coincides with a Matsubara frequency; the two-pole "
            "decomposition is singular there")
    c0 = 0.5 * g * lam**2 * (1.0 / np.tan(lam / (2 * T)) - 1j)
    ck = 2 * g * lam**2 * T * nu / (nu**2 - lam**2)
    terms = [ExponentialTerm(complex(c0), lam)]
    terms += [ExponentialTerm(complex(c), float(v)) for c, v in zip(ck, nu)]
    return terms


def correlation_from_terms(t, terms) -> np.ndarray:
    """Evaluate sum_k c_k exp(-nu_k t) on an array of times."""
    t = np.asarray(t, dtype=float)
    c = np.array([term.coefficient for term in terms])
    nu = np.array([term.rate for term in terms])
    out = np.exp(-np.multiply.outer(t, nu)) @ c
    return out


def terminator_strength(bath: BathSpec, n_terms: int) -> float:
    """
    Markovian weight of the Matsubara terms beyond ``n_terms``.

    Delta = sum_{k > n_terms} c_k / nu_k, obtained as the closed-form total
    sum_k Re(c_k)/nu_k = gamma T (the zero-frequency integral of Re C) minus
    the retained terms.
    """
    terms = matsubara_expansion(bath, n_terms)
    retained = sum(term.coefficient.real / term.rate for term in terms)
    return bath.gamma * bath.temperature - retained
