"""Entropies, populations and Page-time extraction for both solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .gaussian_qbm import (OscillatorSpec, gaussian_entropy,
                           steady_covariance)
from .heom import QubitSpec

__all__ = [
    "InvalidStateError",
    "EntropyCurve",
    "PageTimeReport",
    "von_neumann_entropy",
    "binary_entropy",
    "excited_population",
    "page_time",
    "population_crossing",
    "gibbs_state",
    "mean_force_entropy_qbm",
]

STATE_TOL = 1e-8


class InvalidStateError(ValueError):
    pass


def _check_density_matrix(rho, tol=STATE_TOL):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"expected a square matrix, got {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise InvalidStateError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise InvalidStateError(f"trace {np.trace(rho).real!r} != 1")
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if ev[0] < -tol:
        raise InvalidStateError(f"negative eigenvalue {ev[0]!r}")
    return rho, ev


def von_neumann_entropy(rho, base: float = np.e) -> float:
    """-tr(rho log rho), with eigenvalues clipped to [0, 1] and 0 log 0 = 0."""
    _, ev = _check_density_matrix(rho)
    p = np.clip(ev, 0.0, 1.0)
    return float(max(-np.sum(xlogy(p, p)), 0.0) / np.log(base)) + 0.0


def binary_entropy(p, base: float = np.e):
    """Entropy of the distribution (p, 1 - p); vectorised."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    out = -(xlogy(p, p) + xlogy(1 - p, 1 - p)) / np.log(base)
    return np.maximum(out, 0.0) + 0.0


def excited_population(rho) -> float:
    """<1|rho|1> in the (|1>, |0>) ordering."""
    rho, _ = _check_density_matrix(rho)
    return float(np.clip(rho[0, 0].real, 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class EntropyCurve:
    times: np.ndarray
    values: np.ndarray
    base: float = np.e
    two_level: bool = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.shape != v.shape or t.ndim != 1 or t.size == 0:
            raise ValueError("times and values must be equal-length 1-D arrays")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(v < 0):
            raise InvalidStateError("entropy must be non-negative")
        if self.two_level and np.any(v > np.log(2) / np.log(self.base) + 1e-9):
            raise InvalidStateError("qubit entropy exceeds log 2")


@dataclass(frozen=True)
class PageTimeReport:
    t_page: float
    s_max: float
    grid_index: int
    resolved: bool
    crossing_time: float | None = None


def population_crossing(times, populations, level: float = 0.5):
    """First time the population falls through ``level`` (linear
    interpolation), or None."""
    t = np.asarray(times, dtype=float)
    p = np.asarray(populations, dtype=float) - level
    idx = np.flatnonzero((p[:-1] > 0) & (p[1:] <= 0))
    if idx.size == 0:
        return None
    i = idx[0]
    return float(t[i] + (t[i + 1] - t[i]) * p[i] / (p[i] - p[i + 1]))


def page_time(curve: EntropyCurve, populations=None) -> PageTimeReport:
    """
    Locate the entropy maximum.

    The grid maximum is refined with the vertex of the parabola through the
    three bracketing samples (clamped to that bracket). A maximum on the
    first or last grid point is returned unrefined with ``resolved=False``.
    If excited-state ``populations`` are given, the time at which they cross
    1/2 is reported as well.
    """
    t, s = curve.times, curve.values
    i = int(np.argmax(s))
    crossing = (population_crossing(t, populations)
                if populations is not None else None)
    if i == 0 or i == len(s) - 1:
        return PageTimeReport(float(t[i]), float(s[i]), i, False, crossing)
    x = t[i - 1:i + 2]
    y = s[i - 1:i + 2]
    a, b, c = np.polyfit(x - x[1], y, 2)
    if a < 0:
        dx = float(np.clip(-b / (2 * a), x[0] - x[1], x[2] - x[1]))
        t_page = x[1] + dx
        s_max = max(float(c + b * dx + a * dx * dx), float(s[i]))
    else:
        t_page, s_max = float(t[i]), float(s[i])
    return PageTimeReport(float(t_page), s_max, i, True, crossing)


def gibbs_state(spec: QubitSpec) -> np.ndarray:
    """exp(-H_S / T) / Z for H_S = (eps/2) sigma_z, ordering (|1>, |0>)."""
    T = spec.bath.temperature
    if not T > 0:
        raise ValueError("the Gibbs state needs T > 0")
    x = spec.epsilon / T
    p1 = 0.5 * (1.0 - np.tanh(0.5 * x))
    return np.diag([p1, 1.0 - p1]).astype(complex)


def mean_force_entropy_qbm(spec: OscillatorSpec, base: float = np.e) -> float:
    """Entropy of the reduced equilibrium state of the oscillator."""
    return gaussian_entropy(steady_covariance(spec), base)
