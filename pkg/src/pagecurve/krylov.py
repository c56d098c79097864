"""
Krylov-subspace propagation of linear time-invariant systems dy/dt = L y.

Each step builds an Arnoldi basis V_m of K_m(L, y), approximates
exp(tau L) y by beta V_m exp(tau H_m) e_1, and controls the step from the
standard a-posteriori estimate obtained from the augmented Hessenberg
matrix. Output at grid times inside a step reuses the same basis, so a fine
output grid costs only small dense exponentials.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

__all__ = ["KrylovStats", "StepSizeUnderflow", "propagate_on_grid"]


class StepSizeUnderflow(RuntimeError):
    pass


@dataclass
class KrylovStats:
    n_steps: int = 0
    n_rejected: int = 0
    n_matvec: int = 0


def _arnoldi(matvec, y, beta, m, anorm):
    n = y.shape[0]
    V = np.zeros((m + 1, n), dtype=complex)
    H = np.zeros((m + 2, m + 2), dtype=complex)
    V[0] = y / beta
    for j in range(m):
        w = matvec(V[j])
        # two passes of classical Gram-Schmidt
        for _ in range(2):
            h = V[:j + 1].conj() @ w
            w = w - h @ V[:j + 1]
            H[:j + 1, j] += h
        hn = np.linalg.norm(w)
        H[j + 1, j] = hn
        if hn <= 1e-14 * anorm:
            return V[:j + 1], H[:j + 1, :j + 1], True
        V[j + 1] = w / hn
    return V, H, False


def propagate_on_grid(matvec: Callable[[np.ndarray], np.ndarray],
                      y0: np.ndarray, times: np.ndarray, *,
                      norm1: float, tol: Callable[[float], float],
                      krylov_dim: int = 30,
                      observe: Callable[[np.ndarray], np.ndarray] | None = None,
                      min_step: float = 1e-10):
    """
    Propagate ``y0`` given at ``times[0]`` and return ``observe(y(t))`` for
    every grid time.

    Parameters
    ----------
    matvec
        Action of the generator L on a vector.
    norm1
        An estimate of the 1-norm of L (used for the error estimate and the
        breakdown test).
    tol
        Maps the current state norm to the admissible local error per step.
    observe
        Projection applied to stored states; defaults to a copy of the
        full vector.

    Returns
    -------
    out : ndarray, shape (len(times), ...)
    stats : KrylovStats
    """
    observe = observe or (lambda v: v.copy())
    times = np.asarray(times, dtype=float)
    y = np.asarray(y0, dtype=complex).copy()
    first = observe(y)
    out = np.empty((len(times),) + np.shape(first), dtype=complex)
    out[0] = first
    stats = KrylovStats()
    t, i = times[0], 1
    t_end = times[-1]
    m = min(krylov_dim, y.shape[0])
    tau = min(1.0, t_end - t) if t_end > t else 0.0
    scale = max(abs(t_end), 1.0)

    while i < len(times):
        beta = np.linalg.norm(y)
        if beta == 0.0:
            out[i:] = observe(y)
            break
        V, H, breakdown = _arnoldi(matvec, y, beta, m, norm1)
        stats.n_matvec += V.shape[0] if breakdown else m
        allowed = tol(beta)
        while True:
            tau = min(tau, t_end - t)
            if breakdown:
                # invariant subspace: the projection is exact for any step
                tau = t_end - t
                Hs = H
                err = 0.0
                F = expm(tau * Hs)
                break
            Hs = H.copy()
            Hs[m + 1, m] = 1.0
            F = expm(tau * Hs)
            e1 = beta * abs(F[m, 0])
            e2 = beta * abs(F[m + 1, 0]) * norm1
            if e1 > 10 * e2:
                err = e2
            elif e1 > e2:
                err = e2 * e1 / (e1 - e2)
            else:
                err = e1
            if err <= allowed:
                break
            stats.n_rejected += 1
            tau *= 0.5
            if tau < min_step * scale:
                raise StepSizeUnderflow(
                    f"Krylov step fell below {min_step * scale:g} at t={t:g}")
        basis_len = V.shape[0] if breakdown else m + 1
        while i < len(times) and times[i] <= t + tau * (1 + 1e-12):
            c = expm((times[i] - t) * Hs)[:basis_len, 0]
            out[i] = observe(beta * (c @ V[:basis_len]))
            i += 1
        y = beta * (F[:basis_len, 0] @ V[:basis_len])
        t += tau
        stats.n_steps += 1
        if err < 0.1 * allowed:
            tau *= 1.5
    return out, stats
