"""
Shared numerical kernels: vectorised adaptive Gauss-Kronrod quadrature on
finite and semi-infinite intervals, and polished cubic root finding.

The integrators accept vector-valued integrands. ``f`` is called with a 1-D
array of abscissae of shape ``(n,)`` and must return an array of shape
``(n,)`` or ``(n, k)``; real and complex values are both supported. All
nodes of all active subintervals are evaluated in a single call, so the
integrand should be written with numpy broadcasting in mind.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "QuadratureSpec",
    "QuadratureResult",
    "QuadratureError",
    "DegenerateRootsWarning",
    "integrate_interval",
    "integrate_semi_infinite",
    "cubic_roots",
    "root_separation",
]

# Kronrod 21-point rule with embedded 10-point Gauss rule (QUADPACK qk21).
_XK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
])
_WK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
# Gauss nodes sit at the odd positions of the Kronrod abscissae.
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[1:10:2] = _WG
GAUSS_WEIGHTS[11:20:2] = _WG[::-1]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, *, value=None, error=None, n_intervals=0,
                 worst_interval=None):
        super().__init__(message)
        self.value = value
        self.error = error
        self.n_intervals = n_intervals
        self.worst_interval = worst_interval


class DegenerateRootsWarning(RuntimeWarning):
    """Two or more polynomial roots are numerically indistinguishable."""


@dataclass(frozen=True)
class QuadratureSpec:
    """
    Tolerances and subdivision hints for adaptive quadrature.

    Parameters
    ----------
    rel_tol, abs_tol : float
        Convergence is declared when the summed error estimate is below
        ``max(abs_tol, rel_tol * |value|)`` (max-norm over components).
    split_points : tuple of float
        Interior breakpoints. Points outside the integration domain are
        dropped, so one spec may be shared between several integrals.
    tail_start : float or None
        For semi-infinite integrals, the abscissa beyond which the domain is
        compactified with ``x = tail_start / u``. ``None`` picks four times
        the largest split point (or 1 when there are none).
    max_intervals : int
        Subdivision budget before :class:`QuadratureError` is raised.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    split_points: tuple = ()
    tail_start: float | None = None
    max_intervals: int = 20000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        object.__setattr__(
            self, "split_points",
            tuple(sorted(float(p) for p in self.split_points)))
        if self.tail_start is not None and not self.tail_start > 0:
            raise ValueError("tail_start must be positive")

    def with_splits(self, *points) -> "QuadratureSpec":
        return QuadratureSpec(self.rel_tol, self.abs_tol,
                              self.split_points + tuple(points),
                              self.tail_start, self.max_intervals)


@dataclass
class QuadratureResult:
    value: np.ndarray | complex | float
    error: float
    n_intervals: int
    n_evaluations: int = field(default=0)

    def __iter__(self):
        # allows ``value, err = integrate_...(...)``
        yield self.value
        yield self.error


def _gk_rule(f, a, b):
    """Apply G10/K21 on every interval [a_i, b_i]; returns (K, |K-G|)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x.ravel()))
    fx = fx.reshape(x.shape + fx.shape[1:])
    # fx: (n_int, 21, *components)
    kron = np.tensordot(fx, KRONROD_WEIGHTS, axes=([1], [0]))
    gauss = np.tensordot(fx, GAUSS_WEIGHTS, axes=([1], [0]))
    if kron.ndim > 1:
        moveaxis = (slice(None),) + (None,) * (kron.ndim - 1)
        kron = kron * half[moveaxis]
        gauss = gauss * half[moveaxis]
        err = np.abs(kron - gauss).reshape(len(a), -1).max(axis=1)
    else:
        kron = kron * half
        gauss = gauss * half
        err = np.abs(kron - gauss)
    return kron, err


def _adaptive(f, edges, spec):
    a = np.asarray(edges[:-1], dtype=float)
    b = np.asarray(edges[1:], dtype=float)
    vals, errs = _gk_rule(f, a, b)
    n_eval = 21 * len(a)
    while True:
        total = vals.sum(axis=0)
        err = errs.sum()
        scale = np.max(np.abs(total))
        target = max(spec.abs_tol, spec.rel_tol * scale)
        if err <= target:
            return QuadratureResult(total, float(err), len(a), n_eval)
        if len(a) >= spec.max_intervals:
            worst = int(np.argmax(errs))
            raise QuadratureError(
                f"adaptive quadrature did not converge: error estimate "
                f"{err:.3e} > target {target:.3e} with {len(a)} intervals; "
                f"worst interval [{a[worst]:.6g}, {b[worst]:.6g}] "
                f"(error {errs[worst]:.3e})",
                value=total, error=float(err), n_intervals=len(a),
                worst_interval=(float(a[worst]), float(b[worst])))
        # Bisect every interval whose error exceeds its fair share of the
        # target, but at least the single worst one.
        share = target / len(a)
        refine = errs > share
        order = np.argsort(errs)[::-1]
        budget = spec.max_intervals - len(a)
        if refine.sum() > budget:
            refine[:] = False
            refine[order[:max(budget, 1)]] = True
        if not refine.any():
            refine[order[0]] = True
        ra, rb = a[refine], b[refine]
        mid = 0.5 * (ra + rb)
        if np.any((mid <= ra) | (mid >= rb)):
            worst = int(np.argmax(errs))
            raise QuadratureError(
                "adaptive quadrature hit floating-point resolution while "
                "subdividing",
                value=total, error=float(err), n_intervals=len(a),
                worst_interval=(float(a[worst]), float(b[worst])))
        na = np.concatenate([ra, mid])
        nb = np.concatenate([mid, rb])
        nvals, nerrs = _gk_rule(f, na, nb)
        n_eval += 21 * len(na)
        keep = ~refine
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        vals = np.concatenate([vals[keep], nvals])
        errs = np.concatenate([errs[keep], nerrs])


def integrate_interval(f: Callable, a: float, b: float,
                       spec: QuadratureSpec | None = None) -> QuadratureResult:
    """Adaptive G10/K21 quadrature of ``f`` over the finite interval [a, b]."""
    spec = spec or QuadratureSpec()
    if not b > a:
        raise ValueError("integration requires b > a")
    inner = [p for p in spec.split_points if a < p < b]
    return _adaptive(f, [a, *inner, b], spec)


def integrate_semi_infinite(f: Callable, spec: QuadratureSpec | None = None,
                            lower: float = 0.0) -> QuadratureResult:
    """
    Integrate ``f`` over [lower, inf).

    The finite part [lower, c] is subdivided at ``spec.split_points``; the
    tail [c, inf) is mapped onto (0, 1] by ``x = c / u``, which turns an
    O(1/x^2) decay into a bounded integrand. Gauss-Kronrod nodes are interior
    so ``u = 0`` is never evaluated. Both parts share one adaptive loop, so
    the error budget is global.
    """
    spec = spec or QuadratureSpec()
    inner = [p for p in spec.split_points if p > lower]
    c = spec.tail_start
    if c is None:
        c = 4.0 * max(inner) if inner else lower + 1.0
    if not c > lower:
        raise ValueError("tail_start must exceed the lower limit")
    inner = [p for p in inner if p < c]
    breaks = np.asarray([lower, *inner, c], dtype=float)
    n_finite = len(breaks) - 1

    # Piece k of the finite part lives on s in [k, k+1); the tail on
    # s in [n_finite, n_finite + 1).
    def g(s):
        s = np.asarray(s, dtype=float)
        tail = s >= n_finite
        k = np.minimum(np.floor(s).astype(int), n_finite - 1)
        lo, hi = breaks[k], breaks[k + 1]
        u = np.where(tail, s - n_finite, 1.0)
        x = np.where(tail, c / u, lo + (s - k) * (hi - lo))
        jac = np.where(tail, c / u**2, hi - lo)
        fx = np.asarray(f(x))
        return fx * _bcast(jac, fx)

    return _adaptive(g, list(range(n_finite + 2)), spec)


def _bcast(w, like):
    w = np.asarray(w)
    return w.reshape(w.shape + (1,) * (like.ndim - 1))


def root_separation(roots: np.ndarray) -> float:
    """Smallest pairwise distance between roots, relative to their scale."""
    roots = np.asarray(roots)
    scale = max(1.0, float(np.max(np.abs(roots))))
    d = np.abs(roots[:, None] - roots[None, :])
    d[np.diag_indices(len(roots))] = np.inf
    return float(d.min() / scale)


def cubic_roots(coefficients, degenerate_tol: float = 1e-4) -> np.ndarray:
    """
    Roots of ``c0 s^3 + c1 s^2 + c2 s + c3`` from companion-matrix eigenvalues.

    Each root is polished by two Newton steps, complex-conjugate pairs are
    symmetrised exactly for real coefficients, and the result is sorted by
    real part then imaginary part. A :class:`DegenerateRootsWarning` is
    emitted when two roots are closer than ``degenerate_tol`` relative to the
    root scale.
    """
    c = np.asarray(coefficients, dtype=complex)
    if c.shape != (4,):
        raise ValueError("expected four coefficients")
    if c[0] == 0:
        raise ValueError("leading coefficient must be nonzero")
    monic = c / c[0]
    companion = np.zeros((3, 3), dtype=complex)
    companion[0, :] = -monic[1:]
    companion[1, 0] = companion[2, 1] = 1.0
    if np.all(np.isreal(monic)):
        companion = companion.real
    roots = np.linalg.eigvals(companion).astype(complex)

    dp = np.polyder(monic)
    for _ in range(2):
        d = np.polyval(dp, roots)
        step = np.where(np.abs(d) > 0, np.polyval(monic, roots) / np.where(
            d == 0, 1, d), 0)
        trial = roots - step
        better = np.abs(np.polyval(monic, trial)) <= np.abs(
            np.polyval(monic, roots))
        roots = np.where(better, trial, roots)

    if np.all(np.isreal(c)):
        roots = _pair_conjugates(roots)
    roots = roots[np.lexsort((roots.imag, roots.real))]
    if root_separation(roots) < degenerate_tol:
        warnings.warn(
            f"near-degenerate cubic roots {roots}", DegenerateRootsWarning,
            stacklevel=2)
    return roots


def _pair_conjugates(roots):
    # For a real cubic: either three real roots or one real root plus a
    # conjugate pair. Pick the root with the smallest |imag| as the real one.
    r = np.array(roots, dtype=complex)
    k = int(np.argmin(np.abs(r.imag)))
    others = [r[i] for i in range(3) if i != k]
    real_root = complex(r[k].real, 0.0)
    a, b = others
    if abs(a.imag) <= 1e-14 * max(1.0, abs(a)) and \
            abs(b.imag) <= 1e-14 * max(1.0, abs(b)):
        return np.array([real_root, a.real + 0j, b.real + 0j])
    mean_re = 0.5 * (a.real + b.real)
    mean_im = 0.5 * (abs(a.imag) + abs(b.imag))
    return np.array([real_root, complex(mean_re, mean_im),
                     complex(mean_re, -mean_im)])
