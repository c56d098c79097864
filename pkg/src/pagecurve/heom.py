"""
Hierarchical equations of motion for a qubit coupled through sigma_x to a
Drude-Lorentz bath.

For a multi-index n = (n_0, ..., n_K) over the exponential terms
c_k exp(-nu_k t) of the bath correlation function, the auxiliary density
operators obey

    d rho_n/dt = -i [H_S, rho_n] - (sum_k n_k nu_k) rho_n
                 - i sum_k [Q, rho_{n+e_k}]
                 - i sum_k n_k (c_k Q rho_{n-e_k} - conj(c_k) rho_{n-e_k} Q)
                 - Delta [Q, [Q, rho_n]]

with Q = sigma_x, H_S = (eps/2) sigma_z and Delta the white-noise closure for
the discarded Matsubara terms. Matrices use the basis ordering (|1>, |0>),
so index [0, 0] of a density matrix is the excited-state population.

In the rescaled representation rho_n -> rho_n / prod_k sqrt(n_k! |c_k|^n_k)
the couplings become sqrt((n_k + 1)|c_k|) upwards and sqrt(n_k / |c_k|)
(c_k Q . - conj(c_k) . Q) downwards, which keeps all ADOs of comparable
magnitude.
"""

from __future__ import annotations

import itertools
import time as _time
from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy import integrate as _integrate

from . import krylov
from .spectral import (BathSpec, matsubara_expansion,
                       terminator_strength)

__all__ = [
    "QubitSpec",
    "HierarchyIndex",
    "HierarchyTable",
    "AdoHierarchy",
    "Trajectory",
    "ConvergenceReport",
    "ConfigurationError",
    "HierarchyTooLarge",
    "StiffnessError",
    "HeomStateError",
    "MAX_HIERARCHY_SIZE",
    "SIGMA_X",
    "SIGMA_Z",
    "build_hierarchy",
    "heom_rhs",
    "liouvillian",
    "integrate",
    "solve",
    "convergence_check",
]

MAX_HIERARCHY_SIZE = 10_000_000

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
EXCITED = np.array([[1, 0], [0, 0]], dtype=complex)

METHODS = ("krylov", "RK45", "DOP853")


class ConfigurationError(ValueError):
    pass


class HierarchyTooLarge(ConfigurationError):
    pass


class StiffnessError(RuntimeError):
    pass


class HeomStateError(RuntimeError):
    """The reduced density matrix left the physical set during propagation."""


@dataclass(frozen=True)
class QubitSpec:
    epsilon: float
    bath: BathSpec

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")

    @property
    def hamiltonian(self) -> np.ndarray:
        return 0.5 * self.epsilon * SIGMA_Z

    @property
    def coupling(self) -> np.ndarray:
        return SIGMA_X


class HierarchyIndex(tuple):
    """Occupation numbers (n_0, ..., n_K) of one auxiliary density operator."""

    __slots__ = ()

    def __new__(cls, counts):
        counts = tuple(int(c) for c in counts)
        if any(c < 0 for c in counts):
            raise ValueError("hierarchy counts must be non-negative")
        return super().__new__(cls, counts)

    @property
    def level(self) -> int:
        return sum(self)


@dataclass(frozen=True, eq=False)
class HierarchyTable:
    """
    Flat enumeration of all indices with |n| <= n_c plus neighbour tables.

    ``up[i, k]`` / ``down[i, k]`` hold the position of n + e_k / n - e_k or
    -1 when that neighbour is outside the truncated hierarchy.
    """

    n_terms: int
    n_c: int
    counts: np.ndarray
    up: np.ndarray
    down: np.ndarray
    position: dict = field(repr=False)

    def __len__(self):
        return self.counts.shape[0]

    def index(self, i: int) -> HierarchyIndex:
        return HierarchyIndex(self.counts[i])

    def find(self, counts) -> int:
        return self.position[tuple(int(c) for c in counts)]


def hierarchy_size(n_terms: int, n_c: int) -> int:
    """Number of multi-indices over ``n_terms`` entries with level <= n_c."""
    return comb(n_terms + n_c, n_c)


def build_hierarchy(n_k: int, n_c: int) -> HierarchyTable:
    """
    Enumerate the hierarchy for ``n_k`` Matsubara terms (plus the Drude
    term) truncated at depth ``n_c``.

    Indices are ordered by level, and within a level lexicographically by
    the sorted multiset of term labels; the root is always position 0.
    """
    if n_k < 1:
        raise ConfigurationError("n_k must be >= 1")
    if n_c < 0:
        raise ConfigurationError("n_c must be >= 0")
    n_terms = n_k + 1
    size = hierarchy_size(n_terms, n_c)
    if size > MAX_HIERARCHY_SIZE:
        raise HierarchyTooLarge(
            f"hierarchy with n_k={n_k}, n_c={n_c} has {size} members "
            f"(limit {MAX_HIERARCHY_SIZE})")
    counts = np.zeros((size, n_terms), dtype=np.int64)
    row = 0
    for level in range(n_c + 1):
        for combo in itertools.combinations_with_replacement(range(n_terms),
                                                             level):
            for k in combo:
                counts[row, k] += 1
            row += 1
    position = {tuple(c): i for i, c in enumerate(counts.tolist())}
    up = np.full((size, n_terms), -1, dtype=np.int64)
    down = np.full((size, n_terms), -1, dtype=np.int64)
    for i, c in enumerate(counts.tolist()):
        for k in range(n_terms):
            c[k] += 1
            up[i, k] = position.get(tuple(c), -1)
            c[k] -= 2
            if c[k] >= 0:
                down[i, k] = position[tuple(c)]
            c[k] += 1
    return HierarchyTable(n_terms, n_c, counts, up, down, position)


@dataclass(eq=False)
class AdoHierarchy:
    """
    ADO values stored contiguously as an (N, 2, 2) complex array aligned
    with ``table``. Position 0 is the reduced density matrix.
    """

    table: HierarchyTable
    data: np.ndarray
    scaled: bool = True

    @classmethod
    def initial(cls, table: HierarchyTable, rho0=None, scaled: bool = True):
        """Factorised initial condition: root = rho0, all other ADOs zero."""
        rho0 = EXCITED if rho0 is None else np.asarray(rho0, dtype=complex)
        data = np.zeros((len(table), 2, 2), dtype=complex)
        data[0] = rho0
        return cls(table, data, scaled)

    @property
    def n_k(self) -> int:
        return self.table.n_terms - 1

    @property
    def n_c(self) -> int:
        return self.table.n_c

    @property
    def root(self) -> np.ndarray:
        return self.data[0]

    def __getitem__(self, counts) -> np.ndarray:
        return self.data[self.table.find(counts)]

    def with_data(self, data) -> "AdoHierarchy":
        return AdoHierarchy(self.table, np.asarray(data).reshape(
            len(self.table), 2, 2), self.scaled)


def _check_terms(table, terms):
    if len(terms) != table.n_terms:
        raise ConfigurationError(
            f"hierarchy built for {table.n_terms - 1} Matsubara terms but "
            f"{len(terms) - 1} were supplied")


def _couplings(table, terms, scaled):
    """Per-(ADO, term) weights of the up link and the two halves of the
    down link."""
    c = np.array([t.coefficient for t in terms], dtype=complex)
    n = table.counts
    if scaled:
        mag = np.abs(c)
        up_w = np.sqrt((n + 1) * mag)
        # sqrt(n / |c|) * c, written to stay finite when c = 0
        root_mag = np.sqrt(mag)
        phase = np.divide(c, root_mag, out=np.zeros_like(c),
                          where=root_mag > 0)
        left = np.sqrt(n) * phase
        right = np.sqrt(n) * phase.conj()
    else:
        up_w = np.ones(n.shape)
        left = n * c
        right = n * c.conj()
    up_w = np.where(table.up >= 0, up_w, 0.0)
    left = np.where(table.down >= 0, left, 0.0)
    right = np.where(table.down >= 0, right, 0.0)
    return up_w, left, right


def _damping(table, terms):
    nu = np.array([t.rate for t in terms])
    return table.counts @ nu


def heom_rhs(h: AdoHierarchy, spec: QubitSpec, terms, terminator: bool = True
             ) -> np.ndarray:
    """
    Time derivative of every ADO, returned as an (N, 2, 2) array.

    Works directly on the neighbour tables; :func:`liouvillian` assembles
    the same map as a sparse matrix for repeated use.
    """
    table = h.table
    _check_terms(table, terms)
    rho = h.data
    H, Q = spec.hamiltonian, spec.coupling
    up_w, left, right = _couplings(table, terms, h.scaled)
    padded = np.concatenate([rho, np.zeros((1, 2, 2), complex)])

    out = -1j * (H @ rho - rho @ H)
    out -= _damping(table, terms)[:, None, None] * rho
    s_up = np.einsum("ik,ikab->iab", up_w, padded[table.up])
    down_blocks = padded[table.down]
    s_left = np.einsum("ik,ikab->iab", left, down_blocks)
    s_right = np.einsum("ik,ikab->iab", right, down_blocks)
    out -= 1j * (Q @ s_up - s_up @ Q)
    out -= 1j * (Q @ s_left - s_right @ Q)
    if terminator:
        delta = terminator_strength(spec.bath, table.n_terms - 1)
        comm = Q @ rho - rho @ Q
        out -= delta * (Q @ comm - comm @ Q)
    return out


def _left(A):
    return np.kron(A, np.eye(2))


def _right(B):
    return np.kron(np.eye(2), B.T)


def liouvillian(table: HierarchyTable, spec: QubitSpec, terms,
                terminator: bool = True, scaled: bool = True) -> sp.csr_matrix:
    """
    Sparse generator acting on the row-major flattening of the (N, 2, 2)
    ADO array.
    """
    _check_terms(table, terms)
    N = len(table)
    H, Q = spec.hamiltonian, spec.coupling
    comm_h = -1j * (_left(H) - _right(H))
    comm_q = _left(Q) - _right(Q)
    up_w, left, right = _couplings(table, terms, scaled)
    eye4 = np.eye(4)

    diag = comm_h[None] - _damping(table, terms)[:, None, None] * eye4
    if terminator:
        delta = terminator_strength(spec.bath, table.n_terms - 1)
        diag = diag - delta * (comm_q @ comm_q)[None]
    rows = [np.arange(N)]
    cols = [np.arange(N)]
    blocks = [diag]

    i_up, k_up = np.nonzero(table.up >= 0)
    rows.append(i_up)
    cols.append(table.up[i_up, k_up])
    blocks.append(-1j * up_w[i_up, k_up, None, None] * comm_q[None])

    i_dn, k_dn = np.nonzero(table.down >= 0)
    rows.append(i_dn)
    cols.append(table.down[i_dn, k_dn])
    blocks.append(-1j * (left[i_dn, k_dn, None, None] * _left(Q)[None]
                         - right[i_dn, k_dn, None, None] * _right(Q)[None]))

    r = np.concatenate(rows)
    c = np.concatenate(cols)
    b = np.concatenate(blocks)
    a, bb = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    R = (4 * r[:, None, None] + a[None]).ravel()
    C = (4 * c[:, None, None] + bb[None]).ravel()
    V = b.ravel()
    keep = V != 0
    L = sp.coo_matrix((V[keep], (R[keep], C[keep])), shape=(4 * N, 4 * N))
    return L.tocsr()


@dataclass
class Trajectory:
    """
    Reduced dynamics on a time grid. ``states`` has shape (T, 2, 2) in the
    (|1>, |0>) basis.
    """

    times: np.ndarray
    states: np.ndarray
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("one state per grid time is required")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def populations(self) -> np.ndarray:
        """Excited-state population P1(t)."""
        return self.states[:, 0, 0].real

    @property
    def coherence(self) -> np.ndarray:
        return np.abs(self.states[:, 0, 1])

    def entropy(self, base: float = np.e) -> np.ndarray:
        from .observables import von_neumann_entropy
        return np.array([von_neumann_entropy(r, base) for r in self.states])


def _check_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a non-empty 1-D array")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def _physical_check(states, times, tol=1e-8):
    herm = np.abs(states - states.conj().transpose(0, 2, 1)).max(axis=(1, 2))
    trace = np.abs(np.trace(states, axis1=1, axis2=2) - 1.0)
    herm_part = 0.5 * (states + states.conj().transpose(0, 2, 1))
    ev = np.linalg.eigvalsh(herm_part)
    bad = (herm > tol) | (trace > tol) | (ev[:, 0] < -tol) | (ev[:, -1] > 1 + tol)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise HeomStateError(
            f"reduced state unphysical at t={times[i]:g}: hermiticity error "
            f"{herm[i]:.2e}, trace error {trace[i]:.2e}, eigenvalues {ev[i]}")
    return {"max_hermiticity_error": float(herm.max()),
            "max_trace_error": float(trace.max()),
            "min_eigenvalue": float(ev[:, 0].min()),
            "max_eigenvalue": float(ev[:, -1].max())}


def integrate(h0: AdoHierarchy, spec: QubitSpec, terms, t_grid, *,
              rtol: float = 1e-8, atol: float = 1e-10,
              method: str = "krylov", terminator: bool = True) -> Trajectory:
    """
    Propagate the hierarchy and record the reduced state on ``t_grid``.

    Parameters
    ----------
    h0
        Initial hierarchy, taken to be the state at ``t_grid[0]``.
    terms
        Exponential terms of the bath correlation function, as returned by
        :func:`~pagecurve.spectral.matsubara_expansion`.
    rtol, atol
        Tolerances. For the Runge-Kutta methods they are passed to the
        stepper. For ``"krylov"`` the admissible local error per step is
        ``atol + 0.01 * rtol * |y|``.
    method
        ``"krylov"`` (exponential propagator, the default), ``"RK45"`` or
        ``"DOP853"`` (explicit adaptive Runge-Kutta with dense output).

    Raises
    ------
    StiffnessError
        If the step size collapses.
    HeomStateError
        If the reduced state leaves the physical set by more than 1e-8.
    """
    if not (rtol > 0 and atol > 0):
        raise ValueError("rtol and atol must be positive")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    t = _check_grid(t_grid)
    L = liouvillian(h0.table, spec, terms, terminator, h0.scaled)
    y0 = h0.data.reshape(-1).astype(complex)
    started = _time.perf_counter()
    if method == "krylov":
        norm1 = float(abs(L).sum(axis=0).max())
        try:
            roots, stats = krylov.propagate_on_grid(
                L.dot, y0, t, norm1=norm1,
                tol=lambda beta: atol + 0.01 * rtol * beta,
                observe=lambda v: v[:4].copy())
        except krylov.StepSizeUnderflow as exc:
            raise StiffnessError(
                f"{exc}; reduce n_c * cutoff or use a smaller Krylov step "
                "tolerance") from exc
        diag = {"n_steps": stats.n_steps, "n_rejected": stats.n_rejected,
                "n_matvec": stats.n_matvec}
    else:
        roots, diag = _integrate_rk(L, y0, t, rtol, atol, method)
    states = roots.reshape(len(t), 2, 2)
    states[0] = h0.root
    diag["wall_time_s"] = _time.perf_counter() - started
    diag["hierarchy_size"] = len(h0.table)
    diag.update(_physical_check(states, t))
    config = {"n_k": h0.n_k, "n_c": h0.n_c, "scaled": h0.scaled,
              "terminator": terminator, "method": method, "rtol": rtol,
              "atol": atol, "rho0": h0.root.copy()}
    return Trajectory(t, states, config, diag)


def _integrate_rk(L, y0, t, rtol, atol, method):
    stepper_cls = {"RK45": _integrate.RK45, "DOP853": _integrate.DOP853}[method]
    out = np.empty((len(t), 4), dtype=complex)
    out[0] = y0[:4]
    if len(t) == 1:
        return out, {"n_steps": 0, "nfev": 0}
    stepper = stepper_cls(lambda _, y: L @ y, t[0], y0, t[-1], rtol=rtol,
                          atol=atol)
    i = 1
    while i < len(t):
        msg = stepper.step()
        if stepper.status == "failed":
            raise StiffnessError(
                f"{method} failed at t={stepper.t:g}: {msg}; reduce "
                "n_c * cutoff or switch to method='krylov'")
        dense = None
        while i < len(t) and t[i] <= stepper.t:
            if t[i] == stepper.t:
                out[i] = stepper.y[:4]
            else:
                dense = dense or stepper.dense_output()
                out[i] = dense(t[i])[:4]
            i += 1
    return out, {"n_steps": None, "nfev": stepper.nfev}


def solve(spec: QubitSpec, n_k: int, n_c: int, t_grid, rho0=None, *,
          scaled: bool = True, terminator: bool = True, **kwargs) -> Trajectory:
    """Convenience wrapper: expansion, hierarchy and propagation in one call."""
    terms = matsubara_expansion(spec.bath, n_k)
    h0 = AdoHierarchy.initial(build_hierarchy(n_k, n_c), rho0, scaled)
    return integrate(h0, spec, terms, t_grid, terminator=terminator, **kwargs)


@dataclass
class ConvergenceReport:
    deviation_nk: dict
    deviation_nc: dict
    threshold: float
    reference_nk: tuple
    reference_nc: tuple

    @property
    def max_deviation(self) -> float:
        return max(*self.deviation_nk.values(), *self.deviation_nc.values())

    @property
    def converged(self) -> bool:
        return self.max_deviation < self.threshold

    def as_dict(self) -> dict:
        return {"deviation_nk": self.deviation_nk,
                "deviation_nc": self.deviation_nc,
                "reference_nk": list(self.reference_nk),
                "reference_nc": list(self.reference_nc),
                "threshold": self.threshold,
                "max_deviation": self.max_deviation,
                "converged": self.converged}


def _deviation(a: Trajectory, b: Trajectory) -> dict:
    return {"S": float(np.max(np.abs(a.entropy() - b.entropy()))),
            "P1": float(np.max(np.abs(a.populations - b.populations)))}


def convergence_check(spec: QubitSpec, baseline: Trajectory,
                      threshold: float = 1e-4, extra_k: int = 10,
                      extra_c: int = 1) -> ConvergenceReport:
    """
    Re-run with (n_k + extra_k, n_c) and (n_k, n_c + extra_c) on the
    baseline grid and report the largest deviations in S(t) and P1(t).
    """
    cfg = baseline.config
    n_k, n_c = cfg["n_k"], cfg["n_c"]
    kwargs = dict(scaled=cfg["scaled"], terminator=cfg["terminator"],
                  method=cfg["method"], rtol=cfg["rtol"], atol=cfg["atol"])
    more_k = solve(spec, n_k + extra_k, n_c, baseline.times, cfg["rho0"],
                   **kwargs)
    more_c = solve(spec, n_k, n_c + extra_c, baseline.times, cfg["rho0"],
                   **kwargs)
    return ConvergenceReport(_deviation(baseline, more_k),
                             _deviation(baseline, more_c), threshold,
                             (n_k + extra_k, n_c), (n_k, n_c + extra_c))
