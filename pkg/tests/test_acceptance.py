"""
End-to-end acceptance checks at the published parameter sets.

Each criterion records one PASS/FAIL line that is printed in the pytest
terminal summary. Run directly with ``python3 tests/test_acceptance.py``.
"""

import sys
import time

import numpy as np
import pytest

import conftest
from oracles import (discretized_bath_covariance, fock_entropy,
                     golden_rule_decay_rate, memory_kernel_ode)
from pagecurve.gaussian_qbm import (CovarianceMatrix, OscillatorSpec,
                                    characteristic_roots, evolve_covariance,
                                    evolve_trajectory, gaussian_entropy,
                                    ground_state, propagator,
                                    steady_covariance, wave_packet)
from pagecurve.heom import QubitSpec, convergence_check, solve
from pagecurve.observables import (EntropyCurve, gibbs_state, page_time,
                                   von_neumann_entropy)
from pagecurve.spectral import (BathSpec, bath_correlation,
                                correlation_from_terms, matsubara_expansion)

pytestmark = pytest.mark.slow

LN2 = np.log(2)
QBM_GRID = np.linspace(0, 30000, 6001)
SB_GRID = np.linspace(0, 6000, 6001)


def qbm(gamma=0.001, temperature=0.0):
    return OscillatorSpec(1.0, BathSpec(gamma, 10.0, temperature))


def qubit(gamma=0.001, temperature=0.2):
    return QubitSpec(1.0, BathSpec(gamma, 10.0, temperature))


def record(n, ok, detail):
    conftest.ACCEPTANCE_LINES[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


# -- shared runs -------------------------------------------------------------

@pytest.fixture(scope="module")
def fig3():
    started = time.perf_counter()
    traj = solve(qubit(), 30, 2, SB_GRID)
    traj.diagnostics["total_wall_time_s"] = time.perf_counter() - started
    return traj


@pytest.fixture(scope="module")
def spin_boson_runs(fig3):
    runs = {("T", 0.2): fig3, ("gamma", 0.001): fig3}
    for T in (0.25, 0.3):
        runs[("T", T)] = solve(qubit(temperature=T), 30, 2, SB_GRID)
    for g in (0.0015, 0.002):
        runs[("gamma", g)] = solve(qubit(gamma=g), 30, 2, SB_GRID)
    return runs


@pytest.fixture(scope="module")
def qbm_runs():
    runs = {}
    for delta in (0.01, 0.001):
        runs[("delta", delta)] = evolve_trajectory(qbm(), wave_packet(delta),
                                                   QBM_GRID)
    runs["ground"] = evolve_trajectory(qbm(), ground_state(1.0), QBM_GRID)
    for g in (0.05, 0.1):
        runs[("gamma", g)] = evolve_trajectory(qbm(g), wave_packet(0.01),
                                               QBM_GRID)
    runs[("gamma", 0.001)] = runs[("delta", 0.01)]
    return runs


# -- criteria ----------------------------------------------------------------

def test_criterion_1_spin_boson_page_curve(fig3):
    S = fig3.entropy()
    P1 = fig3.populations
    rep = page_time(EntropyCurve(fig3.times, S, two_level=True), P1)
    p_at_peak = float(np.interp(rep.t_page, fig3.times, P1))
    s_gibbs = von_neumann_entropy(gibbs_state(qubit()))
    rel_gibbs = abs(S[-1] - s_gibbs) / s_gibbs
    wall = fig3.diagnostics["total_wall_time_s"]
    checks = [S[0] < 1e-9, abs(rep.s_max - LN2) < 1e-3,
              abs(p_at_peak - 0.5) < 1e-3, rel_gibbs < 0.1, wall < 300]
    record(1, all(checks),
           f"S(0)={S[0]:.1e} ln2-Smax={LN2 - rep.s_max:.1e} "
           f"t_page={rep.t_page:.2f} |P1-1/2|={abs(p_at_peak - 0.5):.1e} "
           f"S_end={S[-1]:.5f} vs Gibbs {s_gibbs:.5f} ({rel_gibbs:.1%}) "
           f"wall={wall:.1f}s")


def test_criterion_2_monotone_decay_no_coherence(fig3):
    step = float(np.diff(fig3.populations).max())
    coh = float(fig3.coherence.max())
    record(2, step <= 1e-8 and coh <= 1e-8,
           f"max dP1={step:.2e} max|rho01|={coh:.2e}")


def test_criterion_3_hierarchy_convergence(fig3):
    rep = convergence_check(qubit(), fig3, threshold=1e-4)
    dk, dc = rep.deviation_nk, rep.deviation_nc
    record(3, rep.converged,
           f"vs (40,2): dS={dk['S']:.2e} dP1={dk['P1']:.2e}; "
           f"vs (30,3): dS={dc['S']:.2e} dP1={dc['P1']:.2e}; "
           f"threshold 1e-4")


def test_criterion_4_qbm_page_curve(qbm_runs):
    a, b = qbm_runs[("delta", 0.01)], qbm_runs[("delta", 0.001)]
    rep = page_time(EntropyCurve(a.times, a.entropy))
    interior = rep.resolved and rep.s_max > max(a.entropy[0], a.entropy[-1])
    s_inf = gaussian_entropy(steady_covariance(qbm()))
    gap = abs(a.entropy[-1] - s_inf)
    peaks = (a.entropy.max(), b.entropy.max())
    record(4, a.entropy[0] < 1e-12 and interior and gap < 1e-5
           and peaks[1] > peaks[0],
           f"S(0)={a.entropy[0]:.1e} peak {rep.s_max:.4f} at "
           f"t={rep.t_page:.0f} |S_end-S_inf|={gap:.1e} "
           f"peak(1/1000)={peaks[1]:.4f} > peak(1/100)={peaks[0]:.4f}")


def test_criterion_5_ground_state_run(qbm_runs):
    g = qbm_runs["ground"]
    s_inf = gaussian_entropy(steady_covariance(qbm()))
    s_max = g.entropy.max()
    f_min = g.fidelity_ground.min()
    record(5, f_min > 0.99 and s_max > s_inf and s_max < 0.05
           and s_inf < 0.05,
           f"min fidelity={f_min:.5f} S_max={s_max:.5f} S_inf={s_inf:.5f}")


def test_criterion_6_trends(qbm_runs, spin_boson_runs):
    s_gamma = [qbm_runs[("gamma", g)].entropy[-1] for g in (0.001, 0.05, 0.1)]
    s_temp = [spin_boson_runs[("T", T)].entropy()[-1]
              for T in (0.2, 0.25, 0.3)]
    t_page = [page_time(EntropyCurve(
        r.times, r.entropy(), two_level=True)).t_page
        for r in (spin_boson_runs[("gamma", g)]
                  for g in (0.002, 0.0015, 0.001))]
    ok = (np.all(np.diff(s_gamma) > 0) and np.all(np.diff(s_temp) > 0)
          and np.all(np.diff(t_page) > 0))
    record(6, ok,
           "QBM S_inf(gamma)=" + ", ".join(f"{s:.5f}" for s in s_gamma)
           + "; qubit S_inf(T)=" + ", ".join(f"{s:.5f}" for s in s_temp)
           + "; t_page(gamma=.002,.0015,.001)="
           + ", ".join(f"{t:.1f}" for t in t_page))


def test_criterion_7_oracle_equivalences(fig3):
    results = {}
    spec = qbm()
    k = characteristic_roots(spec)

    t = np.linspace(0, 50, 501)
    G = propagator(k, t)
    err = 0.0
    for x0, p0, col in ((1.0, 0.0, 0), (0.0, 1.0, 1)):
        x, p = memory_kernel_ode(spec.omega_r_sq, spec.bath, t, x0, p0)
        err = max(err, np.abs(G[:, 0, col] - x).max(),
                  np.abs(G[:, 1, col] - p).max())
    results["a"] = (err < 1e-8, f"propagator {err:.1e}")

    times = np.linspace(0, 30, 31)
    s0 = wave_packet(0.01)
    ref, _ = discretized_bath_covariance(1.0, spec.bath, s0.cov.as_array(),
                                         times)
    mine = np.array([evolve_covariance(spec, s0, tt, k).cov.as_array()
                     for tt in times])
    rel = (np.abs(ref - mine).max(axis=(1, 2))
           / np.abs(mine).max(axis=(1, 2))).max()
    results["b"] = (rel < 1e-3, f"400-mode bath {rel:.1e}")

    # Re C(t) diverges logarithmically at t -> 0, so the comparison uses
    # t >= 0.5 and the scale gamma * cutoff^2 = chi(0)
    bath = qubit().bath
    ts = np.linspace(0.5, 5.0, 19)
    c_ref = np.array([bath_correlation(tt, bath) for tt in ts])
    c_err = np.abs(correlation_from_terms(ts, matsubara_expansion(bath, 30))
                   - c_ref).max()
    scale = bath.gamma * bath.lambda_cutoff ** 2
    results["c"] = (c_err <= 1e-8 * scale,
                    f"Matsubara {c_err:.1e} (bound {1e-8 * scale:.0e})")

    lams = np.array([0.5, 0.5 + 1e-6, 0.75, 1.3, 2.0, 5.0])
    e_err = max(abs(gaussian_entropy(CovarianceMatrix(lam, 0, lam))
                    - fock_entropy(lam)) for lam in lams)
    results["d"] = (e_err < 1e-8, f"Fock entropy {e_err:.1e}")

    early = (fig3.times >= 2) & (fig3.times <= 50)
    slope = np.polyfit(fig3.times[early],
                       np.log(fig3.populations[early]), 1)[0]
    rate = golden_rule_decay_rate(1.0, bath)
    ratio = -slope / rate
    results["e"] = (abs(ratio - 1) < 0.1, f"decay/golden rule {ratio:.4f}")

    record(7, all(ok for ok, _ in results.values()),
           "; ".join(f"({k}) {d}" for k, (_, d) in sorted(results.items())))


def test_criterion_8_universal_invariants(qbm_runs, spin_boson_runs):
    det_min = min(r.det.min() for r in qbm_runs.values())
    herm = max(r.diagnostics["max_hermiticity_error"]
               for r in spin_boson_runs.values())
    trace = max(r.diagnostics["max_trace_error"]
                for r in spin_boson_runs.values())
    ev_lo = min(r.diagnostics["min_eigenvalue"]
                for r in spin_boson_runs.values())
    ev_hi = max(r.diagnostics["max_eigenvalue"]
                for r in spin_boson_runs.values())
    entropies = np.concatenate([r.entropy() for r in spin_boson_runs.values()])
    ok = (det_min >= 0.25 - 1e-9 and herm <= 1e-8 and trace <= 1e-8
          and ev_lo >= -1e-8 and ev_hi <= 1 + 1e-8
          and entropies.min() >= 0 and entropies.max() <= LN2)
    record(8, ok,
           f"QBM min det-1/4={det_min - 0.25:.1e}; qubit hermiticity "
           f"{herm:.1e} trace {trace:.1e} eigenvalues in "
           f"[{ev_lo:.1e}, 1{ev_hi - 1:+.1e}]; S in "
           f"[{entropies.min():.1e}, ln2{entropies.max() - LN2:+.1e}]")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
