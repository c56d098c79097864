import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import (coherent_overlap, discretized_bath_covariance,
                     fock_entropy, memory_kernel_ode)
from pagecurve.gaussian_qbm import (CovarianceMatrix, GaussianState,
                                    InvalidStateError, OscillatorSpec,
                                    characteristic_roots, evolve_covariance,
                                    evolve_trajectory, gaussian_entropy,
                                    gaussian_fidelity, ground_state,
                                    noise_covariance, propagator,
                                    steady_covariance, symplectic_eigenvalue,
                                    wave_packet)
from pagecurve.quadrature import DegenerateRootsWarning
from pagecurve.spectral import BathSpec

REF = OscillatorSpec(1.0, BathSpec(0.001, 10.0, 0.0))
FREE = OscillatorSpec(1.0, BathSpec(0.0, 10.0, 0.0))


def cov(a, b, c):
    return CovarianceMatrix(a, b, c)


# -- types -------------------------------------------------------------------

def test_renormalised_frequency():
    assert REF.omega_r_sq == pytest.approx(1.01)
    with pytest.raises(ValueError):
        OscillatorSpec(0.0, REF.bath)


def test_covariance_validation():
    with pytest.raises(InvalidStateError):
        cov(0.1, 0.0, 1.0)          # det = 0.1 < 1/4
    with pytest.raises(InvalidStateError):
        cov(-1.0, 0.0, -1.0)
    c = cov(2.0, 0.5, 1.0)
    assert c.det == pytest.approx(1.75)
    assert CovarianceMatrix.from_array(c.as_array()) == c


def test_purity():
    assert ground_state(1.0).purity == pytest.approx(1.0)
    assert GaussianState(cov(1.0, 0.0, 1.0)).purity == pytest.approx(0.5)


# -- kernel and propagator ---------------------------------------------------

def test_free_oscillator_kernel():
    k = characteristic_roots(FREE)
    t = np.linspace(0, 20, 101)
    np.testing.assert_allclose(k.g(t), np.sin(t), atol=1e-14)
    G = propagator(k, t)
    expected = np.stack([np.stack([np.cos(t), np.sin(t)], -1),
                         np.stack([-np.sin(t), np.cos(t)], -1)], -2)
    np.testing.assert_allclose(G, expected, atol=1e-14)


def test_weakly_damped_roots():
    k = characteristic_roots(REF)
    r = k.roots
    assert len(r) == 3
    assert r[0].imag == 0 and r[0].real == pytest.approx(-10.0, rel=1e-3)
    assert r[1] == np.conj(r[2])
    assert np.all(r.real < 0)
    lam, wr2 = 10.0, 1.01
    coeffs = [1.0, lam, wr2, wr2 * lam - 0.001 * lam**2]
    assert np.abs(np.polyval(coeffs, r)).max() < 1e-12 * max(coeffs)


def test_residue_identities():
    k = characteristic_roots(REF)
    assert abs(k.residues.sum()) < 1e-12
    assert abs((k.residues * k.roots).sum() - 1.0) < 1e-12
    np.testing.assert_allclose(propagator(k, 0.0), np.eye(2), atol=1e-12)


def test_transform_matches_response_function():
    k = characteristic_roots(REF)
    s = np.array([0.3 + 1j, 2.0, -0.1 + 0.5j])
    chi = 0.001 * 100 / (s + 10.0)
    np.testing.assert_allclose(k.transform(s), 1 / (s**2 + 1.01 - chi),
                               rtol=1e-12)


def test_repeated_roots_are_perturbed_with_warning():
    # (s + 0.4)^2 (s + 0.2) is the denominator for these parameters
    spec = OscillatorSpec(np.sqrt(0.032), BathSpec(0.288, 1.0, 0.0))
    with pytest.warns(DegenerateRootsWarning):
        k = characteristic_roots(spec)
    assert np.all(np.isfinite(k.residues))
    t = np.linspace(0, 10, 11)
    x, p = memory_kernel_ode(spec.omega_r_sq, spec.bath, t, 0.0, 1.0)
    np.testing.assert_allclose(k.g(t), x, atol=1e-5)


def test_propagator_matches_memory_kernel_ode():
    k = characteristic_roots(REF)
    t = np.linspace(0, 50, 501)
    for x0, p0, cols in ((1.0, 0.0, 0), (0.0, 1.0, 1)):
        x, p = memory_kernel_ode(REF.omega_r_sq, REF.bath, t, x0, p0)
        G = propagator(k, t)
        np.testing.assert_allclose(G[:, 0, cols], x, atol=1e-8)
        np.testing.assert_allclose(G[:, 1, cols], p, atol=1e-8)


@given(st.floats(0.2, 3.0), st.floats(1e-4, 0.2), st.floats(1.0, 20.0))
def test_propagator_entries_are_real_and_satisfy_ode(w0, gamma, lam):
    spec = OscillatorSpec(w0, BathSpec(gamma, lam))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateRootsWarning)
        k = characteristic_roots(spec)
    t = np.linspace(0, 10, 41)
    ex = np.exp(np.multiply.outer(t, k.roots))
    assert np.abs((ex @ k.residues).imag).max() < 1e-12
    x, _ = memory_kernel_ode(spec.omega_r_sq, spec.bath, t, 0.0, 1.0)
    np.testing.assert_allclose(k.g(t), x, atol=1e-8)


def test_propagator_decays():
    k = characteristic_roots(REF)
    dets = [np.linalg.det(propagator(k, t)) for t in (1e4, 4e4)]
    # phase-space contraction at the slowest decay rate
    for t, d in zip((1e4, 4e4), dets):
        assert d == pytest.approx(np.exp(-2 * k.slowest_rate * t), rel=1e-2)
    assert dets[1] < 1e-16


# -- noise and evolution -----------------------------------------------------

def test_noise_trivial_cases():
    k = characteristic_roots(REF)
    assert np.array_equal(noise_covariance(REF, k, 0.0), np.zeros((2, 2)))
    kf = characteristic_roots(FREE)
    assert np.array_equal(noise_covariance(FREE, kf, 7.0), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        noise_covariance(REF, k, -1.0)


@pytest.mark.parametrize("T", [0.0, 0.5])
@pytest.mark.parametrize("t", [0.7, 5.0, 20.0])
def test_noise_contour_matches_direct_quadrature(T, t):
    spec = OscillatorSpec(1.0, BathSpec(0.001, 10.0, T))
    k = characteristic_roots(spec)
    a = noise_covariance(spec, k, t)
    b = noise_covariance(spec, k, t, method="direct")
    np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-13)


def test_noise_contour_matches_direct_quadrature_strong_coupling():
    spec = OscillatorSpec(1.0, BathSpec(0.1, 10.0, 0.3))
    k = characteristic_roots(spec)
    for t in (1.0, 8.0):
        np.testing.assert_allclose(noise_covariance(spec, k, t),
                                   noise_covariance(spec, k, t,
                                                    method="direct"),
                                   rtol=1e-8, atol=1e-13)


def test_long_time_noise_equals_steady_state():
    k = characteristic_roots(REF)
    t = 200 / k.slowest_rate
    late = noise_covariance(REF, k, t)
    ss = steady_covariance(REF).as_array()
    np.testing.assert_allclose(late, ss, rtol=1e-6, atol=1e-12)


def test_evolution_at_zero_time_is_identity():
    s0 = wave_packet(0.01)
    assert evolve_covariance(REF, s0, 0.0) is s0


def test_free_evolution_stays_pure():
    s0 = wave_packet(0.01)
    traj = evolve_trajectory(FREE, s0, np.linspace(0, 30, 61))
    assert np.abs(traj.det - 0.25).max() < 1e-12
    assert traj.entropy.max() < 1e-10
    assert traj.sxx.max() > 10          # the packet breathes


def test_means_follow_propagator():
    s0 = GaussianState(cov(0.5, 0.0, 0.5), (1.0, -0.5))
    k = characteristic_roots(REF)
    out = evolve_covariance(REF, s0, 3.0, k)
    np.testing.assert_allclose(out.mean, propagator(k, 3.0) @ [1.0, -0.5])


def test_entropy_rises_peaks_and_decays():
    t = np.concatenate([[0.0], np.geomspace(1, 30000, 200)])
    traj = evolve_trajectory(REF, wave_packet(0.01), t)
    i = int(np.argmax(traj.entropy))
    assert traj.entropy[0] < 1e-12
    assert 0 < i < len(t) - 1
    assert traj.entropy[i] > 1.0
    assert traj.entropy[-1] < 0.01


def test_matches_discretised_bath():
    times = np.linspace(0, 30, 31)
    s0 = wave_packet(0.01)
    ref, min_sym = discretized_bath_covariance(1.0, REF.bath,
                                               s0.cov.as_array(), times)
    k = characteristic_roots(REF)
    mine = np.array([evolve_covariance(REF, s0, t, k).cov.as_array()
                     for t in times])
    rel = np.abs(ref - mine).max(axis=(1, 2)) / np.abs(mine).max(axis=(1, 2))
    assert rel.max() < 1e-3
    assert min_sym == pytest.approx(0.5, abs=1e-9)


@given(st.floats(1e-4, 0.1), st.floats(1e-3, 2.0), st.floats(0, 1.0),
       st.floats(0.5, 3000))
def test_uncertainty_relation_along_evolution(gamma, delta, T, t):
    spec = OscillatorSpec(1.0, BathSpec(gamma, 10.0, T))
    out = evolve_covariance(spec, wave_packet(delta), t)
    assert out.cov.det >= 0.25 - 1e-9


# -- steady state ------------------------------------------------------------

def test_steady_state_properties():
    ss = steady_covariance(REF)
    assert ss.sxp == 0.0
    s = gaussian_entropy(ss)
    assert 0 < s < 0.01


def test_weak_coupling_steady_state_is_near_vacuum():
    ss = steady_covariance(OscillatorSpec(1.0, BathSpec(1e-5, 10.0, 0.0)))
    assert ss.sxx == pytest.approx(0.5, abs=1e-3)
    assert ss.spp == pytest.approx(0.5, abs=1e-3)


def test_steady_state_needs_coupling():
    with pytest.raises(ValueError):
        steady_covariance(FREE)


# -- states, entropy, fidelity ----------------------------------------------

def test_wave_packet():
    s = wave_packet(0.01)
    assert (s.cov.sxx, s.cov.sxp, s.cov.spp) == (0.01, 0.0, 25.0)
    assert ground_state(1.0).cov == cov(0.5, 0.0, 0.5)
    with pytest.raises(ValueError):
        wave_packet(0.0)


@given(st.floats(1e-6, 1e6))
def test_wave_packets_are_pure(delta):
    c = wave_packet(delta).cov
    assert c.det == pytest.approx(0.25, rel=1e-12)
    assert gaussian_entropy(c) < 1e-7


def test_symplectic_eigenvalue():
    assert symplectic_eigenvalue(cov(0.5, 0, 0.5)) == 0.5
    assert symplectic_eigenvalue(cov(1, 0, 1)) == 1.0


@given(st.floats(0.5, 10), st.floats(0.5, 10), st.floats(-1, 1))
def test_symplectic_eigenvalue_from_spectrum(a, c, r):
    b = r * np.sqrt(max(a * c - 0.25, 0.0))
    m = cov(a, b, c)
    omega = np.array([[0.0, 1.0], [-1.0, 0.0]])
    ev = np.abs(np.linalg.eigvals(m.as_array() @ omega))
    assert symplectic_eigenvalue(m) == pytest.approx(ev.max(), rel=1e-12)


def test_entropy_values():
    assert gaussian_entropy(cov(0.5, 0, 0.5)) == 0.0
    assert gaussian_entropy(cov(1, 0, 1), base=2) == pytest.approx(
        1.5 * np.log2(1.5) + 0.5, abs=1e-12)
    assert gaussian_entropy(cov(1, 0, 1), base=2) == pytest.approx(1.37744,
                                                                   abs=1e-5)


@given(st.floats(0.5, 5.0))
def test_entropy_matches_fock_basis(lam):
    assert gaussian_entropy(cov(lam, 0, lam)) == pytest.approx(
        fock_entropy(lam), abs=1e-8)


def test_fidelity_identity_and_far_limit():
    a = GaussianState(cov(1.3, 0.2, 0.9), (0.3, -0.1))
    assert gaussian_fidelity(a, a) == pytest.approx(1.0, abs=1e-12)
    far = GaussianState(a.cov, (100.0, 0.0))
    assert gaussian_fidelity(a, far) < 1e-100


@given(st.complex_numbers(max_magnitude=2.5), st.complex_numbers(
    max_magnitude=2.5))
def test_fidelity_of_coherent_states(alpha, beta):
    def state(z):
        return GaussianState(cov(0.5, 0, 0.5),
                             (np.sqrt(2) * z.real, np.sqrt(2) * z.imag))
    assert gaussian_fidelity(state(alpha), state(beta)) == pytest.approx(
        coherent_overlap(alpha, beta), abs=1e-10)


covs = st.builds(lambda a, c, r: cov(a, r * np.sqrt(a * c - 0.25), c),
                 st.floats(0.5, 5), st.floats(0.5, 5), st.floats(-0.99, 0.99))
means = st.tuples(st.floats(-2, 2), st.floats(-2, 2))


@given(covs, means, covs, means)
def test_fidelity_symmetric_and_bounded(c1, m1, c2, m2):
    a, b = GaussianState(c1, m1), GaussianState(c2, m2)
    f = gaussian_fidelity(a, b)
    assert 0 <= f <= 1
    assert f == pytest.approx(gaussian_fidelity(b, a), rel=1e-10)
