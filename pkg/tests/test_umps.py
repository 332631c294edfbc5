import numpy as np
import pytest
import scipy.integrate
import scipy.optimize

from kinkfield import mps, umps
from kinkfield.model import ModelSpec, local_operator


def exact_free_density(mu_sq):
    val, _ = scipy.integrate.quad(lambda p: np.sqrt(mu_sq + 4 * np.sin(p / 2) ** 2), -np.pi, np.pi,
                                  epsabs=1e-13, epsrel=1e-13)
    return val / (4 * np.pi)


def numeric_gradient(A, spec, h=1e-6):
    fd = np.zeros_like(A)
    for i in np.ndindex(A.shape):
        ap, am = A.copy(), A.copy()
        ap[i] += h
        am[i] -= h
        fd[i] = (umps.energy_and_gradient(ap, spec)[0] - umps.energy_and_gradient(am, spec)[0]) / (2 * h)
    return fd


@pytest.mark.parametrize("mu_sq,lam,chi", [(-0.5, 1.5, 3), (1.0, 0.0, 2), (-1.0, 2.0, 4)])
def test_gradient_matches_finite_differences(mu_sq, lam, chi):
    spec = ModelSpec(mu_sq, lam, 2, 4, "PBC")
    A = np.random.default_rng(3).standard_normal((4, chi, chi))
    _, g = umps.energy_and_gradient(A, spec)
    fd = numeric_gradient(A, spec)
    assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_normalisation_invariants():
    u = umps.random_umps(5, 4, seed=2)
    rl, rr = umps.fixed_point_residuals(u)
    assert rl < 1e-10 and rr < 1e-10
    assert np.sum(u.l * u.r) == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(umps.transfer_spectrum(u, 1))) == pytest.approx(1.0, abs=1e-12)


def test_energy_invariant_under_rescaling():
    spec = ModelSpec(-0.4, 1.0, 2, 5, "PBC")
    A = np.random.default_rng(4).standard_normal((5, 3, 3))
    e = umps.energy_density(umps.UniformMPS(A), spec)
    assert umps.energy_density(umps.UniformMPS(-3.7 * A), spec) == pytest.approx(e, abs=1e-12)


def test_energy_invariant_under_gauge():
    spec = ModelSpec(-0.4, 1.0, 2, 5, "PBC")
    rng = np.random.default_rng(5)
    A = rng.standard_normal((5, 3, 3))
    g = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    B = np.einsum("ab,nbc,cd->nad", g, A, np.linalg.inv(g))
    e = umps.energy_density(umps.UniformMPS(A), spec)
    assert umps.energy_density(umps.UniformMPS(B), spec) == pytest.approx(e, abs=1e-10)
    assert umps.field_expectation(umps.UniformMPS(B)) == pytest.approx(
        umps.field_expectation(umps.UniformMPS(A)), abs=1e-10)


def test_product_ansatz_reaches_single_mode_minimum():
    # at chi = 1 and lambda = 0 the best state is a Gaussian of frequency sqrt(mu^2 + 2)
    res = scipy.optimize.minimize_scalar(lambda w: 0.25 * (w + 3.0 / w), bounds=(0.1, 10), method="bounded",
                                         options={"xatol": 1e-12})
    out = umps.umps_minimize(ModelSpec(1.0, 0.0, 2, 24, "PBC"), 1, tol=1e-9)
    assert out.converged
    assert out.energy == pytest.approx(res.fun, abs=1e-6)


def test_symmetric_phase_field_vanishes():
    out = umps.umps_minimize(ModelSpec(1.0, 1.0, 2, 6, "PBC"), 3, tol=1e-9, seed=1)
    assert abs(out.phi) < 1e-6


def test_broken_phase_picks_a_branch_with_mirror_energy():
    spec = ModelSpec(-1.0, 2.0, 2, 8, "PBC")
    out = umps.umps_minimize(spec, 4, tol=1e-8, seed=2)
    assert abs(out.phi) > 0.3
    mirror = out.state.z2_image()
    assert umps.field_expectation(mirror) == pytest.approx(-out.phi, abs=1e-10)
    assert umps.energy_density(mirror, spec) == pytest.approx(out.energy, abs=1e-9)


@pytest.mark.slow
def test_free_energy_improves_with_chi():
    exact = exact_free_density(1.0)
    errs = []
    for chi in (2, 8):
        out = umps.umps_minimize(ModelSpec(1.0, 0.0, 2, 12, "PBC"), chi, tol=1e-8)
        errs.append(abs(out.energy - exact))
    assert errs[1] < errs[0]
    assert errs[1] < 1e-5


def test_minimize_is_deterministic():
    spec = ModelSpec(0.5, 1.0, 2, 5, "PBC")
    a = umps.umps_minimize(spec, 3, tol=1e-7, seed=7)
    b = umps.umps_minimize(spec, 3, tol=1e-7, seed=7)
    assert a.energy == b.energy and np.array_equal(a.A, b.A)


def test_product_state_has_no_correlations():
    A = np.zeros((4, 1, 1))
    A[:, 0, 0] = mps.coherent_state(4, 0.6)
    assert np.allclose(umps.umps_connected_two_point(umps.UniformMPS(A), 5), 0.0, atol=1e-15)


def test_correlator_matches_finite_ring_of_same_tensor():
    u = umps.umps_minimize(ModelSpec(0.3, 1.0, 2, 5, "PBC"), 4, tol=1e-8, seed=3).state
    ring = mps.FiniteMPS([u.A.copy() for _ in range(64)], "PBC")
    finite = mps.connected_two_point(ring, 8)
    assert np.allclose(umps.umps_connected_two_point(u, 8), finite, atol=1e-6)


def test_correlator_decays_at_a_transfer_eigenvalue():
    u = umps.umps_minimize(ModelSpec(1.0, 1.0, 2, 5, "PBC"), 4, tol=1e-9, seed=4).state
    g2 = umps.umps_connected_two_point(u, 61)
    rates = -np.log(np.abs(g2[40:61] / g2[39:60]))
    assert np.ptp(rates) < 1e-8
    mags = np.abs(umps.transfer_spectrum(u, 16)[1:])
    assert np.min(np.abs(-np.log(mags) - rates.mean())) < 1e-8


def test_correlation_length_from_spectrum():
    u = umps.umps_minimize(ModelSpec(1.0, 1.0, 2, 5, "PBC"), 4, tol=1e-9, seed=4).state
    vals = umps.transfer_spectrum(u, 2)
    assert umps.correlation_length(u) == pytest.approx(-1 / np.log(abs(vals[1])), rel=1e-12)


def test_expectation_of_identity_is_one():
    u = umps.random_umps(4, 3, seed=0)
    assert umps.expectation(u, np.eye(4)) == pytest.approx(1.0, abs=1e-12)
    assert umps.expectation(u, local_operator("phi_sq", 4)) > 0
