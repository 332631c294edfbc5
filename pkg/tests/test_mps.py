from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinkfield import mps
from kinkfield.errors import UnsupportedGaugeError
from kinkfield.model import ModelSpec, local_operator
from kinkfield.mpo import build_hamiltonian_mpo, mpo_to_dense

BOUNDARIES = ["OBC", "PBC", "TPBC"]


def dense_local(v, op, x, L, d):
    mats = [np.eye(d)] * L
    mats[x] = op
    return v @ reduce(np.kron, mats) @ v / (v @ v)


def test_chi1_product_state_normalised():
    psi = mps.random_mps(ModelSpec(1.0, 1.0, 5, 2, "OBC"), 1)
    assert psi.chi == 1
    assert mps.overlap(psi, psi) == pytest.approx(1.0, abs=1e-13)


def test_random_mps_deterministic():
    spec = ModelSpec(1.0, 1.0, 5, 3, "PBC")
    a, b = mps.random_mps(spec, 4, seed=9), mps.random_mps(spec, 4, seed=9)
    assert all(np.array_equal(x, y) for x, y in zip(a.sites, b.sites))


def test_dense_round_trip():
    v = np.random.default_rng(0).standard_normal(16)
    psi = mps.from_dense(v, 2, 4, "OBC")
    assert max(psi.bond_dims) <= 4
    assert np.allclose(mps.to_dense(psi), v, atol=1e-12)


def test_left_canonical_input_unchanged():
    v = np.random.default_rng(1).standard_normal(32)
    psi = mps.from_dense(v, 2, 5, "OBC")
    again = mps.canonicalize(psi, "left")
    for a, b in zip(psi.sites, again.sites):
        assert np.allclose(np.abs(a), np.abs(b), atol=1e-12)


@pytest.mark.parametrize("gauge,center", [("left", None), ("right", None), ("mixed", 2)])
def test_canonical_forms_are_isometric_and_preserve_state(gauge, center):
    psi = mps.random_mps(ModelSpec(1.0, 1.0, 4, 2, "OBC"), 3, seed=3)
    v = mps.to_dense(psi)
    c = mps.canonicalize(psi, gauge, center)
    ctr = c.center
    for x in range(c.L):
        if x < ctr:
            assert mps.is_left_isometric(c.sites[x])
        elif x > ctr:
            assert mps.is_right_isometric(c.sites[x])
    assert np.allclose(mps.to_dense(c), v, atol=1e-10)


def test_traced_state_cannot_be_gauge_fixed():
    with pytest.raises(UnsupportedGaugeError):
        mps.canonicalize(mps.random_mps(ModelSpec(1.0, 1.0, 4, 2, "PBC"), 2), "left")


@pytest.mark.parametrize("boundary", BOUNDARIES)
def test_overlap_matches_dense(boundary):
    spec = ModelSpec(1.0, 1.0, 5, 2, boundary)
    a, b = mps.random_mps(spec, 3, seed=1), mps.random_mps(spec, 3, seed=2)
    ref = mps.to_dense(a) @ mps.to_dense(b)
    assert mps.overlap(a, b) == pytest.approx(ref, abs=1e-12)
    assert mps.overlap_right_to_left(a, b) == pytest.approx(ref, abs=1e-12)


def test_orthogonal_product_states():
    e0, e1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    a = mps.product_mps([e0, e0, e0], "OBC")
    b = mps.product_mps([e0, e1, e0], "OBC")
    assert mps.overlap(a, b) == 0.0


def test_long_chain_norm_without_overflow():
    psi = mps.random_mps(ModelSpec(1.0, 1.0, 400, 3, "PBC"), 4, seed=0)
    psi.sites = [m * 3.0 for m in psi.sites]
    sign, logv = mps.log_overlap(psi, psi)
    assert sign == 1.0
    assert logv == pytest.approx(400 * 2 * np.log(3.0), rel=1e-10)


@pytest.mark.parametrize("boundary", BOUNDARIES)
def test_energy_matches_dense_quadratic_form(boundary):
    spec = ModelSpec(-0.4, 1.1, 4, 3, boundary)
    psi = mps.random_mps(spec, 3, seed=4)
    v = mps.to_dense(psi)
    H = mpo_to_dense(build_hamiltonian_mpo(spec))
    mpo = build_hamiltonian_mpo(spec)
    assert mps.expectation(psi, mpo) == pytest.approx(v @ H @ v / (v @ v), abs=1e-10)
    assert mps.expectation_right_to_left(psi, mpo) == pytest.approx(v @ H @ v / (v @ v), abs=1e-10)


def test_excited_site_expectations():
    e0, e1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    psi = mps.product_mps([e0, e1, e0], "OBC")
    phi = mps.site_expectations(psi, local_operator("phi", 2))
    phi_sq = mps.site_expectations(psi, np.diag([0.5, 1.5]))
    assert phi[1] == 0.0
    assert phi_sq[1] == pytest.approx(1.5)


@pytest.mark.parametrize("boundary", BOUNDARIES)
def test_site_expectations_match_dense(boundary):
    spec = ModelSpec(1.0, 1.0, 4, 3, boundary)
    psi = mps.random_mps(spec, 3, seed=6)
    v = mps.to_dense(psi)
    phi = local_operator("phi", 3)
    got = mps.site_expectations(psi, phi)
    ref = [dense_local(v, phi, x, 4, 3) for x in range(4)]
    assert np.allclose(got, ref, atol=1e-12)


def test_product_state_has_no_connected_correlations():
    psi = mps.product_mps([mps.coherent_state(4, 0.7)] * 6, "PBC")
    assert np.allclose(mps.connected_two_point(psi, 3), 0.0, atol=1e-14)


def test_pbc_two_point_is_reflection_symmetric():
    psi = mps.random_mps(ModelSpec(1.0, 1.0, 6, 2, "PBC"), 3, seed=8)
    g2 = mps.connected_two_point(psi, 5)
    assert np.allclose(g2, g2[::-1], atol=1e-12)


def test_product_state_entropy_zero():
    psi = mps.product_mps([np.array([0.6, 0.8])] * 4, "OBC")
    assert mps.entanglement_entropy(psi, 2) == pytest.approx(0.0, abs=1e-14)


def test_bell_pair_entropy():
    v = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
    psi = mps.from_dense(v, 2, 2, "OBC")
    assert mps.entanglement_entropy(psi, 1) == pytest.approx(np.log(2), abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 6), st.integers(0, 1000))
def test_entropy_bounded_by_log_chi(chi, seed):
    psi = mps.random_mps(ModelSpec(1.0, 1.0, 6, 3, "OBC"), chi, seed=seed)
    for bond in range(1, 6):
        assert mps.entanglement_entropy(psi, bond) <= np.log(psi.sites[bond].shape[1]) + 1e-12


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(BOUNDARIES), st.integers(1, 4), st.integers(0, 1000))
def test_observables_gauge_invariant(boundary, bond, seed):
    spec = ModelSpec(0.3, 0.8, 5, 2, boundary)
    psi = mps.random_mps(spec, 3, seed=seed)
    if psi.sites[bond].shape[1] < 2:
        return
    rng = np.random.default_rng(seed)
    k = psi.sites[bond].shape[1]
    g = rng.standard_normal((k, k)) + 3 * np.eye(k)
    moved = mps.apply_gauge(psi, bond, g)
    mpo = build_hamiltonian_mpo(spec)
    phi = local_operator("phi", 2)
    assert mps.expectation(moved, mpo) == pytest.approx(mps.expectation(psi, mpo), abs=1e-9)
    assert np.allclose(mps.site_expectations(moved, phi), mps.site_expectations(psi, phi), atol=1e-9)
    assert np.allclose(mps.connected_two_point(moved, 2), mps.connected_two_point(psi, 2), atol=1e-9)


def test_closing_bond_gauge_in_tpbc():
    spec = ModelSpec(0.3, 0.8, 4, 2, "TPBC")
    psi = mps.random_mps(spec, 3, seed=2)
    g = np.random.default_rng(0).standard_normal((3, 3)) + 3 * np.eye(3)
    moved = mps.apply_gauge(psi, 0, g)
    mpo = build_hamiltonian_mpo(spec)
    assert mps.expectation(moved, mpo) == pytest.approx(mps.expectation(psi, mpo), abs=1e-9)
