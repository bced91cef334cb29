import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from otoclab.spinchain import (Eigensystem, SpinChainModel, arrival_time, build_hamiltonian,
                               butterfly_cone, chain_otoc, chain_otoc_curves, cone_from_curves,
                               diagonalize, disorder_rng, full_hamiltonian, sector_basis,
                               short_time_prediction, sigma_z_sector)


def model_with(fields, n_up, J=1.0):
    h = max(abs(x) for x in fields) if any(fields) else 0.0
    return SpinChainModel(len(fields), n_up, h, tuple(fields), J=J)


def dense_pauli_z(L, site):
    """sigma^z_site on 2^L states labelled by integers with bit i = site i up."""
    states = np.arange(1 << L)
    return np.diag(np.where((states >> site) & 1, 1.0, -1.0))


def dense_chain_hamiltonian(fields, J=1.0):
    """Independent construction via explicit spin flips on the full 2^L space."""
    L = len(fields)
    H = np.zeros((1 << L, 1 << L))
    for s in range(1 << L):
        z = [1 if (s >> i) & 1 else -1 for i in range(L)]
        H[s, s] = sum(0.25 * J * z[i] * z[i + 1] for i in range(L - 1)) \
            + sum(0.5 * fields[i] * z[i] for i in range(L))
        for i in range(L - 1):
            if z[i] != z[i + 1]:
                H[s ^ (0b11 << i), s] += 0.5 * J
    return H


def test_two_site_hamiltonian():
    H = build_hamiltonian(model_with((0.0, 0.0), 1))
    np.testing.assert_allclose(H, [[-0.25, 0.5], [0.5, -0.25]], atol=1e-15)


def test_hamiltonian_hermitian():
    H = build_hamiltonian(SpinChainModel.random(8, 4, 2.0, seed=1))
    assert np.max(np.abs(H - H.T)) < 1e-14


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_sectors_reassemble_dense_hamiltonian(L):
    fields = tuple(disorder_rng(L, 0).uniform(-1.5, 1.5, L))
    dense = dense_chain_hamiltonian(fields)
    assembled = np.zeros_like(dense)
    for n_up in range(L + 1):
        basis = sector_basis(L, n_up)
        assembled[np.ix_(basis, basis)] = build_hamiltonian(model_with(fields, n_up))
    assert np.max(np.abs(assembled - dense)) < 1e-13


def test_kron_construction_matches_flip_construction():
    fields = (0.3, -0.7, 0.1, 0.9)
    np.testing.assert_allclose(full_hamiltonian(model_with(fields, 2)),
                               dense_chain_hamiltonian(fields), atol=1e-13)


def test_zero_field_conserves_magnetization():
    H = full_hamiltonian(model_with((0.0,) * 4, 2))
    Sz = sum(dense_pauli_z(4, i) for i in range(4)) / 2
    assert np.max(np.abs(H @ Sz - Sz @ H)) < 1e-13


def test_sigma_z_examples():
    m = model_with((0.0, 0.0), 1)
    np.testing.assert_array_equal(sigma_z_sector(m, 0), np.diag([1.0, -1.0]))
    m = SpinChainModel.random(6, 3, 1.0, seed=0)
    for site in range(6):
        Z = sigma_z_sector(m, site)
        np.testing.assert_array_equal(Z @ Z, np.eye(m.dim))
        assert np.trace(Z) == 0
    with pytest.raises(IndexError):
        sigma_z_sector(m, 6)


def test_model_validation():
    with pytest.raises(ValueError):
        SpinChainModel.random(4, 5, 1.0, seed=0)
    with pytest.raises(ValueError):
        SpinChainModel(3, 1, 0.5, (0.1, 0.9, 0.0))
    with pytest.raises(ValueError):
        sector_basis(3, -1)


@given(st.integers(2, 12), st.floats(0, 10), st.integers(0, 2**32 - 1), st.integers(0, 100))
@settings(max_examples=50, deadline=None)
def test_disorder_reproducible_and_bounded(L, h, seed, r):
    a = SpinChainModel.random(L, L // 2, h, seed, r)
    b = SpinChainModel.random(L, L // 2, h, seed, r)
    assert a.fields == b.fields
    assert all(abs(x) <= h for x in a.fields)
    assert a.dim == math.comb(L, L // 2)


def test_realizations_differ():
    a = SpinChainModel.random(9, 5, 1.0, 7, 0)
    b = SpinChainModel.random(9, 5, 1.0, 7, 1)
    assert a.fields != b.fields


def test_eigen_round_trip():
    H = build_hamiltonian(SpinChainModel.random(9, 5, 1.0, seed=3))
    eig = diagonalize(H)
    rebuilt = (eig.vectors * eig.energies) @ eig.vectors.T
    assert np.max(np.abs(rebuilt - H)) < 1e-11 * np.max(np.abs(H))


def test_otoc_zero_at_t0():
    m = SpinChainModel.random(7, 3, 1.0, seed=2)
    for l in range(1, 7):
        assert abs(chain_otoc(m, l, [0.0]).C[0]) < 1e-12


def test_otoc_full_space_oracle_l4():
    m = SpinChainModel.random(4, 2, 1.3, seed=11)
    Hf = dense_chain_hamiltonian(m.fields)
    basis = sector_basis(4, 2)
    t_grid = np.linspace(0, 5, 11)
    for l in (1, 2, 3):
        s = chain_otoc(m, l, t_grid)
        Z0, Zl = dense_pauli_z(4, 0), dense_pauli_z(4, l)
        for k, t in enumerate(t_grid):
            Ut = expm(-1j * Hf * t)
            Z0t = Ut.conj().T @ Z0 @ Ut
            prod = (Z0t @ Zl @ Z0t @ Zl)[np.ix_(basis, basis)]
            C_ref = 1 - np.trace(prod).real / basis.size
            assert abs(s.C[k] - C_ref) < 1e-12


def test_otoc_real_bounded_and_components():
    m = SpinChainModel.random(8, 4, 0.7, seed=5)
    s = chain_otoc(m, 2, np.linspace(0, 30, 61))
    assert np.all(s.C > -1e-10) and np.all(s.C < 2 + 1e-10)
    assert np.max(np.abs(s.F.imag)) < 1e-10
    np.testing.assert_array_equal(s.D, 0.5)
    np.testing.assert_array_equal(s.I, 0.5)
    assert s.decomposition_error() < 1e-10


def test_otoc_independent_of_eigenvector_phases():
    m = SpinChainModel.random(7, 3, 1.0, seed=9)
    eig = diagonalize(build_hamiltonian(m))
    rng = np.random.default_rng(0)
    phases = np.exp(2j * np.pi * rng.random(eig.energies.size))
    twisted = Eigensystem(eig.energies, eig.vectors * phases[None, :])
    t = np.linspace(0, 10, 21)
    np.testing.assert_allclose(chain_otoc(m, 2, t, twisted).C, chain_otoc(m, 2, t, eig).C,
                               atol=1e-12)


def test_multi_separation_matches_single():
    m = SpinChainModel.random(7, 4, 2.0, seed=4)
    t = np.linspace(0, 8, 17)
    F = chain_otoc_curves(m, [1, 3, 5], t)
    for l in (1, 3, 5):
        np.testing.assert_allclose(1 - F[l], chain_otoc(m, l, t).C, atol=1e-13)


def test_otoc_separation_range():
    m = SpinChainModel.random(5, 2, 1.0, seed=0)
    with pytest.raises(IndexError):
        chain_otoc(m, 0, [0.0])
    with pytest.raises(IndexError):
        chain_otoc(m, 5, [0.0])


def test_short_time_prediction_examples():
    assert short_time_prediction(1, 0.1) == pytest.approx(0.005)
    assert short_time_prediction(2, 0.1) == pytest.approx(1.25e-5)
    assert short_time_prediction(3, 0.0) == 0.0
    with pytest.raises(ValueError):
        short_time_prediction(0, 0.1)


def test_short_time_slope_l1():
    t = np.linspace(0.02, 0.3, 15)
    Cs = [chain_otoc(SpinChainModel.random(9, 5, 1.0, 7, r), 1, t).C for r in range(5)]
    slope = np.polyfit(np.log(t), np.log(np.mean(Cs, axis=0)), 1)[0]
    assert abs(slope - 2) / 2 < 0.02


def test_leading_coefficient_full_space():
    # exact second-order term for l = 1 over the full space: C ~ t^2 (sum over random fields cancels)
    fields = (0.4, -0.2, 0.9, -0.6, 0.1, 0.3)
    H = dense_chain_hamiltonian(fields)
    Z0, Z1 = dense_pauli_z(6, 0), dense_pauli_z(6, 1)
    t = 1e-3
    Ut = expm(-1j * H * t)
    Z0t = Ut.conj().T @ Z0 @ Ut
    C = 1 - np.trace(Z0t @ Z1 @ Z0t @ Z1).real / 64
    assert C / t**2 == pytest.approx(1.0, rel=1e-4)


# ---------------------------------------------------------------- cones


def test_cone_strictly_increasing_ergodic():
    rep = butterfly_cone(SpinChainModel.random(9, 5, 0.5, seed=7), np.linspace(0, 20, 401), 0.5)
    times = [rep.arrival[l] for l in sorted(rep.arrival)]
    assert all(t is not None for t in times)
    assert all(b > a for a, b in zip(times, times[1:]))
    assert rep.monotone and rep.velocity > 0


def test_cone_decoupled_chain_has_no_crossings():
    m = SpinChainModel(6, 3, 0.0, (0.0,) * 6, J=0.0)
    rep = butterfly_cone(m, np.linspace(0, 10, 51), 0.5)
    assert all(v is None for v in rep.arrival.values())
    assert rep.velocity is None


def test_cone_synthetic_step_front():
    t = np.linspace(0, 10, 1001)
    curves = {l: (t >= l).astype(float) for l in range(1, 8)}
    rep = cone_from_curves(t, curves, 0.5)
    assert rep.velocity == pytest.approx(1.0, abs=1e-6)


def test_cone_single_crossing_has_no_velocity():
    t = np.linspace(0, 3, 31)
    rep = cone_from_curves(t, {1: (t >= 1).astype(float), 2: np.zeros_like(t)}, 0.5)
    assert rep.arrival[2] is None and rep.velocity is None


def test_arrival_interpolation_and_threshold_validation():
    assert arrival_time([0, 1, 2], [0.0, 0.2, 0.6], 0.4) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        cone_from_curves([0, 1], {1: [0, 1]}, 1.0)
