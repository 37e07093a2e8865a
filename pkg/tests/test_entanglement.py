import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from cavity_bec.dynamics import initial_state
from cavity_bec.entanglement import (
    delta_E,
    hermitian_eigenvalues,
    log_negativity,
    max_entanglement,
    maximally_entangled_state,
    partial_trace_ground,
    partial_transpose,
)
from cavity_bec.fockspace import BasisState
from cavity_bec.oracle import ground_density_matrix, pure_state_negativity
from conftest import random_density

BELL = ground_density_matrix(np.eye(2) / math.sqrt(2))


def random_pure_coefficients(d, rng):
    c = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return c / np.linalg.norm(c)


def test_partial_trace_of_initial_state(basis):
    table = basis(2)
    rho_g = partial_trace_ground(initial_state(2, table), table)
    assert np.trace(rho_g).real == pytest.approx(1.0)
    amp = np.sqrt([1, 2, 1]) / 2
    psi = np.outer(amp, amp).ravel()
    assert np.allclose(rho_g, np.outer(psi, psi))


def test_partial_trace_excited_support(basis):
    table = basis(1)
    rho = np.zeros((table.dimension,) * 2, dtype=complex)
    states = [s for s in table.states if s.n1 == 1]
    for s in states:
        i = table.index[s]
        rho[i, i] = 1.0 / len(states)
    rho_g = partial_trace_ground(rho, table)
    assert np.trace(rho_g).real == pytest.approx(1.0)
    diag = np.real(np.diag(rho_g)).reshape(2, 2)
    assert np.allclose(diag[1], 0)


@given(st.integers(1, 3), st.integers(0, 2**16))
@settings(max_examples=10, deadline=None)
def test_partial_trace_preserves_trace(N, seed):
    from cavity_bec.fockspace import TruncationSpec, build_basis

    table = build_basis(TruncationSpec(N))
    rho = random_density(table.dimension, rank=3, rng=np.random.default_rng(seed))
    assert np.trace(partial_trace_ground(rho, table)) == pytest.approx(np.trace(rho))


def test_partial_trace_traces_out_photon_coherences(basis):
    # a ground/photon superposition leaves no off-diagonal trace
    table = basis(1)
    i = table.index[BasisState(0, 0, 0, 0, 0)]
    j = table.index[BasisState(0, 0, 0, 0, 1)]
    rho = np.zeros((table.dimension,) * 2, dtype=complex)
    rho[i, i] = rho[j, j] = rho[i, j] = rho[j, i] = 0.5
    rho_g = partial_trace_ground(rho, table)
    assert rho_g[0, 0] == pytest.approx(1.0)
    assert np.count_nonzero(np.abs(rho_g) > 1e-15) == 1


def test_partial_transpose_examples():
    assert np.allclose(partial_transpose(np.eye(4)), np.eye(4))
    ev = np.sort(hermitian_eigenvalues(partial_transpose(BELL)))
    assert np.allclose(ev, [-0.5, 0.5, 0.5, 0.5])
    rng = np.random.default_rng(1)
    A, B = random_density(3, rng=rng), random_density(3, rng=rng)
    assert np.allclose(partial_transpose(np.kron(A, B)), np.kron(A.T, B))
    assert np.allclose(partial_transpose(np.kron(A, B), 2), np.kron(A, B.T))
    with pytest.raises(ValueError):
        partial_transpose(np.eye(5))
    with pytest.raises(ValueError):
        partial_transpose(np.eye(4), subsystem=3)


def test_hermitian_eigenvalues_examples():
    assert np.allclose(hermitian_eigenvalues(np.diag([3.0, -1.0, 2.0])), [-1, 2, 3])
    assert np.allclose(hermitian_eigenvalues(np.array([[0, 1], [1, 0]])), [-1, 1])
    rng = np.random.default_rng(2)
    X = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    H = X + X.conj().T
    assert hermitian_eigenvalues(H).sum() == pytest.approx(np.trace(H).real, abs=1e-10)
    with pytest.raises(ValueError, match="Hermitian"):
        hermitian_eigenvalues(np.array([[0, 1], [0, 0]]))


def test_log_negativity_examples():
    assert log_negativity(BELL) == pytest.approx(1.0, abs=1e-12)
    assert log_negativity(maximally_entangled_state(3)) == pytest.approx(2.0, abs=1e-12)
    rng = np.random.default_rng(3)
    product = np.kron(random_density(4, rng=rng), random_density(4, rng=rng))
    assert abs(log_negativity(product)) < 1e-12


@pytest.mark.parametrize("N, value", [(1, 1.0), (7, 3.0), (8, math.log2(9))])
def test_max_entanglement(N, value):
    assert max_entanglement(N) == pytest.approx(value)


def test_delta_E_examples():
    assert delta_E(1.3, 1.3, 4) == 0
    assert delta_E(max_entanglement(5), 0.0, 5) == pytest.approx(1.0)
    e_max = max_entanglement(6)
    assert delta_E(0.5 * e_max, 0.3 * e_max, 6) == pytest.approx(0.2)


@given(st.integers(1, 6), st.integers(0, 2**16))
@settings(max_examples=25, deadline=None)
def test_swap_symmetry_and_pure_state_agreement(N, seed):
    rng = np.random.default_rng(seed)
    c = random_pure_coefficients(N + 1, rng)
    rho = ground_density_matrix(c)
    E1 = log_negativity(rho, 1)
    assert log_negativity(rho, 2) == pytest.approx(E1, abs=1e-9)
    assert pure_state_negativity(c) == pytest.approx(E1, abs=1e-9)


@given(st.integers(1, 5), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**16))
@settings(max_examples=25, deadline=None)
def test_local_spin_rotation_invariance(N, th1, th2, seed):
    rng = np.random.default_rng(seed)
    rho = random_density((N + 1) ** 2, rank=2, rng=rng)
    m = N - 2 * np.arange(N + 1)
    U = np.kron(np.diag(np.exp(-1j * th1 * m)), np.diag(np.exp(-1j * th2 * m)))
    assert log_negativity(U @ rho @ U.conj().T) == pytest.approx(log_negativity(rho), abs=1e-9)


def test_general_local_unitary_invariance():
    rng = np.random.default_rng(4)
    rho = random_density(16, rank=3, rng=rng)
    X = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    U = np.kron(expm(1j * (X + X.conj().T)), np.eye(4))
    assert log_negativity(U @ rho @ U.conj().T) == pytest.approx(log_negativity(rho), abs=1e-9)


def test_unnormalised_input_is_not_renormalised():
    assert log_negativity(0.5 * BELL) == pytest.approx(math.log2(0.5 * 2.0))
