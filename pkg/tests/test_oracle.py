import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavity_bec.entanglement import log_negativity, max_entanglement
from cavity_bec.model import EffectiveParams, ModelParams, effective_hamiltonian
from cavity_bec.oracle import (
    characteristic_times,
    crevasse_curve,
    effective_evolve,
    fit_time_scale,
    ground_density_matrix,
    ideal_evolve,
    interior_local_minima,
    pure_state_negativity,
)


@given(st.integers(1, 10), st.floats(0, 10), st.booleans())
@settings(max_examples=30, deadline=None)
def test_ideal_evolve_is_normalised(N, wt, squeeze):
    c = ideal_evolve(N, wt, squeeze)
    assert c.shape == (N + 1, N + 1)
    assert np.sum(np.abs(c) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_ideal_evolve_examples():
    assert pure_state_negativity(ideal_evolve(3, 0.0)) == pytest.approx(0.0, abs=1e-12)
    assert pure_state_negativity(ideal_evolve(1, math.pi / 4)) == pytest.approx(1.0, abs=1e-12)
    for N in (1, 2, 4, 8):
        assert pure_state_negativity(ideal_evolve(N, math.pi / 2)) <= 1e-9


def test_ideal_evolve_coefficients():
    N, wt = 3, 0.37
    c = ideal_evolve(N, wt)
    k = np.arange(N + 1)
    m = N - 2 * k
    amp = np.sqrt([math.comb(N, int(i)) for i in k])
    expected = np.outer(amp, amp) / 2**N * np.exp(-1j * wt * np.outer(m, m))
    assert np.allclose(c, expected)


def test_pure_state_negativity_examples():
    assert pure_state_negativity(np.eye(2) / math.sqrt(2)) == pytest.approx(1.0)
    assert pure_state_negativity(np.outer([0.6, 0.8], [1, 0])) == pytest.approx(0.0, abs=1e-12)
    assert pure_state_negativity(np.eye(4) / 2) == pytest.approx(2.0)


def test_squeezing_and_rotation_are_local():
    for N in (2, 5):
        for wt in (0.1, 0.5, 1.1):
            base = pure_state_negativity(ideal_evolve(N, wt))
            rot = pure_state_negativity(ideal_evolve(N, wt, rotation_ratio=3.7))
            assert rot == pytest.approx(base, abs=1e-10)


def test_effective_evolve_matches_effective_hamiltonian():
    eff = EffectiveParams(omega=0.2, omega_big=0.05)
    N, t = 3, 4.0
    c = effective_evolve(eff, N, t)
    psi0 = ideal_evolve(N, 0.0).ravel()
    expected = np.exp(-1j * effective_hamiltonian(eff, N) * t) * psi0
    assert np.allclose(c.ravel(), expected)
    # the oracle with all terms on is its complex conjugate
    conj = ideal_evolve(N, eff.omega_big * t, True, eff.omega / eff.omega_big)
    assert np.allclose(conj, c.conj())


def test_effective_evolve_accepts_model_params():
    p = ModelParams(delta_c=5.0, delta_l=12.0)
    c = effective_evolve(p, 2, 30.0)
    assert np.sum(np.abs(c) ** 2) == pytest.approx(1.0)


def test_crevasse_properties():
    times = np.linspace(0, math.pi / 2, 801)
    for N in (1, 2, 4, 8):
        E = crevasse_curve(N, times)
        assert abs(E[0]) < 1e-12
        assert E[-1] <= 1e-9
        assert E.max() <= max_entanglement(N) + 1e-12
    E8 = crevasse_curve(8, times)
    assert len(interior_local_minima(E8)) >= 3
    assert crevasse_curve(8, [math.pi / 2])[0] < 1e-6


def test_crevasse_period_and_symmetry():
    times = np.linspace(0, math.pi, 201)
    for N in (2, 4, 6):
        E = crevasse_curve(N, times)
        assert np.allclose(E, E[::-1], atol=1e-9)
    t = np.linspace(0, 1.3, 17)
    assert np.allclose(crevasse_curve(3, t), crevasse_curve(3, t + math.pi), atol=1e-9)


def test_macro_time_entanglement_is_order_of_maximal():
    # with S^z eigenvalues N - 2k the N=8 value is 0.781; it falls slowly with N
    ratios = [
        crevasse_curve(N, [characteristic_times(N).macro_time])[0] / max_entanglement(N)
        for N in (8, 16, 32)
    ]
    assert ratios[0] == pytest.approx(0.7809, abs=1e-4)
    assert ratios[0] > ratios[1] > ratios[2] > 0.5


def test_pure_vs_density_negativity():
    rng = np.random.default_rng(5)
    for _ in range(20):
        N = int(rng.integers(1, 7))
        c = rng.normal(size=(N + 1, N + 1)) + 1j * rng.normal(size=(N + 1, N + 1))
        c /= np.linalg.norm(c)
        assert pure_state_negativity(c) == pytest.approx(log_negativity(ground_density_matrix(c)), abs=1e-9)


@pytest.mark.parametrize(
    "N, cnot, macro",
    [(1, math.pi / 4, 1 / math.sqrt(2)), (8, math.pi / 32, 0.25), (1000, 7.854e-4, 0.02236)],
)
def test_characteristic_times(N, cnot, macro):
    ct = characteristic_times(N)
    assert ct.cnot_time == pytest.approx(cnot, rel=1e-4)
    assert ct.macro_time == pytest.approx(macro, rel=1e-4)
    assert ct.macro_time_loose == pytest.approx(1 / math.sqrt(N))


def test_interior_local_minima():
    assert list(interior_local_minima([3, 1, 2, 0, 0, 1, 5])) == [1, 3]
    assert len(interior_local_minima([1, 2, 3])) == 0


@pytest.mark.parametrize("scale", [0.8, 1.0, 1.37])
def test_fit_time_scale_recovers_known_scale(scale):
    N = 3
    times = np.linspace(0, 1.0, 60)
    E = crevasse_curve(N, scale * times)
    fit = fit_time_scale(times, E, N)
    assert fit.scale == pytest.approx(scale, abs=1e-5)
    assert fit.max_abs < 1e-6
