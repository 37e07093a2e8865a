"""Closed-form S^z S^z evolution of two equatorial spin coherent states.

This is the reference against which master-equation runs are compared. The
state stays a pure ``(N+1) x (N+1)`` coefficient matrix ``c[k1, k2]``, so its
negativity follows from singular values without any eigensolve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import comb

from .model import EffectiveParams, ModelParams, effective_params


def _binomial_amplitudes(N: int) -> np.ndarray:
    k = np.arange(N + 1)
    return np.sqrt(comb(N, k, exact=False)) / 2.0 ** (N / 2.0)


def _spin_z(N: int) -> np.ndarray:
    return N - 2.0 * np.arange(N + 1)


def ideal_evolve(
    N: int,
    omega_t: float,
    include_squeezing: bool = False,
    rotation_ratio: float = 0.0,
) -> np.ndarray:
    """Coefficients ``c[k1, k2]`` of the S^z S^z-evolved product state.

    The phase is ``exp(-i Ωt φ)`` with ``φ = m1 m2``, plus ``(m1² + m2²)/2``
    when ``include_squeezing`` and ``-(ω/Ω)(m1 + m2)`` for a nonzero
    ``rotation_ratio``. With all terms on this equals the complex conjugate
    of evolving under the effective Hamiltonian; see :func:`effective_evolve`
    for the forward-time state.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    amp = _binomial_amplitudes(N)
    m = _spin_z(N)
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    phi = m1 * m2
    if include_squeezing:
        phi = phi + 0.5 * (m1**2 + m2**2)
    if rotation_ratio:
        phi = phi - rotation_ratio * (m1 + m2)
    return np.outer(amp, amp) * np.exp(-1j * omega_t * phi)


def effective_evolve(params: ModelParams | EffectiveParams, N: int, t: float) -> np.ndarray:
    """``exp(-i H_eff t)`` applied to the initial product state, as ``c[k1, k2]``."""
    eff = params if isinstance(params, EffectiveParams) else effective_params(params, N)
    amp = _binomial_amplitudes(N)
    m = _spin_z(N)
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    energy = eff.omega * (m1 + m2) - eff.omega_big * (m1 * m2 + 0.5 * (m1**2 + m2**2))
    return np.outer(amp, amp) * np.exp(-1j * energy * t)


def pure_state_negativity(state: np.ndarray) -> float:
    """``2 log2(sum of Schmidt coefficients)`` of a normalised coefficient matrix."""
    sigma = np.linalg.svd(np.asarray(state), compute_uv=False)
    return float(2.0 * math.log2(sigma.sum()))


def ground_density_matrix(state: np.ndarray) -> np.ndarray:
    psi = np.asarray(state).ravel()
    return np.outer(psi, psi.conj())


def crevasse_curve(N: int, times, include_squeezing: bool = False) -> np.ndarray:
    """Ideal entanglement at each dimensionless time ``Ωt``."""
    return np.array(
        [pure_state_negativity(ideal_evolve(N, t, include_squeezing)) for t in np.asarray(times, dtype=float)]
    )


@dataclass(frozen=True)
class CharacteristicTimes:
    cnot_time: float  # π / (4N)
    macro_time: float  # 1 / sqrt(2N)
    macro_time_loose: float  # 1 / sqrt(N), the order-of-magnitude form


def characteristic_times(N: int) -> CharacteristicTimes:
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return CharacteristicTimes(
        cnot_time=math.pi / (4 * N),
        macro_time=1.0 / math.sqrt(2 * N),
        macro_time_loose=1.0 / math.sqrt(N),
    )


def interior_local_minima(values) -> np.ndarray:
    """Indices of strict interior local minima, treating flat runs as one point."""
    v = np.asarray(values, dtype=float)
    keep = np.concatenate([[True], np.diff(v) != 0])
    idx = np.flatnonzero(keep)
    w = v[idx]
    mins = np.flatnonzero((w[1:-1] < w[:-2]) & (w[1:-1] < w[2:])) + 1
    return idx[mins]


@dataclass(frozen=True)
class TimeScaleFit:
    scale: float
    rms: float
    max_abs: float


def fit_time_scale(
    omega_t,
    E_sim,
    N: int,
    bounds: tuple[float, float] = (0.5, 2.0),
    include_squeezing: bool = False,
) -> TimeScaleFit:
    """Single scalar ``s`` minimising ``sum (E_sim(Ωt) - E_ideal(s Ωt))**2``.

    A coarse grid over ``bounds`` picks the basin, then a bounded scalar
    minimiser refines it. ``max_abs`` is the largest pointwise mismatch at
    the fitted scale.
    """
    omega_t = np.asarray(omega_t, dtype=float)
    E_sim = np.asarray(E_sim, dtype=float)
    lo, hi = bounds

    def cost(s):
        diff = E_sim - crevasse_curve(N, s * omega_t, include_squeezing)
        return float(np.mean(diff**2))

    grid = np.linspace(lo, hi, 151)
    costs = [cost(s) for s in grid]
    i = int(np.argmin(costs))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(cost, bounds=(a, b), method="bounded", options={"xatol": 1e-8})
    s = float(res.x) if res.fun <= costs[i] else float(grid[i])
    diff = E_sim - crevasse_curve(N, s * omega_t, include_squeezing)
    return TimeScaleFit(scale=s, rms=float(np.sqrt(np.mean(diff**2))), max_abs=float(np.abs(diff).max()))
