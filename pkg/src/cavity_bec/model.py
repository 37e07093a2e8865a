"""Coherent Hamiltonians of the two-BEC cavity scheme and closed-form effective quantities.

Units: hbar = 1, energies and rates in units of the laser coupling ``g``
unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .fockspace import BasisTable, mode_operator, number_operator

STRATEGIES = ("constant", "sqrt", "linear")


@dataclass(frozen=True)
class ModelParams:
    g: float = 1.0
    G: float = 1.0
    delta_c: float = 10.0
    delta_l: float = 20.0
    gamma_s: float = 0.0
    gamma_c: float = 0.0

    def __post_init__(self):
        if not self.g >= 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if not self.G >= 0:
            raise ValueError(f"G must be non-negative, got {self.G}")
        if self.gamma_s < 0:
            raise ValueError(f"gamma_s must be >= 0, got {self.gamma_s}")
        if self.gamma_c < 0:
            raise ValueError(f"gamma_c must be >= 0, got {self.gamma_c}")

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "ModelParams":
        return ModelParams(**{**asdict(self), **changes})


@dataclass(frozen=True)
class EffectiveParams:
    omega: float  # single-spin rotation rate
    omega_big: float  # S^z S^z entangling rate


def _check_detunings(delta_c: float, delta_l: float):
    if delta_c == 0:
        raise ZeroDivisionError("cavity detuning delta_c must be non-zero")
    if delta_l == 0:
        raise ZeroDivisionError("laser detuning delta_l must be non-zero")


def hamiltonian_cavity(params: ModelParams, table: BasisTable) -> sp.csr_matrix:
    """``Δc c†c + Σ_i G (e_i† b_i c + h.c.)``."""
    c = mode_operator("c", table)
    H = params.delta_c * number_operator("c", table)
    for bec in "12":
        e = mode_operator("e" + bec, table)
        b = mode_operator("b" + bec, table)
        hop = params.G * (e.conj().T @ b @ c)
        H = H + hop + hop.conj().T
    return H.tocsr()


def hamiltonian_laser(params: ModelParams, table: BasisTable) -> sp.csr_matrix:
    """``Σ_i g (e_i† b_i + h.c.) + Δl e_i† e_i``."""
    dim = table.dimension
    H = sp.csr_matrix((dim, dim), dtype=complex)
    for bec in "12":
        e = mode_operator("e" + bec, table)
        b = mode_operator("b" + bec, table)
        hop = params.g * (e.conj().T @ b)
        H = H + hop + hop.conj().T + params.delta_l * number_operator("e" + bec, table)
    return H.tocsr()


def hamiltonian(params: ModelParams, table: BasisTable) -> sp.csr_matrix:
    return (hamiltonian_cavity(params, table) + hamiltonian_laser(params, table)).tocsr()


def fiber_matrix(nu: float, omega_f: float) -> np.ndarray:
    """One-excitation matrix of the fiber Hamiltonian over modes ``(p1, p, p2)``."""
    return np.array(
        [[omega_f, nu, 0.0], [nu, omega_f, nu], [0.0, nu, omega_f]], dtype=float
    )


def fiber_common_mode(nu: float, omega_f: float) -> tuple[np.ndarray, float]:
    """Dark eigenmode ``(p1 - p2)/sqrt(2)`` of the cavity-fiber-cavity chain.

    Returns the eigenvector over ``(p1, p, p2)`` and its eigenvalue, which is
    the bare mode energy regardless of ``nu``.
    """
    if nu == 0:
        raise ValueError("fiber coupling nu must be non-zero")
    M = fiber_matrix(nu, omega_f)
    vec = np.array([1.0, 0.0, -1.0]) / math.sqrt(2.0)
    value = float(vec @ M @ vec)
    residual = np.linalg.norm(M @ vec - value * vec)
    if residual > 1e-12 * max(1.0, abs(nu), abs(omega_f)):
        raise ArithmeticError(f"dark-mode residual {residual:.3e} exceeds 1e-12")
    return vec, value


def effective_params(
    params: ModelParams, N: int, interaction_factor: float = 1.0
) -> EffectiveParams:
    """Rotation rate ω and entangling rate Ω after adiabatic elimination.

    ``interaction_factor`` scales the fourth-order terms (both Ω and the
    N-dependent part of ω). The default 1 gives
    ``Ω = G² g² / (2 Δc Δl²)``; 2 gives the coefficient read directly off
    the adiabatically eliminated Hamiltonian before rewriting in spin form.
    """
    _check_detunings(params.delta_c, params.delta_l)
    g2, G2 = params.g**2, params.G**2
    dc, dl = params.delta_c, params.delta_l
    omega_big = interaction_factor * G2 * g2 / (2.0 * dc * dl**2)
    omega = g2 / (2.0 * dl) + interaction_factor * G2 * g2 * N / (dc * dl**2)
    return EffectiveParams(omega=omega, omega_big=omega_big)


def effective_hamiltonian(
    params: ModelParams | EffectiveParams, N: int
) -> np.ndarray:
    """Diagonal of the effective ground-manifold Hamiltonian, indexed ``k1*(N+1) + k2``.

    Entries are ``ω(m1 + m2) - Ω(m1 m2 + m1²/2 + m2²/2)`` with ``m_i = N - 2 k_i``.
    """
    eff = params if isinstance(params, EffectiveParams) else effective_params(params, N)
    m = N - 2 * np.arange(N + 1, dtype=float)
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    diag = eff.omega * (m1 + m2) - eff.omega_big * (m1 * m2 + 0.5 * m1**2 + 0.5 * m2**2)
    return diag.ravel()


def detuning_strategy(strategy: str, N: int, base: float) -> float:
    """Laser detuning for a given scaling strategy: ``base``, ``base*sqrt(N)`` or ``base*N``."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if strategy == "constant":
        return float(base)
    if strategy == "sqrt":
        return float(base) * math.sqrt(N)
    if strategy == "linear":
        return float(base) * N
    raise ValueError(f"unknown detuning strategy {strategy!r}; expected one of {STRATEGIES}")


def ac_stark_exact(k: int, g: float, delta_l: float) -> float:
    """Exact light shift of ``k`` b-atoms each dressed by the laser alone."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return 0.5 * k * (delta_l - math.sqrt(delta_l**2 + 4.0 * g**2))


def ac_stark_truncated(k: int, g: float, delta_l: float) -> float:
    """Ground-state shift when at most one atom may be excited.

    The laser couples the k-atom ground state to a single excitation with
    amplitude ``g sqrt(k)``, so the shift is no longer linear in ``k``.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return 0.5 * (delta_l - math.sqrt(delta_l**2 + 4.0 * g**2 * k))


def spurious_squeeze_coeffs(g: float, delta_l: float) -> tuple[float, float]:
    """Linear and quadratic coefficients of the truncation-induced spin terms."""
    if delta_l == 0:
        raise ZeroDivisionError("laser detuning delta_l must be non-zero")
    return g**2 / (2.0 * delta_l), g**4 / (4.0 * delta_l**3)
