"""Logarithmic negativity between the two BECs."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .fockspace import BasisTable


@lru_cache(maxsize=32)
def _trace_layout(table: BasisTable):
    # For each (n1, n2, l) sector: flat ground index k1*(N+1)+k2 and basis index.
    d = table.N + 1
    occ = table.occupations
    sectors = {}
    for i, (k1, n1, k2, n2, l) in enumerate(occ):
        sectors.setdefault((n1, n2, l), ([], []))
        flat, idx = sectors[(n1, n2, l)]
        flat.append(k1 * d + k2)
        idx.append(i)
    return tuple((np.array(f), np.array(i)) for f, i in sectors.values())


def partial_trace_ground(rho: np.ndarray, table: BasisTable) -> np.ndarray:
    """Trace out excited atoms and photons, leaving a matrix over ``(k1, k2)``.

    The result is indexed by ``k1*(N+1) + k2`` and has dimension ``(N+1)**2``.
    """
    rho = np.asarray(rho)
    if rho.shape != (table.dimension, table.dimension):
        raise ValueError(
            f"rho has shape {rho.shape}, basis dimension is {table.dimension}"
        )
    d = table.N + 1
    out = np.zeros((d * d, d * d), dtype=complex)
    for flat, idx in _trace_layout(table):
        out[np.ix_(flat, flat)] += rho[np.ix_(idx, idx)]
    return out


def partial_transpose(rho_g: np.ndarray, subsystem: int = 1) -> np.ndarray:
    """Transpose the indices of one BEC in a ``(k1, k2)``-indexed matrix."""
    rho_g = np.asarray(rho_g)
    D = rho_g.shape[0]
    d = math.isqrt(D)
    if rho_g.shape != (D, D) or d * d != D:
        raise ValueError(f"expected a square matrix over (N+1)^2 indices, got {rho_g.shape}")
    t = rho_g.reshape(d, d, d, d)
    if subsystem == 1:
        t = t.transpose(2, 1, 0, 3)
    elif subsystem == 2:
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValueError(f"subsystem must be 1 or 2, got {subsystem!r}")
    return t.reshape(D, D)


def hermitian_eigenvalues(M: np.ndarray, check: bool = True) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix (LAPACK ``heevd`` via numpy).

    With ``check`` the eigenpairs are verified against
    ``||Mv - λv|| <= 1e-9 ||M||``.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = max(np.abs(M).max(initial=0.0), 1.0)
    asym = np.abs(M - M.conj().T).max(initial=0.0)
    if asym > 1e-10 * scale:
        raise ValueError(f"matrix is not Hermitian (max |M - M^H| = {asym:.3e})")
    if not check:
        return np.linalg.eigvalsh(M)
    values, vectors = np.linalg.eigh(M)
    residual = np.linalg.norm(M @ vectors - vectors * values, axis=0)
    norm = np.linalg.norm(M, 2) if M.size else 0.0
    if np.any(residual > 1e-9 * max(norm, 1e-300)):
        raise ArithmeticError(f"eigenpair residual {residual.max():.3e} too large")
    return values


def log_negativity(rho_g: np.ndarray, subsystem: int = 1) -> float:
    """``log2`` of the trace norm of the partial transpose.

    The matrix is used as given, without renormalising its trace. A zero
    result only rules out NPT entanglement, not entanglement in general.
    """
    rho_pt = partial_transpose(rho_g, subsystem)
    rho_pt = 0.5 * (rho_pt + rho_pt.conj().T)
    values = hermitian_eigenvalues(rho_pt, check=False)
    return float(math.log2(np.abs(values).sum()))


def max_entanglement(N: int) -> float:
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return math.log2(N + 1)


def maximally_entangled_state(N: int) -> np.ndarray:
    """Ground density matrix of ``sum_k |k>|k> / sqrt(N+1)``."""
    d = N + 1
    psi = np.zeros(d * d, dtype=complex)
    psi[np.arange(d) * d + np.arange(d)] = 1.0 / math.sqrt(d)
    return np.outer(psi, psi.conj())


def delta_E(E_ideal: float, E_scheme: float, N: int) -> float:
    """Shortfall of the scheme against the ideal, both normalised by ``log2(N+1)``."""
    e_max = max_entanglement(N)
    return E_ideal / e_max - E_scheme / e_max
