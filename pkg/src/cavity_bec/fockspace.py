"""Truncated Fock basis |k1 n1 k2 n2 l> and sparse operators on it.

``k_i`` counts atoms of BEC ``i`` in level ``b``, ``n_i`` atoms in the excited
level ``e`` and ``l`` photons in the common cavity mode. The remaining
``N - k_i - n_i`` atoms sit in level ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

MODE_LABELS = ("a1", "b1", "e1", "a2", "b2", "e2", "c")
COLLAPSE_LABELS = ("Fa1", "Fb1", "Fa2", "Fb2", "c")


@dataclass(frozen=True)
class TruncationSpec:
    """Atom number per BEC and the cutoffs on excited atoms and photons."""

    N: int
    max_excited: int = 1
    max_photons: int = 1

    def __post_init__(self):
        for name in ("N", "max_excited", "max_photons"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be an integer, got {value!r}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.max_excited < 0:
            raise ValueError(f"max_excited must be >= 0, got {self.max_excited}")
        if self.max_photons < 0:
            raise ValueError(f"max_photons must be >= 0, got {self.max_photons}")
        if self.max_excited > self.N:
            raise ValueError(f"max_excited ({self.max_excited}) exceeds N ({self.N})")

    @property
    def states_per_bec(self) -> int:
        return sum(self.N - n + 1 for n in range(self.max_excited + 1))

    @property
    def dimension(self) -> int:
        return self.states_per_bec**2 * (self.max_photons + 1)


class BasisState(NamedTuple):
    k1: int
    n1: int
    k2: int
    n2: int
    l: int


@dataclass(frozen=True, eq=False)
class BasisTable:
    """Ordered basis states with their inverse index map.

    States are sorted lexicographically in ``(k1, n1, k2, n2, l)``.
    """

    trunc: TruncationSpec
    states: tuple[BasisState, ...]
    index: dict = field(repr=False)
    occupations: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.states)

    @property
    def N(self) -> int:
        return self.trunc.N

    @property
    def dimension(self) -> int:
        return len(self.states)

    def ground_indices(self) -> np.ndarray:
        """Indices of states with no excited atoms and no photons, ordered by (k1, k2)."""
        occ = self.occupations
        mask = (occ[:, 1] == 0) & (occ[:, 3] == 0) & (occ[:, 4] == 0)
        return np.flatnonzero(mask)

    def block_labels(self) -> np.ndarray:
        """``(k1 + n1, k2 + n2)`` per state; conserved by the coherent Hamiltonian."""
        occ = self.occupations
        return np.stack([occ[:, 0] + occ[:, 1], occ[:, 2] + occ[:, 3]], axis=1)


def build_basis(trunc: TruncationSpec) -> BasisTable:
    N = trunc.N
    per_bec = [
        (k, n)
        for k in range(N + 1)
        for n in range(trunc.max_excited + 1)
        if k + n <= N
    ]
    states = tuple(
        BasisState(k1, n1, k2, n2, l)
        for k1, n1 in per_bec
        for k2, n2 in per_bec
        for l in range(trunc.max_photons + 1)
    )
    index = {s: i for i, s in enumerate(states)}
    occupations = np.array(states, dtype=np.int64).reshape(len(states), 5)
    return BasisTable(trunc=trunc, states=states, index=index, occupations=occupations)


def _occupation(state: BasisState, mode: str, N: int) -> int:
    bec = mode[1:]
    if mode == "c":
        return state.l
    k = state.k1 if bec == "1" else state.k2
    n = state.n1 if bec == "1" else state.n2
    return {"a": N - k - n, "b": k, "e": n}[mode[0]]


def _lowered(state: BasisState, mode: str) -> BasisState:
    """State with one quantum removed from ``mode`` (a-level is implicit)."""
    if mode == "c":
        return state._replace(l=state.l - 1)
    level, bec = mode[0], mode[1]
    if level == "a":
        return state
    key = ("k" if level == "b" else "n") + bec
    return state._replace(**{key: getattr(state, key) - 1})


def mode_operator(label: str, table: BasisTable) -> sp.csr_matrix:
    """Annihilation operator for ``label`` in the truncated basis.

    Matrix elements follow the bosonic ladder rule ``sqrt(occupation)``.
    The a-level occupation is implicit (``N - k - n``), so ``a_i`` is
    represented on the fixed-N labels as ``diag(sqrt(N - k_i - n_i))``; its
    adjoint composed with ``e_i`` reproduces ``a_i† e_i`` exactly.
    """
    if label not in MODE_LABELS:
        raise ValueError(f"unknown mode label {label!r}; expected one of {MODE_LABELS}")
    N = table.N
    rows, cols, vals = [], [], []
    for col, state in enumerate(table.states):
        occ = _occupation(state, label, N)
        if occ == 0:
            continue
        target = table.index.get(_lowered(state, label))
        if target is None:
            continue
        rows.append(target)
        cols.append(col)
        vals.append(math.sqrt(occ))
    dim = table.dimension
    return sp.csr_matrix(
        (np.asarray(vals, dtype=complex), (rows, cols)), shape=(dim, dim)
    )


def collapse_operator(label: str, table: BasisTable) -> sp.csr_matrix:
    """Jump operators ``F_a = a† e``, ``F_b = b† e`` and the cavity mode ``c``."""
    if label not in COLLAPSE_LABELS:
        raise ValueError(
            f"unknown collapse label {label!r}; expected one of {COLLAPSE_LABELS}"
        )
    if label == "c":
        return mode_operator("c", table)
    level, bec = label[1], label[2]
    e = mode_operator("e" + bec, table)
    ground = mode_operator(level + bec, table)
    return (ground.conj().T @ e).tocsr()


def spin_z_operator(bec: int, table: BasisTable) -> sp.csr_matrix:
    """Diagonal ``S^z_i = a†a - b†b`` with eigenvalue ``N - 2 k_i - n_i``."""
    if bec not in (1, 2):
        raise ValueError(f"bec must be 1 or 2, got {bec!r}")
    occ = table.occupations
    k = occ[:, 0] if bec == 1 else occ[:, 2]
    n = occ[:, 1] if bec == 1 else occ[:, 3]
    return sp.diags((table.N - 2 * k - n).astype(complex), format="csr")


def number_operator(label: str, table: BasisTable) -> sp.csr_matrix:
    if label not in MODE_LABELS:
        raise ValueError(f"unknown mode label {label!r}; expected one of {MODE_LABELS}")
    N = table.N
    diag = np.array([_occupation(s, label, N) for s in table.states], dtype=complex)
    return sp.diags(diag, format="csr")
