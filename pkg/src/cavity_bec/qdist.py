"""Partial Husimi Q-distributions of BEC 1 conditioned on number states of BEC 2.

Bloch convention: ``α = cos(θ/2)``, ``β = e^{iφ} sin(θ/2)``, with θ measured
from the all-``a`` pole so the equator holds the equal-superposition states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import comb

from .io import write_csv, write_json
from .model import ModelParams, effective_params, spurious_squeeze_coeffs


@dataclass(frozen=True)
class SpinCoherentState:
    alpha: complex
    beta: complex
    N: int

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")

    @classmethod
    def from_angles(cls, theta: float, phi: float, N: int) -> "SpinCoherentState":
        return cls(math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2), N)

    def vector(self) -> np.ndarray:
        return spin_coherent_vector(self.alpha, self.beta, self.N)


def spin_coherent_vector(alpha, beta, N: int) -> np.ndarray:
    """Amplitudes over ``k`` (atoms in ``b``): ``sqrt(C(N,k)) α^(N-k) β^k``."""
    norm = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")
    k = np.arange(N + 1)
    return np.sqrt(comb(N, k)) * complex(alpha) ** (N - k) * complex(beta) ** k


def _coherent_vectors(theta, phi, N):
    # rows: one coherent-state vector per (theta, phi) pair
    k = np.arange(N + 1)
    theta = np.asarray(theta, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[..., None]
    return (
        np.sqrt(comb(N, k))
        * np.cos(theta / 2) ** (N - k)
        * np.sin(theta / 2) ** k
        * np.exp(1j * k * phi)
    )


def _conditional_block(rho_g: np.ndarray, k2: int) -> tuple[np.ndarray, int]:
    D = rho_g.shape[0]
    d = math.isqrt(D)
    if d * d != D or rho_g.shape != (D, D):
        raise ValueError(f"expected a square matrix over (N+1)^2 indices, got {rho_g.shape}")
    if not 0 <= k2 < d:
        raise ValueError(f"k2={k2} out of range [0, {d - 1}]")
    return rho_g.reshape(d, d, d, d)[:, k2, :, k2], d - 1


def partial_q(rho_g: np.ndarray, k2: int, theta, phi):
    """``(N+1)/(4π) <<α,β| <k2| ρ̃ |k2> |α,β>>`` at one or many ``(θ, φ)``."""
    block, N = _conditional_block(np.asarray(rho_g), k2)
    vecs = _coherent_vectors(theta, phi, N)
    value = np.einsum("...i,ij,...j->...", vecs.conj(), block, vecs).real
    value = (N + 1) / (4 * math.pi) * value
    return float(value) if np.ndim(value) == 0 else value


def marginal_k2(rho_g: np.ndarray) -> np.ndarray:
    """``<k2| Tr_1 ρ̃ |k2>`` for every ``k2``."""
    D = rho_g.shape[0]
    d = math.isqrt(D)
    diag = np.real(np.diagonal(rho_g)).reshape(d, d)
    return diag.sum(axis=0)


@dataclass
class QGrid:
    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray  # [k2, theta, phi]

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoid weights in θ (times sin θ) and uniform periodic weights in φ."""
        th = self.theta
        w_theta = np.zeros_like(th)
        h = np.diff(th)
        w_theta[:-1] += h / 2
        w_theta[1:] += h / 2
        w_phi = np.full(self.phi.shape, 2 * math.pi / len(self.phi))
        return (w_theta * np.sin(th))[:, None] * w_phi[None, :]

    def integrals(self) -> np.ndarray:
        w = self.quadrature_weights()
        return np.einsum("ktp,tp->k", self.values, w)

    def peak(self, k2: int) -> tuple[float, float]:
        t, p = np.unravel_index(np.argmax(self.values[k2]), self.values[k2].shape)
        return float(self.theta[t]), float(self.phi[p])

    def write(self, directory, manifest_extra: dict | None = None) -> list[Path]:
        directory = Path(directory)
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        paths = []
        for k2 in range(self.values.shape[0]):
            rows = zip(th.ravel(), ph.ravel(), self.values[k2].ravel())
            paths.append(write_csv(directory / f"qdist_k2_{k2}.csv", ("theta", "phi", "Q"), rows))
        manifest = {
            "N": self.N,
            "n_theta": len(self.theta),
            "n_phi": len(self.phi),
            "files": [p.name for p in paths],
            "k2_weights": [float(x) for x in self.integrals()],
        }
        manifest.update(manifest_extra or {})
        paths.append(write_json(directory / "qdist_manifest.json", manifest))
        return paths


def q_grid(rho_g: np.ndarray, resolution_theta: int = 64, resolution_phi: int = 128) -> QGrid:
    """Sample every partial distribution on a θ × φ grid.

    θ runs over ``[0, π]`` inclusive; φ covers ``[0, 2π)`` without the
    duplicate endpoint.
    """
    if resolution_theta < 2 or resolution_phi < 2:
        raise ValueError("grid resolutions must be >= 2")
    rho_g = np.asarray(rho_g)
    d = math.isqrt(rho_g.shape[0])
    N = d - 1
    theta = np.linspace(0.0, math.pi, resolution_theta)
    phi = np.linspace(0.0, 2 * math.pi, resolution_phi, endpoint=False)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    vecs = _coherent_vectors(th, ph, N)  # [t, p, k1]
    blocks = rho_g.reshape(d, d, d, d).transpose(1, 0, 2, 3).diagonal(axis1=0, axis2=3)
    # blocks[k1, k1', k2] -> per-k2 conditional block
    values = np.einsum("tpi,ijk,tpj->ktp", vecs.conj(), blocks, vecs).real
    values *= (N + 1) / (4 * math.pi)
    return QGrid(theta=theta, phi=phi, values=values)


def squeezing_diagnostics(params: ModelParams, N: int) -> dict:
    """Intended one-axis-twisting strength next to the truncation artefact.

    The effective Hamiltonian carries ``-Ω/2 (S^z_i)²`` per BEC; a cutoff of
    one excited atom adds ``+g⁴/(4Δl³) (S^z_i)²``. Their sum is the net
    quadratic coefficient seen in simulated Q-distributions.
    """
    eff = effective_params(params, N)
    linear, quadratic = spurious_squeeze_coeffs(params.g, params.delta_l)
    intended = -0.5 * eff.omega_big
    return {
        "omega_big": eff.omega_big,
        "omega": eff.omega,
        "squeezing_coeff": intended,
        "spurious_linear_coeff": linear,
        "spurious_squeezing_coeff": quadratic,
        "net_squeezing_coeff": intended + quadratic,
    }
