"""Master-equation time evolution of the full atom-photon density matrix.

The generator is split as ``L(ρ) = -i(Kρ - ρK†) + J(ρ)`` with the
non-Hermitian ``K = H - (i/2) Σ Γ_j o_j† o_j`` and the jump term
``J(ρ) = Σ Γ_j o_j ρ o_j†``. ``K`` conserves ``k_i + n_i`` for both BECs,
so it is block diagonal with blocks of at most
``(max_excited+1)**2 (max_photons+1)`` states and is diagonalised exactly,
block by block. In its eigenbasis the implicit step is elementwise and only
the (small) jump term needs a fixed-point iteration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .entanglement import log_negativity, max_entanglement, partial_trace_ground
from .fockspace import BasisTable, COLLAPSE_LABELS, collapse_operator
from .io import write_csv
from .model import ModelParams, effective_params, hamiltonian

log = logging.getLogger(__name__)

METHODS = ("backward_euler", "exponential_euler", "exponential_trapezoid")
TRACE_ABORT = 1e-3
DENSE_TRANSFORM_LIMIT = 40  # below this dimension one dense product beats the block loop


class ConvergenceError(RuntimeError):
    """The implicit solve did not reach its residual tolerance."""


class TruncationError(RuntimeError):
    """Trace drift signalled that the Fock-space cutoff is no longer valid."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Time-stepping controls.

    ``method="backward_euler"`` solves ``ρ' - dt L(ρ') = ρ``.
    ``method="exponential_euler"`` propagates the ``K`` part exactly and
    treats only the jump term implicitly, ``ρ' = e^{-iK dt} ρ e^{iK† dt} + dt J(ρ')``;
    it is exact when there is no dissipation.
    ``method="exponential_trapezoid"`` splits the jump term between both ends
    of the step, ``ρ' = e^{-iK dt} (ρ + dt/2 J(ρ)) e^{iK† dt} + dt/2 J(ρ')``,
    which is second order and keeps the trace to ``O(dt²)``.
    """

    dt: float = 0.02
    tol: float = 1e-10
    max_iter: int = 100
    renormalize_trace: bool = False
    method: str = "exponential_trapezoid"
    check_state: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    omega_t: np.ndarray
    E: np.ndarray
    E_norm: np.ndarray
    trace: np.ndarray
    excited_pop: np.ndarray
    photon_pop: np.ndarray
    hermiticity_error: np.ndarray
    min_eigenvalue: np.ndarray
    final_state: np.ndarray | None = field(default=None, repr=False)

    CSV_COLUMNS = ("t", "omega_t", "E", "E_norm", "trace", "excited_pop", "photon_pop")

    def __post_init__(self):
        n = len(self.times)
        for name in ("omega_t", "E", "E_norm", "trace", "excited_pop", "photon_pop"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {n}")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def rows(self):
        for i in range(len(self.times)):
            yield tuple(float(getattr(self, c)[i]) for c in ("times",) + self.CSV_COLUMNS[1:])

    def to_csv(self, path) -> None:
        write_csv(path, self.CSV_COLUMNS, self.rows())


def dissipator(o, rho: np.ndarray) -> np.ndarray:
    """``2 o ρ o† - o†o ρ - ρ o†o`` (trace preserving Lindblad form)."""
    rho = np.asarray(rho)
    if o.shape[1] != rho.shape[0] or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"operator shape {o.shape} does not match rho shape {rho.shape}")
    o_rho = o @ rho
    o_dag = o.conj().T
    n_op = o_dag @ o
    return 2.0 * (o @ (o_rho.conj().T)).conj().T - n_op @ rho - (n_op @ rho.conj().T).conj().T


def collapse_set(table: BasisTable) -> dict:
    return {label: collapse_operator(label, table) for label in COLLAPSE_LABELS}


def collapse_rate(label: str, params: ModelParams) -> float:
    """Prefactor of ``D[o]`` in the master equation for a collapse label."""
    if label.startswith("F"):
        return 0.5 * params.gamma_s
    if label == "c":
        return 0.5 * params.gamma_c
    raise ValueError(f"unknown collapse label {label!r}")


def lindblad_rhs(
    rho: np.ndarray, H, params: ModelParams, collapse_ops: Mapping[str, object]
) -> np.ndarray:
    """``-i[H, ρ] + Σ rate(label) D[o]ρ`` with Γs/2 on every F and Γc/2 on ``c``."""
    rho = np.asarray(rho)
    if H.shape != rho.shape:
        raise ValueError(f"H shape {H.shape} does not match rho shape {rho.shape}")
    h_rho = H @ rho
    out = -1j * (h_rho - (H.conj().T @ rho.conj().T).conj().T)
    for label, o in collapse_ops.items():
        rate = collapse_rate(label, params)
        if rate:
            out = out + rate * dissipator(o, rho)
    return out


def backward_euler_step(
    rho: np.ndarray,
    dt: float,
    rhs: Callable[[np.ndarray], np.ndarray],
    config: IntegratorConfig | None = None,
) -> np.ndarray:
    """Solve ``ρ' - dt L(ρ') = ρ`` matrix-free with GMRES.

    ``rhs`` applies the (linear) generator ``L``. The Frobenius norm of the
    residual is driven below ``config.tol``; failure raises
    :class:`ConvergenceError`.
    """
    config = config or IntegratorConfig()
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    rho = np.asarray(rho, dtype=complex)
    shape = rho.shape

    def matvec(x):
        x = x.reshape(shape)
        return (x - dt * rhs(x)).ravel()

    A = LinearOperator((rho.size, rho.size), matvec=matvec, dtype=complex)
    b = rho.ravel()
    x, info = gmres(A, b, x0=b.copy(), rtol=0.0, atol=0.1 * config.tol,
                    restart=min(rho.size, 60), maxiter=config.max_iter)
    residual = np.linalg.norm(matvec(x) - b)
    if residual > config.tol:
        raise ConvergenceError(
            f"GMRES residual {residual:.3e} above tolerance {config.tol:.1e} (info={info})"
        )
    return x.reshape(shape)


class MasterEquation:
    """Generator of the scheme's master equation on a fixed basis.

    Holds the sparse Hamiltonian and jump operators, and the block-wise
    eigendecomposition of ``K`` used by the fast implicit steps. Internally
    states are kept in a block-major permutation of the basis so that the
    eigenvector transforms are a sequence of small dense products.
    """

    def __init__(self, params: ModelParams, table: BasisTable, cond_limit: float = 1e8):
        self.params = params
        self.table = table
        self.H = hamiltonian(params, table)
        self.collapse_ops = collapse_set(table)
        self.jumps = [
            (2.0 * collapse_rate(label, params), o)
            for label, o in self.collapse_ops.items()
            if collapse_rate(label, params) > 0
        ]
        K = self.H.astype(complex)
        for rate, o in self.jumps:
            K = K - 0.5j * rate * (o.conj().T @ o)
        self.K = K.tocsr()
        self._diagonalize(cond_limit)
        self._prepare_jumps()

    @property
    def dimension(self) -> int:
        return self.table.dimension

    @property
    def has_jumps(self) -> bool:
        return bool(self.jumps)

    def _diagonalize(self, cond_limit: float):
        labels = self.table.block_labels()
        _, block_id = np.unique(labels, axis=0, return_inverse=True)
        block_id = block_id.ravel()
        perm = np.argsort(block_id, kind="stable")
        Kp = self.K[perm][:, perm].toarray()
        bounds = np.flatnonzero(np.diff(block_id[perm])) + 1
        starts = np.concatenate([[0], bounds])
        stops = np.concatenate([bounds, [len(perm)]])
        mask = np.zeros(Kp.shape, dtype=bool)
        for a, b in zip(starts, stops):
            mask[a:b, a:b] = True
        if np.abs(Kp[~mask]).max(initial=0.0) > 0:
            raise ArithmeticError("generator K couples different (k+n) blocks")

        lam = np.empty(len(perm), dtype=complex)
        self.blocks = []
        self.max_condition = 1.0
        for a, b in zip(starts, stops):
            block = Kp[a:b, a:b]
            if self.has_jumps:
                w, V = np.linalg.eig(block)
                cond = np.linalg.cond(V)
                if not cond < cond_limit:
                    raise ArithmeticError(
                        f"eigenvector matrix of block {a}:{b} is ill-conditioned (cond={cond:.2e})"
                    )
                self.max_condition = max(self.max_condition, float(cond))
                Vinv = np.linalg.inv(V)
            else:
                w, V = np.linalg.eigh(block)
                Vinv = V.conj().T
            lam[a:b] = w
            gram = V.conj().T @ V
            self.blocks.append((slice(a, b), V, Vinv, gram.T.copy()))
        self.perm = perm
        self.eigenvalues = lam
        self._dense = None
        if len(perm) <= DENSE_TRANSFORM_LIMIT:
            V = np.zeros(Kp.shape, dtype=complex)
            Vinv = np.zeros(Kp.shape, dtype=complex)
            for sl, Vb, Vib, _ in self.blocks:
                V[sl, sl] = Vb
                Vinv[sl, sl] = Vib
            self._dense = (None, (V, V.conj().T.copy()), (Vinv, Vinv.conj().T.copy()))

    def _prepare_jumps(self):
        pos = np.empty_like(self.perm)
        pos[self.perm] = np.arange(len(self.perm))
        self._jump_maps = []
        for rate, o in self.jumps:
            coo = o.tocoo()
            keep = coo.data != 0
            src, dst, amp = pos[coo.col[keep]], pos[coo.row[keep]], coo.data[keep]
            if len(np.unique(src)) != len(src) or len(np.unique(dst)) != len(dst):
                raise ArithmeticError("jump operator is not a weighted partial permutation")
            dim = len(self.perm)
            weight = (rate * np.outer(amp, amp.conj())).ravel()
            src_flat = (src[:, None] * dim + src[None, :]).ravel()
            dst_flat = (dst[:, None] * dim + dst[None, :]).ravel()
            self._jump_maps.append((src_flat, dst_flat, weight))

    # -- block-major coordinates -------------------------------------------
    def _permute(self, rho):
        return np.asarray(rho, dtype=complex)[np.ix_(self.perm, self.perm)]

    def _unpermute(self, rho_p):
        out = np.empty_like(rho_p)
        out[np.ix_(self.perm, self.perm)] = rho_p
        return out

    def _congruence_blocks(self, X, which):
        # which=1: V X V†, which=2: V⁻¹ X V⁻†
        if self._dense is not None:
            M, Mh = self._dense[which]
            return M @ X @ Mh
        Y = np.empty_like(X)
        for blk in self.blocks:
            sl, M = blk[0], blk[which]
            Y[sl] = M @ X[sl]
        Z = np.empty_like(X)
        for blk in self.blocks:
            sl, M = blk[0], blk[which]
            Z[:, sl] = Y[:, sl] @ M.conj().T
        return Z

    def _jump_p(self, rho_p):
        out = np.zeros_like(rho_p)
        flat_in = np.ascontiguousarray(rho_p).ravel()
        flat_out = out.ravel()
        for src, dst, weight in self._jump_maps:
            flat_out[dst] += weight * flat_in[src]
        return out

    def jump_hat(self, rho_hat):
        """Jump term expressed in eigen coordinates."""
        rho_p = self._congruence_blocks(rho_hat, 1)
        return self._congruence_blocks(self._jump_p(rho_p), 2)

    # -- maps between Fock and eigen coordinates -------------------------
    def to_eigen(self, rho: np.ndarray) -> np.ndarray:
        return self._congruence_blocks(self._permute(rho), 2)

    def from_eigen(self, rho_hat: np.ndarray) -> np.ndarray:
        return self._unpermute(self._congruence_blocks(rho_hat, 1))

    def trace_eigen(self, rho_hat: np.ndarray) -> complex:
        return complex(sum((rho_hat[sl, sl] * gram_t).sum() for sl, _, _, gram_t in self.blocks))

    # -- generator pieces -------------------------------------------------
    def jump(self, rho: np.ndarray) -> np.ndarray:
        """``Σ Γ_j o_j ρ o_j†`` in the original basis order."""
        return self._unpermute(self._jump_p(self._permute(rho)))

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        return lindblad_rhs(rho, self.H, self.params, self.collapse_ops)

    def step_weights(self, dt: float, method: str) -> tuple[np.ndarray, np.ndarray | None]:
        """Elementwise weights ``(A, B)`` with ``ρ̂' = A∘ρ̂ + dt B∘Ĵ(ρ̂')``.

        ``B`` is ``None`` when it is identically one.
        """
        lam = self.eigenvalues
        diff = lam[:, None] - lam.conj()[None, :]
        if method == "backward_euler":
            A = 1.0 / (1.0 + 1j * dt * diff)
            return A, A
        if method in ("exponential_euler", "exponential_trapezoid"):
            return np.exp(-1j * dt * diff), None
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


class _Stepper:
    """Advances ``ρ̂`` in eigen coordinates with a fixed step size."""

    def __init__(self, eq: MasterEquation, dt: float, config: IntegratorConfig):
        self.eq = eq
        self.dt = dt
        self.config = config
        self.method = config.method
        self.A, self.B = eq.step_weights(dt, config.method)
        self._jump_hat = None
        self.iterations = 0

    def _jump_hat_of(self, rho_hat):
        return self.eq.jump_hat(rho_hat)

    def advance(self, rho_hat: np.ndarray, n_steps: int) -> np.ndarray:
        if n_steps <= 0:
            return rho_hat
        if not self.eq.has_jumps:
            return self._advance_coherent(rho_hat, n_steps)
        for _ in range(n_steps):
            rho_hat = self._implicit_step(rho_hat)
        return rho_hat

    def _advance_coherent(self, rho_hat, n_steps):
        if self.method != "backward_euler":
            lam = self.eq.eigenvalues
            phase = np.exp(-1j * (n_steps * self.dt) * (lam[:, None] - lam.conj()[None, :]))
            out = rho_hat * phase
        else:
            out = rho_hat * self.A**n_steps
        if self.config.renormalize_trace:
            out = out / self.eq.trace_eigen(out).real
        return out

    def _implicit_step(self, rho_hat):
        dt, A, B = self.dt, self.A, self.B
        jh = self._jump_hat if self._jump_hat is not None else self._jump_hat_of(rho_hat)
        if self.method == "exponential_trapezoid":
            # jumps at both ends of the step, the old one carried through e^{-iK dt}
            base = A * (rho_hat + 0.5 * dt * jh)
            dt = 0.5 * dt
        else:
            base = A * rho_hat
        current = base + dt * (jh if B is None else B * jh)
        scale = max(np.linalg.norm(current), 1.0)
        for it in range(self.config.max_iter):
            jh = self._jump_hat_of(current)
            new = base + dt * (jh if B is None else B * jh)
            delta = np.linalg.norm(new - current)
            current = new
            self.iterations += 1
            if delta <= self.config.tol * scale:
                break
        else:
            raise ConvergenceError(
                f"fixed-point solve stalled at |Δ|={delta:.3e} after {self.config.max_iter} iterations"
            )
        self._jump_hat = jh
        if self.config.renormalize_trace:
            current = current / self.eq.trace_eigen(current).real
            self._jump_hat = None
        return current


def initial_state(N: int, table: BasisTable) -> np.ndarray:
    """Product of two equal-superposition spin coherent states, no excitations or photons."""
    if N != table.N:
        raise ValueError(f"N={N} does not match basis N={table.N}")
    psi = np.zeros(table.dimension, dtype=complex)
    ground = table.ground_indices()
    k = np.arange(N + 1)
    amp = np.sqrt([math.comb(N, int(i)) for i in k]) / 2.0 ** (N / 2.0)
    psi[ground] = np.outer(amp, amp).ravel()
    rho = np.outer(psi, psi.conj())
    return rho / np.trace(rho).real


def state_diagnostics(rho: np.ndarray) -> dict:
    """Trace, Hermiticity error and smallest eigenvalue of a density matrix."""
    herm = float(np.abs(rho - rho.conj().T).max())
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    return {"trace": float(np.trace(rho).real), "hermiticity_error": herm, "min_eigenvalue": min_eig}


def evolve(
    rho0: np.ndarray,
    t_final: float,
    config: IntegratorConfig,
    params: ModelParams,
    table: BasisTable,
    record_every: int = 1,
    *,
    equation: MasterEquation | None = None,
) -> TrajectoryRecord:
    """Integrate from ``t=0`` to ``t_final`` and record observables.

    The step size is shrunk so that an integer number of steps lands exactly
    on ``t_final``; the last step is always recorded. Raises
    :class:`TruncationError` if ``|Tr ρ - 1|`` exceeds 1e-3 at a record.
    """
    if t_final < 0:
        raise ValueError(f"t_final must be non-negative, got {t_final}")
    if record_every < 1:
        raise ValueError(f"record_every must be >= 1, got {record_every}")
    eq = equation or MasterEquation(params, table)
    n_steps = max(1, math.ceil(t_final / config.dt - 1e-9)) if t_final > 0 else 0
    dt = t_final / n_steps if n_steps else config.dt
    stepper = _Stepper(eq, dt, config)

    try:
        omega_big = effective_params(params, table.N).omega_big
    except ZeroDivisionError:
        omega_big = float("nan")
    e_max = max_entanglement(table.N)
    occ = table.occupations
    excited = (occ[:, 1] + occ[:, 3]).astype(float)
    photons = occ[:, 4].astype(float)

    record_steps = list(range(0, n_steps, record_every)) + [n_steps]
    columns = {k: [] for k in ("t", "E", "trace", "exc", "ph", "herm", "mineig")}
    rho_hat = eq.to_eigen(rho0)
    done = 0
    rho = np.asarray(rho0, dtype=complex)
    for step in record_steps:
        rho_hat = stepper.advance(rho_hat, step - done)
        done = step
        rho = eq.from_eigen(rho_hat)
        diag = np.real(np.diagonal(rho))
        trace = float(diag.sum())
        columns["t"].append(step * dt)
        columns["trace"].append(trace)
        columns["exc"].append(float(diag @ excited))
        columns["ph"].append(float(diag @ photons))
        columns["E"].append(log_negativity(partial_trace_ground(rho, table)))
        if config.check_state:
            d = state_diagnostics(rho)
            columns["herm"].append(d["hermiticity_error"])
            columns["mineig"].append(d["min_eigenvalue"])
        else:
            columns["herm"].append(float("nan"))
            columns["mineig"].append(float("nan"))
        if abs(trace - 1.0) > TRACE_ABORT:
            raise TruncationError(
                f"|Tr rho - 1| = {abs(trace - 1.0):.3e} at t={step * dt:.6g} exceeds {TRACE_ABORT}"
            )
    log.debug("evolve: %d steps of dt=%.4g, %d fixed-point iterations", n_steps, dt, stepper.iterations)
    times = np.array(columns["t"])
    E = np.array(columns["E"])
    return TrajectoryRecord(
        times=times,
        omega_t=omega_big * times,
        E=E,
        E_norm=E / e_max,
        trace=np.array(columns["trace"]),
        excited_pop=np.array(columns["exc"]),
        photon_pop=np.array(columns["ph"]),
        hermiticity_error=np.array(columns["herm"]),
        min_eigenvalue=np.array(columns["mineig"]),
        final_state=rho,
    )

