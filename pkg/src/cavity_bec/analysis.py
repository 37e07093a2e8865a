"""Scaling sweeps over atom number, effective decoherence and physical-unit estimates."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import IntegratorConfig, MasterEquation, evolve, initial_state
from .entanglement import max_entanglement
from .fockspace import TruncationSpec, build_basis
from .io import write_csv
from .model import ModelParams, detuning_strategy, effective_params, STRATEGIES
from .oracle import characteristic_times, ideal_evolve, pure_state_negativity

log = logging.getLogger(__name__)

TARGETS = ("cnot", "macro")
SWEEP_COLUMNS = (
    "N", "delta_l_over_g", "omega", "E_ideal_norm", "E_scheme_norm", "delta_E", "status",
)


@dataclass(frozen=True)
class SweepPlan:
    N_values: tuple[int, ...] = (2, 4, 6, 8)
    strategy: str = "sqrt"
    base: float = 15.0
    delta_c: float = 2.0
    gamma_s: float = 0.0
    gamma_c: float = 0.0
    target: str = "cnot"
    g: float = 1.0
    G: float = 1.0
    max_excited: int = 1
    max_photons: int = 1
    integrator: IntegratorConfig = field(default_factory=lambda: IntegratorConfig(dt=0.5))
    workers: int = 1

    def __post_init__(self):
        Ns = tuple(int(n) for n in self.N_values)
        if not Ns:
            raise ValueError("N_values must not be empty")
        if any(n < 1 for n in Ns):
            raise ValueError(f"N_values must be positive, got {Ns}")
        if any(b <= a for a, b in zip(Ns, Ns[1:])):
            raise ValueError(f"N_values must be strictly ascending, got {Ns}")
        object.__setattr__(self, "N_values", Ns)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}; expected one of {TARGETS}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def target_omega_t(self, N: int) -> float:
        times = characteristic_times(N)
        return times.cnot_time if self.target == "cnot" else times.macro_time

    def model_for(self, N: int) -> ModelParams:
        return ModelParams(
            g=self.g,
            G=self.G,
            delta_c=self.delta_c,
            delta_l=detuning_strategy(self.strategy, N, self.base) * self.g,
            gamma_s=self.gamma_s,
            gamma_c=self.gamma_c,
        )


@dataclass(frozen=True)
class SweepRow:
    N: int
    delta_l_over_g: float
    omega: float
    E_ideal_norm: float
    E_scheme_norm: float
    delta_E: float
    status: str

    def as_tuple(self):
        return tuple(asdict(self)[c] for c in SWEEP_COLUMNS)


def sweep_row(plan: SweepPlan, N: int) -> SweepRow:
    """Run one atom number of a sweep; failures are reported in ``status``."""
    params = plan.model_for(N)
    omega_t = plan.target_omega_t(N)
    e_max = max_entanglement(N)
    ideal = pure_state_negativity(ideal_evolve(N, omega_t)) / e_max
    omega = float("nan")
    try:
        omega = effective_params(params, N).omega_big
        table = build_basis(TruncationSpec(N, plan.max_excited, plan.max_photons))
        t_final = omega_t / omega
        rec = evolve(
            initial_state(N, table),
            t_final,
            plan.integrator,
            params,
            table,
            record_every=10**12,
            equation=MasterEquation(params, table),
        )
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        log.warning("sweep row N=%d failed: %s", N, exc)
        return SweepRow(N, params.delta_l / params.g, omega, ideal, float("nan"), float("nan"),
                        f"failed: {type(exc).__name__}: {exc}")
    scheme = float(rec.E_norm[-1])
    return SweepRow(N, params.delta_l / params.g, omega, ideal, scheme, ideal - scheme, "ok")


def _row_job(args):
    plan, N = args
    return sweep_row(plan, N)


def scaling_sweep(plan: SweepPlan) -> list[SweepRow]:
    """Compare the simulated scheme with the ideal gate at the plan's target time for each N.

    Rows run in a process pool when ``plan.workers > 1`` and are returned
    ordered by N.
    """
    jobs = [(plan, N) for N in plan.N_values]
    if plan.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            rows = list(pool.map(_row_job, jobs))
    else:
        rows = [_row_job(j) for j in jobs]
    return sorted(rows, key=lambda r: r.N)


def write_sweep_csv(path, rows) -> None:
    write_csv(path, SWEEP_COLUMNS, (r.as_tuple() for r in rows))


def fit_power_law(N_values, values) -> tuple[float, float]:
    """Fit ``values ≈ A N^{-γ}`` by log-log least squares; returns ``(γ, A)``.

    Non-positive values are excluded; at least two points must remain.
    """
    N = np.asarray(N_values, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        raise ValueError("need at least two positive values to fit a power law")
    slope, intercept = np.polyfit(np.log(N[keep]), np.log(y[keep]), 1)
    return float(-slope), float(math.exp(intercept))


def effective_decoherence(params: ModelParams, N: int) -> tuple[float, float]:
    """``(Γs g² N / Δl², Γc g² / Δl²)``."""
    if params.delta_l == 0:
        raise ZeroDivisionError("laser detuning delta_l must be non-zero")
    ratio = params.g**2 / params.delta_l**2
    return params.gamma_s * ratio * N, params.gamma_c * ratio


@dataclass(frozen=True)
class PhysicalParams:
    """Physical-unit inputs; rates are angular frequencies in rad/s."""

    G: float = 2 * math.pi * 215e6
    g: float = 2 * math.pi * 215e6
    gamma_s: float = 2 * math.pi * 3e6
    gamma_c: float = 2 * math.pi * 53e6
    N: int = 1000
    delta_c_over_g: float = 2.0
    delta_l_over_g: float = 15 * math.sqrt(1000)

    def __post_init__(self):
        for name in ("G", "g", "gamma_s", "gamma_c", "N", "delta_c_over_g", "delta_l_over_g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")


def experiment_estimates(phys: PhysicalParams) -> dict:
    """Gate times and effective decoherence times in SI units (s, rad/s)."""
    params = ModelParams(
        g=phys.g,
        G=phys.G,
        delta_c=phys.delta_c_over_g * phys.g,
        delta_l=phys.delta_l_over_g * phys.g,
        gamma_s=phys.gamma_s,
        gamma_c=phys.gamma_c,
    )
    omega_big = effective_params(params, phys.N).omega_big
    times = characteristic_times(phys.N)
    gs_eff, gc_eff = effective_decoherence(params, phys.N)
    return {
        "Omega_rad_per_s": omega_big,
        "t_cnot_s": times.cnot_time / omega_big,
        "t_macro_s": times.macro_time / omega_big,
        "gamma_s_eff_rad_per_s": gs_eff,
        "gamma_c_eff_rad_per_s": gc_eff,
        "inv_gamma_s_eff_s": 1.0 / gs_eff,
        "inv_gamma_c_eff_s": 1.0 / gc_eff,
    }


def scaling_regime(
    omega_t: float, N: int, c1: float = math.pi / 2, c2: float = 1.0
) -> str:
    """Classify an entangling time as continuous-variable, macroscopic or cat-like."""
    if omega_t < 0:
        raise ValueError(f"omega_t must be non-negative, got {omega_t}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if omega_t <= c1 / N:
        return "continuous-variable"
    if omega_t <= c2 / math.sqrt(N):
        return "macroscopic"
    return "cat-like"
