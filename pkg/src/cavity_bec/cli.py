"""Command-line entry point: ``cavity-bec {simulate,oracle,sweep,qdist,estimate}``.

Every run writes its CSV/JSON outputs and a ``manifest.json`` holding the
resolved configuration, package version and wall time. The manifest's
``config`` block is itself a valid config file for re-running the experiment.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    experiment_estimates,
    fit_power_law,
    scaling_regime,
    scaling_sweep,
    write_sweep_csv,
)
from .config import MODES, OUTPUT_DIR_ENV, ConfigError, RunConfig, parse_config
from .dynamics import ConvergenceError, MasterEquation, TruncationError, evolve, initial_state
from .entanglement import max_entanglement, partial_trace_ground
from .fockspace import build_basis
from .io import write_csv, write_json
from .model import effective_params
from .oracle import (
    characteristic_times,
    crevasse_curve,
    fit_time_scale,
    ground_density_matrix,
    ideal_evolve,
)
from .qdist import q_grid, squeezing_diagnostics

log = logging.getLogger("cavity_bec")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (
    ConvergenceError,
    TruncationError,
    ArithmeticError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


def _simulate(cfg: RunConfig, out: Path) -> dict:
    table = build_basis(cfg.truncation)
    omega_big = effective_params(cfg.model, cfg.N).omega_big
    opts = cfg.simulate
    t_final = opts.omega_t_final / omega_big
    n_steps = max(1, math.ceil(t_final / cfg.integrator.dt - 1e-9))
    record_every = opts.record_every or max(1, n_steps // opts.n_records)
    rec = evolve(
        initial_state(cfg.N, table),
        t_final,
        cfg.integrator,
        cfg.model,
        table,
        record_every=record_every,
    )
    rec.to_csv(out / "trajectory.csv")
    summary = {
        "omega_big": omega_big,
        "t_final": t_final,
        "peak_E": float(rec.E.max()),
        "peak_omega_t": float(rec.omega_t[int(np.argmax(rec.E))]),
        "final_E": float(rec.E[-1]),
        "final_trace": float(rec.trace[-1]),
        "files": ["trajectory.csv"],
    }
    if opts.fit_oracle:
        fit = fit_time_scale(rec.omega_t, rec.E, cfg.N, opts.fit_bounds, opts.include_squeezing)
        payload = {
            "scale": fit.scale,
            "rms": fit.rms,
            "max_abs": fit.max_abs,
            "max_abs_over_E_max": fit.max_abs / max_entanglement(cfg.N),
            "bounds": list(opts.fit_bounds),
        }
        write_json(out / "oracle_fit.json", payload)
        summary["oracle_fit"] = payload
        summary["files"].append("oracle_fit.json")
    return summary


def _oracle(cfg: RunConfig, out: Path) -> dict:
    opts = cfg.oracle
    times = np.linspace(0.0, opts.omega_t_max, opts.points)
    E = crevasse_curve(cfg.N, times, opts.include_squeezing)
    e_max = max_entanglement(cfg.N)
    write_csv(out / "oracle.csv", ("omega_t", "E", "E_norm"), zip(times, E, E / e_max))
    ct = characteristic_times(cfg.N)
    return {
        "files": ["oracle.csv"],
        "E_max": e_max,
        "cnot_time": ct.cnot_time,
        "macro_time": ct.macro_time,
        "max_E": float(E.max()),
    }


def _qdist(cfg: RunConfig, out: Path) -> dict:
    opts = cfg.qdist
    N = cfg.N
    omega_t = opts.omega_t if opts.omega_t is not None else characteristic_times(N).macro_time
    if opts.source == "oracle":
        ratio = 0.0
        if opts.rotation:
            eff = effective_params(cfg.model, N)
            ratio = eff.omega / eff.omega_big
        rho_g = ground_density_matrix(ideal_evolve(N, omega_t, opts.include_squeezing, ratio))
    else:
        table = build_basis(cfg.truncation)
        omega_big = effective_params(cfg.model, N).omega_big
        rec = evolve(
            initial_state(N, table),
            omega_t / omega_big,
            cfg.integrator,
            cfg.model,
            table,
            record_every=10**12,
            equation=MasterEquation(cfg.model, table),
        )
        rho_g = partial_trace_ground(rec.final_state, table)
    grid = q_grid(rho_g, opts.resolution_theta, opts.resolution_phi)
    extra = {
        "omega_t": omega_t,
        "source": opts.source,
        "ground_trace": float(np.real(np.trace(rho_g))),
        "regime": scaling_regime(omega_t, N),
        "squeezing": squeezing_diagnostics(cfg.model, N),
    }
    paths = grid.write(out, extra)
    return {"files": [p.name for p in paths], "omega_t": omega_t, "k2_total": float(grid.integrals().sum())}


def _sweep(cfg: RunConfig, out: Path) -> dict:
    rows = scaling_sweep(cfg.sweep)
    write_sweep_csv(out / "sweep.csv", rows)
    ok = [r for r in rows if r.status == "ok"]
    summary = {"files": ["sweep.csv"], "failed_N": [r.N for r in rows if r.status != "ok"]}
    try:
        gamma, amplitude = fit_power_law([r.N for r in ok], [r.E_scheme_norm for r in ok])
        summary["power_law_fit"] = {"gamma": gamma, "amplitude": amplitude, "quantity": "E_scheme_norm"}
    except ValueError as exc:
        summary["power_law_fit"] = {"error": str(exc)}
    return summary


def _estimate(cfg: RunConfig, out: Path) -> dict:
    result = experiment_estimates(cfg.estimate)
    write_json(out / "estimates.json", result)
    return {"files": ["estimates.json"], **result}


_RUNNERS = {
    "simulate": _simulate,
    "oracle": _oracle,
    "sweep": _sweep,
    "qdist": _qdist,
    "estimate": _estimate,
}


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute one configured run; returns ``(exit status, manifest)``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    manifest = {"version": __version__, "mode": cfg.mode, "config": cfg.to_dict()}
    status = EXIT_OK
    try:
        manifest["results"] = _RUNNERS[cfg.mode](cfg, out)
        if manifest["results"].get("failed_N"):
            status = EXIT_NUMERICAL
            manifest["error"] = f"sweep rows failed for N={manifest['results']['failed_N']}"
    except NUMERICAL_ERRORS as exc:
        status = EXIT_NUMERICAL
        manifest["error"] = f"{type(exc).__name__}: {exc}"
    manifest["status"] = status
    manifest["wall_time_s"] = time.perf_counter() - start
    write_json(out / "manifest.json", manifest)
    return status, manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavity-bec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("config", nargs="?", help="JSON config file (optional if --set supplies everything)")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY.PATH=VALUE",
            help="override a config field; VALUE is parsed as JSON when possible",
        )
        p.add_argument(
            "-o",
            "--output-dir",
            help=f"output directory (overrides ${OUTPUT_DIR_ENV} and the config)",
        )
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = parse_config(args.config, args.overrides, mode=args.mode, output_dir=args.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status, manifest = run(cfg)
    if status != EXIT_OK:
        print(f"numerical failure: {manifest.get('error')}", file=sys.stderr)
    else:
        print(f"wrote {cfg.output_dir}/ ({', '.join(manifest['results']['files'])}, manifest.json)")
    return status


if __name__ == "__main__":
    sys.exit(main())
