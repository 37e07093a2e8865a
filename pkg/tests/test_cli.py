import json
import math

import pytest

from cavity_bec.cli import main
from cavity_bec.config import (
    OUTPUT_DIR_ENV,
    ConfigError,
    apply_overrides,
    build_config,
    parse_config,
)


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return path


MINIMAL = {
    "mode": "simulate",
    "truncation": {"N": 1},
    "model": {"delta_c": 10.0, "delta_l": 20.0},
}


def test_minimal_simulate_config(tmp_path):
    cfg = parse_config(write(tmp_path, MINIMAL))
    assert cfg.mode == "simulate"
    assert cfg.N == 1
    assert cfg.model.delta_l == 20.0


def test_negative_N_names_field(tmp_path):
    with pytest.raises(ConfigError, match="N") as exc:
        parse_config(write(tmp_path, {**MINIMAL, "truncation": {"N": -2}}))
    assert exc.value.location == "truncation.N"


def test_missing_sweep_section(tmp_path):
    with pytest.raises(ConfigError) as exc:
        parse_config(write(tmp_path, {"mode": "sweep"}))
    assert exc.value.location == "sweep"


def test_parse_error_has_line_and_column(tmp_path):
    path = write(tmp_path, '{\n  "mode": "oracle",\n  "truncation": {"N": 2,}\n}')
    with pytest.raises(ConfigError, match=r"line 3, column \d+"):
        parse_config(path)


def test_unknown_keys_rejected_with_location(tmp_path):
    with pytest.raises(ConfigError) as exc:
        parse_config(write(tmp_path, {**MINIMAL, "model": {"delta_x": 1}}))
    assert exc.value.location == "model.delta_x"
    with pytest.raises(ConfigError) as exc:
        parse_config(write(tmp_path, {**MINIMAL, "extra": 1}))
    assert exc.value.location == "extra"
    sweep = {"mode": "sweep", "sweep": {"integrator": {"step": 1}}}
    with pytest.raises(ConfigError) as exc:
        parse_config(write(tmp_path, sweep))
    assert exc.value.location == "sweep.integrator.step"


def test_semantic_errors_name_field(tmp_path):
    with pytest.raises(ConfigError) as exc:
        parse_config(write(tmp_path, {**MINIMAL, "integrator": {"dt": -1}}))
    assert exc.value.location == "integrator.dt"
    with pytest.raises(ConfigError) as exc:
        parse_config(write(tmp_path, {**MINIMAL, "qdist": {"source": "x"}}))
    assert exc.value.location == "qdist.source"


def test_overrides():
    data = apply_overrides(MINIMAL, ["model.delta_l=40", "sweep.N_values=[2,4]", "qdist.source=simulate"])
    assert data["model"]["delta_l"] == 40
    assert data["sweep"]["N_values"] == [2, 4]
    assert data["qdist"]["source"] == "simulate"
    assert MINIMAL["model"]["delta_l"] == 20.0
    with pytest.raises(ConfigError):
        apply_overrides(MINIMAL, ["model.delta_l"])
    with pytest.raises(ConfigError):
        apply_overrides(MINIMAL, ["mode.x=1"])


def test_output_dir_precedence(monkeypatch):
    data = {**MINIMAL, "output_dir": "from_file"}
    assert build_config(data).output_dir == "from_file"
    monkeypatch.setenv(OUTPUT_DIR_ENV, "from_env")
    assert build_config(data).output_dir == "from_env"
    assert build_config(data, output_dir="from_flag").output_dir == "from_flag"


def test_manifest_config_round_trips(tmp_path):
    cfg = parse_config(write(tmp_path, {"mode": "sweep", "sweep": {"N_values": [1, 2]}}))
    again = build_config(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


def test_estimate_command(tmp_path, capsys):
    out = tmp_path / "est"
    assert main(["estimate", "-o", str(out)]) == 0
    est = json.loads((out / "estimates.json").read_text())
    assert est["t_cnot_s"] == pytest.approx(5.2e-7, rel=0.02)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["version"]
    assert manifest["wall_time_s"] >= 0
    assert manifest["config"]["mode"] == "estimate"


def test_oracle_command_has_zero_at_half_period(tmp_path):
    out = tmp_path / "orc"
    args = ["oracle", "--set", "truncation.N=8", "--set", "oracle.points=5",
            "--set", f"oracle.omega_t_max={math.pi}", "-o", str(out)]
    assert main(args) == 0
    lines = (out / "oracle.csv").read_text().splitlines()
    assert lines[0] == "omega_t,E,E_norm"
    wt, E, _ = map(float, lines[3].split(","))
    assert wt == pytest.approx(math.pi / 2)
    assert E < 1e-9


def test_runs_are_deterministic(tmp_path):
    for name in ("a", "b"):
        args = ["qdist", "--set", "truncation.N=3", "--set", "qdist.resolution_theta=8",
                "--set", "qdist.resolution_phi=8", "-o", str(tmp_path / name)]
        assert main(args) == 0
    for f in ("qdist_k2_0.csv", "qdist_k2_3.csv", "qdist_manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_simulate_command_writes_trajectory_and_fit(tmp_path):
    out = tmp_path / "sim"
    args = ["simulate", "--set", "truncation.N=1", "--set", "integrator.dt=2",
            "--set", "simulate.n_records=50", "-o", str(out)]
    assert main(args) == 0
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header.startswith("t,omega_t,E,E_norm")
    fit = json.loads((out / "oracle_fit.json").read_text())
    assert 0.5 <= fit["scale"] <= 2.0


def test_simulate_from_qdist_source(tmp_path):
    out = tmp_path / "q"
    args = ["qdist", "--set", "truncation.N=2", "--set", "qdist.source=simulate",
            "--set", "integrator.dt=5", "--set", "qdist.resolution_theta=16",
            "--set", "qdist.resolution_phi=16", "-o", str(out)]
    assert main(args) == 0
    manifest = json.loads((out / "qdist_manifest.json").read_text())
    assert manifest["source"] == "simulate"
    assert 0.99 < manifest["ground_trace"] <= 1.0 + 1e-9


def test_sweep_command(tmp_path):
    out = tmp_path / "sw"
    args = ["sweep", "--set", "sweep.N_values=[1,2]", "--set", "sweep.integrator.dt=2", "-o", str(out)]
    assert main(args) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "N,delta_l_over_g,omega,E_ideal_norm,E_scheme_norm,delta_E,status"
    assert len(lines) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert "gamma" in manifest["results"]["power_law_fit"]


def test_exit_codes(tmp_path, capsys):
    assert main(["simulate", "--set", "truncation.N=-1", "-o", str(tmp_path)]) == 2
    assert "truncation.N" in capsys.readouterr().err
    assert main(["simulate", str(tmp_path / "missing.json")]) == 2
    failing = ["simulate", "--set", "truncation.N=1", "--set", "model.delta_l=0", "-o", str(tmp_path / "z")]
    assert main(failing) == 3
    manifest = json.loads((tmp_path / "z" / "manifest.json").read_text())
    assert manifest["status"] == 3 and "ZeroDivisionError" in manifest["error"]
    failing_sweep = ["sweep", "--set", "sweep.N_values=[1]", "--set", "sweep.delta_c=0", "-o", str(tmp_path / "s")]
    assert main(failing_sweep) == 3
    assert "failed" in (tmp_path / "s" / "sweep.csv").read_text()
