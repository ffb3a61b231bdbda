"""Configuration resolution, provenance, and the command-line surface
(byte-determinism, embedded-config round trips, exit codes)."""

import json
import math

import numpy as np
import pytest

from fmesim import config as cfg_mod
from fmesim.cli import main
from fmesim.config import ConfigError

TWO_PI = 2.0 * math.pi


def test_preset_delta_converted_to_angular():
    cfg = cfg_mod.load_config(preset="rb85-87")
    params = cfg_mod.build_system_params(cfg)
    assert params.delta == pytest.approx(TWO_PI * 1.368e9)
    assert cfg.provenance["delta"] == "paper"


def test_preset_paper_values_exact():
    cfg = cfg_mod.load_config(preset="rb85-87")
    assert cfg.values["delta"] == 1.368e9
    assert cfg.values["delta_omega_write"] == 1.8995e9
    assert cfg.values["delta_omega_read"] == 1.368e9
    for key in ("delta", "delta_omega_write", "delta_omega_read"):
        assert cfg.provenance[key] == "paper"


def test_out_of_range_override_rejected():
    with pytest.raises(ConfigError, match="eta"):
        cfg_mod.load_config(preset="rb85-87", overrides=["eta=1.5"])


def test_empty_config_lists_missing_keys():
    with pytest.raises(ConfigError) as err:
        cfg_mod.load_config()
    message = str(err.value)
    for key in cfg_mod.REQUIRED_KEYS:
        assert key in message


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="no_such_key"):
        cfg_mod.load_config(preset="rb85-87", overrides=["no_such_key=1"])


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError, match="unknown preset"):
        cfg_mod.load_config(preset="cesium")


def test_complex_drive_from_pair():
    cfg = cfg_mod.load_config(
        preset="rb85-87", overrides=["omega_rabi_write_I=[0.0, 1.0e7]"]
    )
    params = cfg_mod.build_system_params(cfg)
    assert params.omega_W_I == pytest.approx(TWO_PI * 1.0e7j)


def test_timing_budget_enforced():
    with pytest.raises(ConfigError, match="cycle_period"):
        cfg_mod.load_config(preset="rb85-87", overrides=["tau_write=9e-6"])


def test_config_file_and_override_precedence(tmp_path):
    path = tmp_path / "cfg.json"
    base = cfg_mod.load_config(preset="rb85-87")
    data = base.serializable_values()
    data["eta"] = 0.8
    path.write_text(json.dumps(data))
    cfg = cfg_mod.load_config(path=str(path), overrides=["eta=0.9"])
    assert cfg.values["eta"] == 0.9
    assert cfg.provenance["eta"] == "user"


def test_dark_rate_not_angular():
    cfg = cfg_mod.load_config(preset="rb85-87")
    det = cfg_mod.build_detector(cfg)
    assert det.dark_rate == 400.0
    assert det.p_dark == pytest.approx(1.0 - math.exp(-4.0e-4))


def run_cli(*argv):
    return main(list(argv))


def test_preset_list_flags_paper_values(tmp_path, capsys):
    assert run_cli("preset-list") == 0
    out = capsys.readouterr().out
    assert "rb85-87" in out
    assert "delta = 1368000000.0 Hz [paper]" in out
    assert "delta_omega_write = 1899500000.0 Hz [paper]" in out
    assert "delta_omega_read = 1368000000.0 Hz [paper]" in out
    assert "[default]" in out
    # no untagged numeric lines: every key line carries a provenance flag
    for line in out.splitlines():
        if " = " in line:
            assert "[paper]" in line or "[default]" in line


def test_retrieve_reports_maximal_entanglement(tmp_path):
    out = tmp_path / "qubit.json"
    code = run_cli("retrieve", "--preset", "rb85-87", "--out", str(out))
    assert code == 0
    data = json.loads(out.read_text())
    assert data["concurrence"] == pytest.approx(1.0, abs=1e-10)
    assert data["retrieval_efficiency"] == 1.0
    assert data["omega_I_hz"] == pytest.approx(-1.368e9)
    assert data["metadata"]["provenance"]["delta"] == "paper"


def test_write_sim_output(tmp_path):
    out = tmp_path / "write.json"
    assert run_cli("write-sim", "--preset", "rb85-87", "--out", str(out)) == 0
    data = json.loads(out.read_text())
    p_i = complex(*data["derived_rates_rad_per_s"]["P_I"])
    assert 0.05 < abs(p_i) < 0.15
    occ = data["expected_occupation"]
    assert occ["photon"] == pytest.approx(occ["spin_I"] + occ["spin_II"], abs=1e-12)


def test_herald_output(tmp_path):
    out = tmp_path / "herald.json"
    assert run_cli("herald", "--preset", "rb85-87", "--out", str(out)) == 0
    data = json.loads(out.read_text())
    assert 0.0 < data["p_click"] < 1.0
    assert data["p_dark"] == pytest.approx(1.0 - math.exp(-4.0e-4))
    kinds = {b["kind"] for b in data["branches"]}
    assert kinds == {"photon", "dark"}
    amps = data["conditional_state_single_photon"]["amplitudes"]
    assert any(abs(complex(re, im)) > 0.5 for re, im in amps)


def test_protocol_byte_identical_across_runs_and_workers(tmp_path):
    args = ["protocol", "--preset", "rb85-87", "--seed", "42", "--runs", "200"]
    outs = []
    for name, extra in (("a", []), ("b", []), ("c", ["--workers", "3"])):
        path = tmp_path / f"{name}.csv"
        assert run_cli(*args, "--out", str(path), *extra) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] == outs[2]


def test_protocol_round_trip_from_embedded_config(tmp_path):
    first = tmp_path / "first.csv"
    assert run_cli(
        "protocol", "--preset", "rb85-87", "--seed", "7", "--runs", "50",
        "--out", str(first),
    ) == 0
    embedded = None
    for line in first.read_text().splitlines():
        if line.startswith("# config: "):
            embedded = json.loads(line[len("# config: "):])
    assert embedded is not None
    cfg_path = tmp_path / "embedded.json"
    cfg_path.write_text(json.dumps(embedded))
    second = tmp_path / "second.csv"
    assert run_cli(
        "protocol", "--config", str(cfg_path), "--seed", "7", "--out", str(second)
    ) == 0
    # identical data rows (comment lines differ only in provenance tags)
    rows1 = [l for l in first.read_text().splitlines() if not l.startswith("#")]
    rows2 = [l for l in second.read_text().splitlines() if not l.startswith("#")]
    assert rows1 == rows2


def test_protocol_json_format(tmp_path):
    out = tmp_path / "stats.json"
    assert run_cli(
        "protocol", "--preset", "rb85-87", "--seed", "1", "--runs", "50",
        "--format", "json", "--out", str(out),
    ) == 0
    data = json.loads(out.read_text())
    assert data["metadata"]["seed"] == 1
    row = data["results"][0]
    assert row["n_runs"] == 50
    assert 0.0 <= row["p_click"] <= 1.0


def test_sweep_dark_rates(tmp_path):
    out = tmp_path / "sweep.csv"
    assert run_cli(
        "sweep", "--preset", "rb85-87", "--seed", "5", "--runs", "100",
        "--sweep", "dark_rate_hz=400,50,5", "--out", str(out),
    ) == 0
    import csv as csv_mod

    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    parsed = list(csv_mod.reader(lines))
    header = parsed[0]
    rows = [dict(zip(header, row)) for row in parsed[1:]]
    assert [float(r["dark_rate_hz"]) for r in rows] == [400.0, 50.0, 5.0]
    analytic = [float(r["false_herald_analytic"]) for r in rows]
    assert analytic[0] > analytic[1] > analytic[2]


def test_bad_config_exits_2(capsys):
    assert run_cli("protocol", "--preset", "rb85-87", "--set", "eta=2.0") == 2
    assert "eta" in capsys.readouterr().err


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as err:
        run_cli("no-such-command")
    assert err.value.code == 2


def test_no_success_exits_3(tmp_path):
    out = tmp_path / "none.csv"
    code = run_cli(
        "protocol", "--preset", "rb85-87", "--seed", "2", "--runs", "2",
        "--set", "eta=0.0", "--set", "dark_rate_hz=0.0",
        "--set", "max_trials=5", "--out", str(out),
    )
    assert code == 3


def test_seed_changes_output(tmp_path):
    paths = [tmp_path / "s1.csv", tmp_path / "s2.csv"]
    for path, seed in zip(paths, ("1", "2")):
        assert run_cli(
            "protocol", "--preset", "rb85-87", "--seed", seed, "--runs", "100",
            "--out", str(path),
        ) == 0
    assert paths[0].read_bytes() != paths[1].read_bytes()
