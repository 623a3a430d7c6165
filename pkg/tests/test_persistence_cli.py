import json
import subprocess
import sys

import numpy as np
import pytest

from harmonicflow import (
    FlowControl,
    MapField,
    constant_map,
    fit_exponent,
    perturbed_constant_map,
    run_flow,
)
from harmonicflow.checkpoint import (
    export_trace,
    load_checkpoint,
    read_trace,
    save_checkpoint,
)
from harmonicflow.cli import main as cli_main
from harmonicflow.config import parse_config
from harmonicflow.errors import (
    CheckpointParseError,
    CheckpointVersionError,
    ConfigError,
    EmptyTrace,
    OffTarget,
    SpecMismatch,
)
from harmonicflow.flow import FlowSample, FlowTrace
from harmonicflow.rng import stream


# ---------------------------------------------------------------------------
# checkpoints

def test_checkpoint_roundtrip_bit_identical(ico2, s2, tmp_path):
    f = perturbed_constant_map(ico2, s2, 0.1, stream(1, "ck"))
    path = tmp_path / "ck.json"
    save_checkpoint(f, {"step": 3, "time": 0.125, "energy": 0.5}, str(path))
    g, meta = load_checkpoint(str(path), mesh=ico2, target=s2)
    assert np.array_equal(g.values, f.values)
    assert meta["step"] == 3
    assert float(meta["time"]) == 0.125


def test_checkpoint_self_contained_reload(ico2, s2, tmp_path):
    f = constant_map(ico2, s2)
    path = tmp_path / "ck.json"
    save_checkpoint(f, {"step": 0}, str(path))
    g, _ = load_checkpoint(str(path))  # rebuilds mesh and target from the echo
    assert g.mesh.spec == ico2.spec
    assert g.target.spec() == s2.spec()
    assert np.array_equal(g.values, f.values)


def test_checkpoint_version_error(ico2, s2, tmp_path):
    f = constant_map(ico2, s2)
    path = tmp_path / "ck.json"
    save_checkpoint(f, {}, str(path))
    payload = json.loads(path.read_text())
    payload["format_version"] = 99
    path.write_text(json.dumps(payload))
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(str(path))


def test_checkpoint_truncated_file(ico2, s2, tmp_path):
    f = constant_map(ico2, s2)
    path = tmp_path / "ck.json"
    save_checkpoint(f, {}, str(path))
    path.write_text(path.read_text()[: len(path.read_text()) // 2])
    with pytest.raises(CheckpointParseError):
        load_checkpoint(str(path))


def test_checkpoint_off_target_rejected(ico2, s2, tmp_path):
    f = constant_map(ico2, s2)
    path = tmp_path / "ck.json"
    save_checkpoint(f, {}, str(path))
    payload = json.loads(path.read_text())
    payload["values"][0] = ["1.5", "0", "0"]
    path.write_text(json.dumps(payload))
    with pytest.raises(OffTarget):
        load_checkpoint(str(path))


def test_checkpoint_spec_mismatch(ico2, ico3, s2, tmp_path):
    f = constant_map(ico2, s2)
    path = tmp_path / "ck.json"
    save_checkpoint(f, {}, str(path))
    with pytest.raises(SpecMismatch):
        load_checkpoint(str(path), mesh=ico3, target=s2)


# ---------------------------------------------------------------------------
# trace CSV

def one_sample_trace():
    tr = FlowTrace()
    tr.samples.append(FlowSample(0.0, 1.0, 0.5, float("nan"), 0.0))
    return tr


def test_trace_export_two_lines(tmp_path):
    path = tmp_path / "trace.csv"
    export_trace(one_sample_trace(), str(path))
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert lines[0] == "t,energy,grad_norm_l2,dist_to_limit,dt"


def test_trace_export_empty_raises(tmp_path):
    with pytest.raises(EmptyTrace):
        export_trace(FlowTrace(), str(tmp_path / "t.csv"))


def test_trace_reload_and_refit_identical(ico2, s2, tmp_path):
    f0 = perturbed_constant_map(ico2, s2, 0.1, stream(2, "csv"))
    tr = run_flow(f0, FlowControl(dt0=1e-5, grad_tol=1e-9))
    f_inf = MapField(tr.final_values, s2, ico2)
    fit_mem = fit_exponent(tr, f_inf)
    path = tmp_path / "trace.csv"
    export_trace(tr, str(path))
    data = read_trace(str(path))
    reparsed = FlowTrace()
    for i in range(len(data["t"])):
        reparsed.samples.append(
            FlowSample(
                data["t"][i], data["energy"][i], data["grad_norm_l2"][i],
                data["dist_to_limit"][i], data["dt"][i],
            )
        )
    fit_csv = fit_exponent(reparsed, f_inf, window=fit_mem.window)
    assert abs(fit_csv.theta_hat - fit_mem.theta_hat) <= 1e-12
    assert abs(fit_csv.z_hat - fit_mem.z_hat) <= 1e-12 * fit_mem.z_hat


# ---------------------------------------------------------------------------
# configuration

BASE_CFG = """
[scenario]
seed = 7
analyses = {analyses}

[mesh]
kind = icosphere
level = 2

[target]
kind = sphere
ambient_dim = 3

[initial_map]
kind = perturbed_constant
amplitude = 0.1

[flow]
dt0 = 1e-5
grad_tol = 1e-8
"""


def write_cfg(tmp_path, body, name="scn.cfg"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


def test_parse_config_minimal(tmp_path):
    path = write_cfg(tmp_path, BASE_CFG.format(analyses=""))
    scn = parse_config(path)
    assert scn.seed == 7
    assert scn.analyses == []
    assert scn.mesh["level"] == 2


def test_unknown_key_rejected(tmp_path):
    path = write_cfg(tmp_path, BASE_CFG.format(analyses="") + "\nwibble = 3\n")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_unknown_section_rejected(tmp_path):
    path = write_cfg(tmp_path, BASE_CFG.format(analyses="") + "\n[plotting]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_unknown_analysis_rejected(tmp_path):
    path = write_cfg(tmp_path, BASE_CFG.format(analyses="dance"))
    with pytest.raises(ConfigError):
        parse_config(path)


def test_missing_required_key(tmp_path):
    cfg = BASE_CFG.format(analyses="").replace("seed = 7\n", "")
    with pytest.raises(ConfigError):
        parse_config(write_cfg(tmp_path, cfg))


# ---------------------------------------------------------------------------
# CLI

def test_cli_manifest_only_run(tmp_path):
    path = write_cfg(tmp_path, BASE_CFG.format(analyses=""))
    out = tmp_path / "out"
    rc = cli_main(["run", path, "--out", str(out)])
    assert rc == 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["seed"] == 7
    assert manifest["outputs"] == []


def test_cli_flow_and_manifest_hashes(tmp_path):
    path = write_cfg(tmp_path, BASE_CFG.format(analyses="flow, loja-fit"))
    out = tmp_path / "out"
    rc = cli_main(["run", path, "--out", str(out)])
    assert rc == 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    listed = {o["path"] for o in manifest["outputs"]}
    assert {"trace.csv", "final_map.json", "flow_summary.json", "loja_fit.json"} <= listed
    import hashlib

    for entry in manifest["outputs"]:
        digest = hashlib.sha256((out / entry["path"]).read_bytes()).hexdigest()
        assert digest == entry["sha256"]
    fit = json.loads((out / "loja_fit.json").read_text())
    assert 0.4 <= fit["theta_hat"] <= 0.6


def test_cli_bad_config_exit_2(tmp_path):
    path = write_cfg(tmp_path, BASE_CFG.format(analyses="") + "\ntypo = 1\n")
    assert cli_main(["run", path]) == 2


def test_cli_missing_config_exit_2(tmp_path):
    assert cli_main(["run", str(tmp_path / "nope.cfg")]) == 2


def test_cli_inadmissible_verify_exit_2(tmp_path, capsys):
    cfg = BASE_CFG.format(analyses="verify") + "\n[verify]\nk = 1\np = 2\nvariant = l2\n"
    path = write_cfg(tmp_path, cfg)
    rc = cli_main(["run", path, "--out", str(tmp_path / "out")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "kp > d" in err


def test_cli_single_analysis_subcommand(tmp_path):
    path = write_cfg(tmp_path, BASE_CFG.format(analyses=""))
    out = tmp_path / "out"
    rc = cli_main(["chart-audit", path, "--out", str(out)])
    assert rc == 0
    rep = json.loads((out / "chart_report.json").read_text())
    assert rep["c4_estimate"] >= 1.0


def test_cli_mult_probe(tmp_path):
    cfg = BASE_CFG.format(analyses="mult-probe") + "\n[mult_probe]\nlevels = 8, 16\ntrials = 4\n"
    path = write_cfg(tmp_path, cfg)
    out = tmp_path / "out"
    assert cli_main(["run", path, "--out", str(out)]) == 0
    probe = json.loads((out / "mult_probe.json").read_text())
    assert len(probe["levels"]) == 2


def test_cli_hessian_spec_with_morse_bott(tmp_path):
    cfg = BASE_CFG.format(analyses="hessian-spec").replace(
        "kind = perturbed_constant\namplitude = 0.1", "kind = constant"
    )
    cfg += "\n[hessian]\nexpected_critical_dim = 2\n"
    path = write_cfg(tmp_path, cfg)
    out = tmp_path / "out"
    assert cli_main(["run", path, "--out", str(out)]) == 0
    spec = json.loads((out / "hessian_spectrum.json").read_text())
    assert spec["kernel_dim"] == 2
    mb = json.loads((out / "morse_bott.json").read_text())
    assert mb["verdict"] == "morse_bott"


def test_cli_from_checkpoint_roundtrip(tmp_path, ico2, s2):
    f = perturbed_constant_map(ico2, s2, 0.1, stream(3, "cli-ck"))
    ck = tmp_path / "start.json"
    save_checkpoint(f, {"step": 0}, str(ck))
    cfg = BASE_CFG.format(analyses="flow").replace(
        "kind = perturbed_constant\namplitude = 0.1", f"kind = from_checkpoint\npath = {ck}"
    )
    path = write_cfg(tmp_path, cfg)
    out = tmp_path / "out"
    assert cli_main(["run", path, "--out", str(out)]) == 0
    assert (out / "trace.csv").exists()


def test_cli_checkpoint_mesh_mismatch_exit_2(tmp_path, ico3, s2):
    f = constant_map(ico3, s2)
    ck = tmp_path / "start.json"
    save_checkpoint(f, {"step": 0}, str(ck))
    cfg = BASE_CFG.format(analyses="flow").replace(
        "kind = perturbed_constant\namplitude = 0.1", f"kind = from_checkpoint\npath = {ck}"
    )
    path = write_cfg(tmp_path, cfg)
    assert cli_main(["run", path, "--out", str(tmp_path / "out")]) == 2


def test_cli_validate_exponents_subcommand(capsys):
    assert cli_main(["validate-exponents", "2", "1", "3", "wk"]) == 0
    assert cli_main(["validate-exponents", "4", "1", "5", "l2"]) == 2
    err_out = capsys.readouterr().out
    assert "d < 4" in err_out


def test_cli_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("HARMONICFLOW_OUT", str(tmp_path / "root"))
    cfg = BASE_CFG.format(analyses="") + "\n"
    cfg = cfg.replace("[scenario]", "[scenario]\noutput_dir = nested")
    path = write_cfg(tmp_path, cfg)
    assert cli_main(["run", path]) == 0
    assert (tmp_path / "root" / "nested" / "run_manifest.json").exists()


def test_cli_entry_point_subprocess(tmp_path):
    path = write_cfg(tmp_path, BASE_CFG.format(analyses=""))
    proc = subprocess.run(
        [sys.executable, "-m", "harmonicflow.cli", "run", path, "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
