import csv
import json

import numpy as np
import pytest

from rsphase.cli import main
from rsphase.lattice import AtomChain


def read_manifest(out):
    with open(out / "manifest.json", encoding="utf-8") as fh:
        return json.load(fh)


def test_sample_writes_chain_and_manifest(tmp_path):
    assert main(["sample", "--out", str(tmp_path), "--seed", "5"]) == 0
    chain = AtomChain.from_json((tmp_path / "chain.json").read_text())
    assert chain.n == 30
    manifest = read_manifest(tmp_path)
    assert manifest["command"] == "sample"
    assert manifest["seed"] == 5
    assert "numpy" in manifest["versions"]


def test_sample_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["sample", "--out", str(a), "--seed", "9"])
    main(["sample", "--out", str(b), "--seed", "9"])
    assert (a / "chain.json").read_text() == (b / "chain.json").read_text()


def test_rsrg_single_realization(tmp_path):
    code = main(["rsrg", "--out", str(tmp_path), "--realizations", "1"])
    assert code == 0
    with open(tmp_path / "rsrg_curve.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["l_m_over_L", "survival", "Q0", "f0", "f1", "f2"]
    assert len(rows) > 10
    assert (tmp_path / "bonds.csv").exists()
    assert (tmp_path / "rsrg_norg_curve.csv").exists()


def test_flow_command(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "flow": {"p_fill": 0.3, "lm_max_over_L": 1.0, "dlnlm": 5e-3, "n_conv": 1000,
                 "lambda_max": 40.0},
    }))
    out = tmp_path / "run"
    assert main(["flow", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "flow_summary.json").read_text())
    assert abs(summary["final_normalization"] - 1.0) < 1e-3
    with open(out / "flow_curve.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "l_m_over_L"
    assert float(rows[1][1]) == 1.0
    manifest = read_manifest(out)
    assert manifest["config"]["flow"]["p_fill"] == 0.3


def test_jointflow_command(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "jointflow": {"p_fill": 0.3, "lm_max_over_L": 1.0, "dlnlm": 5e-3,
                      "n_conv": 1000, "lambda_max": 40.0, "n_max": 4},
    }))
    out = tmp_path / "run"
    assert main(["jointflow", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "jointflow_summary.json").read_text())
    assert 0.0 < summary["no_rg_unpaired"] < 1.0
    with open(out / "jointflow_curve.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert float(rows[1][3]) == pytest.approx(1.0)  # everything unnested at the start


def test_norg_command(tmp_path):
    code = main(["norg", "--out", str(tmp_path), "--realizations", "100"])
    assert code == 0
    summary = json.loads((tmp_path / "norg_summary.json").read_text())
    assert 0.05 < summary["unpaired_fraction"] < 0.3


def test_ed_compare_command(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"ed_compare": {"realizations": 5}}))
    code = main(["ed-compare", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "ed_compare_summary.json").read_text())
    assert summary["realizations"] == 5
    with open(tmp_path / "ed_compare.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["realization", "complete", "matches_rg"]
    assert len(rows) == 6


def test_sweep_two_atom_command(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "sweep": {"separations": [1, 2], "omega_lo": 0.05, "omega_hi": 2.0,
                  "per_decade": 8, "scan_tolerance": 1e-3},
    }))
    code = main(["sweep", "--two-atom", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 0
    with open(tmp_path / "sweep_records.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["seed", "bond_i", "bond_j", "j_eff", "omega_break", "censored_flag"]
    assert len(rows) == 3
    summary = json.loads((tmp_path / "sweep_summary.json").read_text())
    assert summary["n_records"] == 2
    assert "fit" in summary


def test_fidelity_command(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "fidelity": {"lm_max_over_L": 3.0, "omega_lo": 1e-3, "omega_hi": 1.0,
                     "per_decade": 10},
    }))
    code = main(["fidelity", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "fidelity_summary.json").read_text())
    assert 0.0 < summary["f_paired_star"] <= 1.0
    with open(tmp_path / "fidelity_curve.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["omega", "p_inc", "f_unpaired", "f_paired"]


def test_malformed_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["flow", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_missing_config_exits_2(tmp_path):
    assert main(["flow", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2


def test_bad_parameters_exit_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lattice": {"n_sites": -5}}))
    assert main(["sample", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_out_of_range_filling_exits_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"flow": {"p_fill": 2.0}}))
    assert main(["flow", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_numerical_failure_exits_3(tmp_path, monkeypatch):
    import rsphase.cli as cli

    def boom(*args, **kwargs):
        raise cli.flow.InstabilityError("distribution went negative")

    monkeypatch.setattr(cli.flow, "run_flow", boom)
    assert main(["flow", "--out", str(tmp_path)]) == 3
