import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from longtail_lab import montecarlo as mc
from longtail_lab.artifacts import ConfigError, csv_header, json_document, validate_config
from longtail_lab.cli import main

FAMILY = {"family": "family1", "alpha": 0.5, "b": 1.0, "t": 1.0, "a": 3.0, "n_max": 6}


def write_cfg(tmp_path, body, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(body))
    return str(p)


def strip_stamp(text):
    return "\n".join(ln for ln in text.splitlines() if "generated_at" not in ln)


def test_schema_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        validate_config({"experiment": "classify", "family": FAMILY, "bogus": 1})
    with pytest.raises(ConfigError):
        validate_config({"experiment": "classify"})
    validate_config({"experiment": "acceptance-suite"})


def test_json_document_stamp_first_line():
    text = json_document({"b": 1, "a": float("inf")}, {"experiment": "x"}, "2026-01-01T00:00:00Z")
    lines = text.splitlines()
    assert lines[1] == '  "generated_at": "2026-01-01T00:00:00Z",'
    doc = json.loads(text)
    assert doc["a"] == "inf" and doc["schema_version"] == "longtail-lab/1"
    assert list(csv_header({}, stamp="s"))[0] == "generated_at"


def test_family_report(tmp_path):
    cfg = write_cfg(tmp_path, {"experiment": "family-report", "family": FAMILY})
    assert main(["family-report", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    doc = json.loads((tmp_path / "o" / "family_report.json").read_text())
    assert doc["norm_const"] == pytest.approx(1.2871197249598383, rel=1e-15)
    assert doc["ratio_trace"]["limit"] == 2.0
    assert doc["config"]["family"] == FAMILY


def test_bad_parameter_exit2_no_artifacts(tmp_path):
    bad = dict(FAMILY, alpha=1.5)
    cfg = write_cfg(tmp_path, {"experiment": "family-report", "family": bad})
    out = tmp_path / "o"
    assert main(["family-report", "--config", cfg, "--out", str(out)]) == 2
    assert not out.exists()


def test_experiment_mismatch_exit2(tmp_path):
    cfg = write_cfg(tmp_path, {"experiment": "classify", "family": FAMILY})
    assert main(["convolve", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_missing_config_exit2(tmp_path):
    assert main(["classify", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_convolve_idempotent_across_threads(tmp_path):
    body = {"experiment": "convolve", "family": FAMILY,
            "params": {"order": 2, "grid": {"n_points": 8, "depth": 2}}}
    cfg = write_cfg(tmp_path, body)
    assert main(["convolve", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["convolve", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    a = (tmp_path / "a" / "conv_order2.csv").read_text()
    b = (tmp_path / "b" / "conv_order2.csv").read_text()
    assert strip_stamp(a) == strip_stamp(b)
    rows = [ln for ln in a.splitlines() if not ln.startswith("#")]
    assert rows[0] == "x,log_x,density,density_err,tail,tail_err,scale_block_index"


def test_classify_subset(tmp_path):
    cfg = write_cfg(tmp_path, {"experiment": "classify", "family": FAMILY,
                               "params": {"order": 2}, "outputs": {"prefix": "ff_"}})
    assert main(["classify", "--config", cfg, "--out", str(tmp_path), "--classes", "L,OS"]) == 0
    doc = json.loads((tmp_path / "ff_class_report.json").read_text())
    text = json.dumps(doc)
    assert "consistent" in text
    assert main(["classify", "--config", cfg, "--out", str(tmp_path), "--classes", "XX"]) == 2


def test_compound_cli(tmp_path):
    cfg = write_cfg(tmp_path, {"experiment": "compound", "family": FAMILY,
                               "params": {"counting": {"kind": "poisson", "mu": 1.0}, "cstar2": 3.0,
                                          "grid": {"n_points": 4, "depth": 2}}})
    assert main(["compound", "--config", cfg, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "compound.json").read_text())
    assert doc["truncation_M"] == 11
    assert doc["bounds"]["limsup_over_F2"] == pytest.approx(0.9040235, abs=1e-6)


def test_oracle_cli_with_batch(tmp_path):
    cfg = write_cfg(tmp_path, {"experiment": "oracle-crosscheck", "family": FAMILY, "seed": 7,
                               "params": {"n_samples": 50_000, "export_batch": True}})
    assert main(["oracle-crosscheck", "--config", cfg, "--out", str(tmp_path)]) == 0
    batch = mc.load_batch(tmp_path / "samples_xi.npz")
    assert batch.seed == 7 and batch.n_samples == 50_000
    again = mc.sample_xi(FAMILY, 7, 50_000)
    assert np.array_equal(batch.log_values, again.log_values)


def test_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "longtail_lab.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for flag in ("--config", "--out", "--seed", "--threads"):
        assert flag in res.stdout
