from __future__ import annotations

import json
import subprocess
import sys

import pytest

from cli_fixtures import write_run
from ppminspect.cli import main
from ppminspect.config import ConfigFileError, load_config, parse_config
from ppminspect.eventlog import ContainsActivity
from ppminspect.prep import REMAINING_TIME


def base(**extra):
    return {"version": 1, "log": {"path": "log.csv"}, "target": {"kind": "remaining_time"}, **extra}


# --- configuration -----------------------------------------------------------------


def test_parse_minimal_and_method(tmp_path):
    cfg = parse_config(base(method="prefix_index"), tmp_path)
    assert cfg.log_path == tmp_path / "log.csv"
    assert cfg.target == REMAINING_TIME and not cfg.is_outcome
    assert cfg.bucketing == "prefix_length" and "index" in cfg.encodings
    cfg = parse_config(base(target={"kind": "outcome", "label": {"type": "contains_activity", "activity": "X"}}))
    assert cfg.target == ContainsActivity("X") and cfg.pipeline.metric == "auc"


@pytest.mark.parametrize(
    "data, field",
    [
        ({"log": {"path": "l.csv"}, "target": {"kind": "remaining_time"}}, "version"),
        (base(log={}), "log.path"),
        (base(log={"path": "l.csv", "sheet": 1}), "sheet"),
        (base(target={"kind": "duration"}), "target.kind"),
        (base(target={"kind": "outcome"}), "target.label"),
        (base(target={"kind": "outcome", "label": {"type": "weird"}}), "target.label"),
        (base(method="cluster_agg"), "method"),
        (base(bucketing="cluster"), "bucketing"),
        (base(encodings=["index"]), "encodings"),
        (base(encodings=["wavelet"]), "encodings"),
        (base(prefix={"min": 0}), "prefix.min"),
        (base(prefix={"min": 5, "max": 2}), "prefix.min"),
        (base(prefix={"step": 2}), "step"),
        (base(split_ratio=1.0), "split_ratio"),
        (base(seed=-1), "seed"),
        (base(hyperparams={"n_rounds": 0}), "hyperparams"),
        (base(hyperparams={"eta": 0.1}), "eta"),
        (base(explanation={"global_method": "shap"}), "explanation"),
        (base(inspection={"leak_ratio": 2}), "inspection"),
    ],
)
def test_config_errors_name_the_field(data, field):
    with pytest.raises(ConfigFileError, match=field.replace(".", r"\.")):
        parse_config(data)


def test_load_config_file_errors(tmp_path):
    with pytest.raises(ConfigFileError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "version": 1,\n  oops\n}')
    with pytest.raises(ConfigFileError, match="line 3"):
        load_config(bad)


def test_digest_ignores_directory(tmp_path):
    a = parse_config(base(), tmp_path / "a")
    b = parse_config(base(), tmp_path / "b")
    assert a.digest() == b.digest() != parse_config(base(seed=1)).digest()


# --- commands ------------------------------------------------------------------------


def test_validate_writes_schema_report(tmp_path, capsys):
    cfg = write_run(tmp_path)
    assert main(["validate", "--config", str(cfg)]) == 0
    report = json.loads((tmp_path / "out" / "schema_report.json").read_text())
    assert report["n_cases"] == 200 and report["positive_cases"] == 100
    assert "200 cases" in capsys.readouterr().out


def test_validate_missing_activity_column_exits_2(tmp_path, capsys):
    cfg = write_run(tmp_path)
    log = tmp_path / "log.csv"
    lines = log.read_text().splitlines()
    log.write_text("\n".join(line.replace("activity", "task", 1) if i == 0 else line for i, line in enumerate(lines)))
    assert main(["validate", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and "activity" in err


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 2
    assert "not found" in capsys.readouterr().err


def test_train_writes_metrics_and_plot_data(tmp_path):
    cfg = write_run(tmp_path)
    out = tmp_path / "train"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["metric"] == "auc" and metrics["auc"] is not None
    rows = (out / "plot_data.csv").read_text().splitlines()
    assert rows[0] == "prefix_length,metric_name,value"
    assert all(r.split(",")[1] == "auc" for r in rows[1:]) and len(rows) > 1
    assert (out / "models" / "single.json").exists()


def test_explain_local_file(tmp_path, capsys):
    cfg = write_run(tmp_path)
    out = tmp_path / "ex"
    assert main(["explain", "--config", str(cfg), "--out", str(out), "--case", "case0199", "--prefix", "3"]) == 0
    local = json.loads((out / "local_case0199_3.json").read_text())
    assert local["row_id"] == {"case_id": "case0199", "prefix_length": 3}
    assert len(local["attributions"]) <= 10
    assert json.loads((out / "global_explanation.json").read_text())["single"]["method"] == "gain"
    assert main(["explain", "--config", str(cfg), "--out", str(out), "--case", "case0199"]) == 2
    assert main(["explain", "--config", str(cfg), "--out", str(out), "--case", "nope", "--prefix", "3"]) == 2


def test_mine_outputs(tmp_path):
    cfg = write_run(tmp_path)
    assert main(["mine", "--config", str(cfg)]) == 0
    stats = json.loads((tmp_path / "out" / "mining_stats.json").read_text())
    assert stats["label_activity"] == "X"
    assert stats["eventually_follows_ratio"]["Y"] == 0.7
    assert stats["precedes_ratio"]["Z"] == 0.5
    assert (tmp_path / "out" / "dfg.dot").read_text().startswith("digraph")


def test_inspect_strict_flags_direct_leakage(tmp_path, capsys):
    cfg = write_run(tmp_path)
    assert main(["inspect", "--config", str(cfg), "--strict"]) == 1
    report = json.loads((tmp_path / "out" / "inspection_report.json").read_text())
    kinds = {(f["kind"], f["evidence"].get("activity")) for f in report["findings"]}
    assert ("DirectLeakage", "X") in kinds
    assert ("CorrelatedLeakage", "Y") in kinds and ("CorrelatedLeakage", "Z") in kinds
    assert report["metadata"]["seed"] == 0 and report["metadata"]["importance_method"] == "gain"
    assert main(["inspect", "--config", str(cfg)]) == 0


def test_inspect_regression_and_seed_override(tmp_path):
    cfg = write_run(tmp_path, "static")
    assert main(["inspect", "--config", str(cfg), "--seed", "7"]) == 0
    report = json.loads((tmp_path / "out" / "inspection_report.json").read_text())
    assert report["metadata"]["seed"] == 7
    assert any(f["kind"] == "StaticDominance" for f in report["findings"])
    assert main(["inspect", "--config", str(cfg), "--seed", "-1"]) == 2


def test_outputs_are_byte_identical_across_runs(tmp_path):
    cfg = write_run(tmp_path, explanation={"global_method": "permutation", "n_samples": 500, "local_instances": 2})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["inspect", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["inspect", "--config", str(cfg), "--out", str(b)]) == 0
    names = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert names == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_console_entry_point(tmp_path):
    cfg = write_run(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "ppminspect.cli", "validate", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "ppminspect.cli", "--version"], capture_output=True, text=True)
    assert proc.stdout.startswith("ppminspect ")
