import json

import pytest

from otfkm import report
from otfkm.cli import main, parse_manifold
from otfkm.errors import ConfigError, OtfkmError
from otfkm.manifolds import ManifoldId
from otfkm.report import CLAIMS, SUITES, Claim, RunConfig, audit, run

FAST = ("clifford", "forms", "manifolds")


def small(**kw):
    cfg = RunConfig(m=1, k=3, suites=FAST, **kw)
    cfg.samples = report.override_samples(cfg.samples, 5)
    return cfg


def test_audit_is_complete():
    a = audit()
    assert a["unclaimed"] == [] and a["duplicated"] == [] and a["unknown_anchors"] == []
    assert a["duplicate_ids"] == []
    assert {c.suite for c in CLAIMS} == set(SUITES)


def test_report_is_deterministic(tmp_path):
    a = run(small()).to_json(timings=False)
    b = run(small(out=str(tmp_path))).to_json(timings=False)
    assert a == b
    doc = json.loads((tmp_path / "report.json").read_text())
    assert set(doc) == {"version", "config", "system", "claims", "summary", "timings"}
    assert (tmp_path / "points").is_dir()


def test_threads_do_not_change_report():
    cfg = RunConfig(m=1, k=3, suites=("clifford", "curvature", "focal"))
    cfg.samples = report.override_samples(cfg.samples, 3)
    a = run(cfg).to_json(timings=False)
    cfg.threads = 3
    assert run(cfg).to_json(timings=False) == a


def test_statuses_and_exit_code():
    rep = run(small())
    assert rep.exit_code == 0
    assert all(c.status in report.STATUSES for c in rep.claims)
    status = {c.id: c.status for c in rep.claims}
    assert status["clifford.extension"] == "NOT-APPLICABLE"
    assert status["manifolds.quaternion_charts"] == "NOT-APPLICABLE"


def test_module_errors_become_failures(monkeypatch):
    def boom(ctx):
        raise OtfkmError("synthetic")
    broken = Claim("forms.broken", "cartan-munzner-equations", "forms", "EXACT", boom)
    monkeypatch.setattr(report, "CLAIMS", report.CLAIMS + (broken,))
    rep = run(small())
    outcome = [c for c in rep.claims if c.id == "forms.broken"][0]
    assert outcome.status == "FAIL" and outcome.metrics["error"] == "OtfkmError"
    assert rep.exit_code == 1


def test_estimate_failures_do_not_gate(monkeypatch):
    est = Claim("forms.estimate", "estimator-calibration", "forms", "ESTIMATE", lambda ctx: ("FAIL", {}))
    monkeypatch.setattr(report, "CLAIMS", report.CLAIMS + (est,))
    rep = run(small())
    assert [c.status for c in rep.claims if c.id == "forms.estimate"] == ["ESTIMATE-FAIL"]
    assert rep.exit_code == 0


def test_discriminant_claim_homogeneous():
    rep = run(RunConfig(m=4, k=2, variant="q-same", suites=("clifford",)))
    status = {c.id: c.status for c in rep.claims}
    assert status["clifford.product_discriminant"] == "PASS"
    assert status["clifford.extension"] == "PASS"


@pytest.mark.parametrize("doc", [
    {"suites": ["nope"]},
    {"tolerances": {"munzner": -1.0}},
    {"samples": {"munzner": 0}},
    {"m": 2, "k": 1},
    {"m": 3, "variant": "q-same"},
    {"threads": 0},
])
def test_config_validation(doc):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(doc).validate()


def test_config_unknown_key():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"colour": "blue"})


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"m": 2, "k": 2, "seed": 4, "samples": 5, "suites": ["clifford"]}))
    out = tmp_path / "out"
    assert main(["verify", "--config", str(cfg), "--m", "1", "--k", "3", "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["system"]["label"] == "m1_l3_standard"
    assert doc["config"]["seed"] == 4 and doc["config"]["suites"] == ["clifford"]


def test_cli_errors(capsys):
    assert main(["verify", "--m", "0", "--k", "1"]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["report-audit"]) == 0
    assert json.loads(capsys.readouterr().out)["unclaimed"] == []


def test_cli_sample_and_sigma(tmp_path, capsys):
    assert main(["sample", "--m", "1", "--k", "3", "--manifold", "U:0:0.5", "-n", "4", "--out", str(tmp_path)]) == 0
    files = list((tmp_path / "points").iterdir())
    assert len(files) == 1 and len(files[0].read_text().splitlines()) == 5
    assert main(["sigma", "--m", "1", "--k", "3", "--restarts", "4", "--out", str(tmp_path)]) == 0
    cert = json.loads((tmp_path / "sigma_plus.json").read_text())
    assert abs(cert["sigma_hat"] - 1) <= 1e-4


def test_cli_sample_invalid_manifold(tmp_path, capsys):
    assert main(["sample", "--m", "1", "--k", "3", "--manifold", "M:4", "--out", str(tmp_path)]) == 3


@pytest.mark.parametrize("text,mid", [
    ("S", ManifoldId.sphere()), ("M:2", ManifoldId.M(2)), ("U:0:0.5", ManifoldId.level_u(0, 0.5)),
    ("focalV:1:-1", ManifoldId.focal_v(1, -1)), ("Mt:0.3", ManifoldId.hypersurface(0.3)),
])
def test_parse_manifold(text, mid):
    assert parse_manifold(text) == mid


def test_default_pipeline_smallest_system():
    rep = run(RunConfig())
    exact = [c for c in rep.claims if c.label == "EXACT"]
    assert all(c.status in ("PASS", "NOT-APPLICABLE") for c in exact), [c.id for c in exact if c.status == "FAIL"]
    assert rep.exit_code == 0
