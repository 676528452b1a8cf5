import json

import pytest

from ucascade.backends.fake_server import FakeMLLMServer
from ucascade.backends.replay import ReplayDataset
from ucascade.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def synth_file(tmp_path):
    path = tmp_path / "synth.jsonl"
    assert run("gen-synth", "--n", 300, "--seed", 4, "--out", path) == 0
    return path


def test_calibrate_fixture(tmp_path, calibration_path, capsys):
    out = tmp_path / "cal.json"
    assert run("calibrate", "--dataset", calibration_path, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["lambda"] == 0.5 and doc["beta"] == 0.0
    assert doc["small"]["tau"] == pytest.approx(0.59, abs=1e-9)
    assert doc["large"]["tau"] == pytest.approx(0.48, abs=1e-9)
    assert doc["dataset_fingerprint"].startswith("sha256:")
    text = capsys.readouterr().out
    assert text.startswith("# config: ")
    assert "n=5" in text


def test_calibrate_missing_file(tmp_path, capsys):
    assert run("calibrate", "--dataset", tmp_path / "nope.jsonl", "--out", tmp_path / "c.json") != 0
    assert "nope.jsonl" in capsys.readouterr().err


def test_calibrate_degenerate(tmp_path, case_study_path, capsys):
    assert run("calibrate", "--dataset", case_study_path, "--out", tmp_path / "c.json") != 0
    assert "DegeneratePartition" in capsys.readouterr().err


def test_case_study_end_to_end(tmp_path, case_study_path, capsys):
    traces = tmp_path / "t.jsonl"
    assert run("run", "--dataset", case_study_path, "--tau1", 0.59, "--tau2", 0.48, "--out", traces) == 0
    t = json.loads(traces.read_text())
    assert t["outcome"] == "Stage3CrossVerify" and t["final"] == -0.5
    report = tmp_path / "r.json"
    assert run("eval", "--traces", traces, "--dataset", case_study_path, "--out", report) == 0
    assert json.loads(report.read_text())["mae"] == pytest.approx(0.1, abs=1e-15)


def test_tau1_max_all_stage1(tmp_path, synth_file):
    traces = tmp_path / "t.jsonl"
    assert run("run", "--dataset", synth_file, "--tau1", "inf", "--tau2", 0.0, "--out", traces) == 0
    lines = [json.loads(x) for x in traces.read_text().splitlines()]
    assert {x["outcome"] for x in lines} == {"Stage1Fast"}


def test_run_deterministic_and_concurrency_free(tmp_path, synth_file):
    cal = tmp_path / "cal.json"
    run("calibrate", "--dataset", synth_file, "--out", cal)
    outs = []
    for i, conc in enumerate((1, 1, 7)):
        out = tmp_path / f"t{i}.jsonl"
        assert run("run", "--dataset", synth_file, "--calibration", cal, "--out", out,
                   "--concurrency", conc) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_estimator_mismatch_aborts(tmp_path, synth_file, capsys):
    cal = tmp_path / "cal.json"
    run("calibrate", "--dataset", synth_file, "--out", cal, "--estimator", "ptd")
    assert run("run", "--dataset", synth_file, "--calibration", cal, "--out", tmp_path / "t.jsonl") != 0
    assert "EstimatorMismatch" in capsys.readouterr().err
    assert not (tmp_path / "t.jsonl").exists()


def test_eval_perfect(tmp_path, synth_file):
    ds = ReplayDataset.load(synth_file)
    traces = tmp_path / "t.jsonl"
    with open(traces, "w") as fh:
        for r in ds:
            fh.write(json.dumps({"sample_id": r["id"], "outcome": "Stage1Fast", "final": r["ground_truth"],
                                 "small_calls": 1}) + "\n")
    out, table = tmp_path / "r.json", tmp_path / "r.csv"
    assert run("eval", "--traces", traces, "--dataset", synth_file, "--out", out, "--table", table) == 0
    rep = json.loads(out.read_text())
    assert rep["mae"] == 0.0 and rep["acc7"] == 1.0 and rep["acc2"] == 1.0 and rep["f1"] == 1.0
    assert rep["config"]["dataset"] == str(synth_file)
    assert len(table.read_text().splitlines()) == 2


def test_eval_join_error(tmp_path, synth_file, case_study_path, capsys):
    traces = tmp_path / "t.jsonl"
    run("run", "--dataset", case_study_path, "--tau1", 0.59, "--tau2", 0.48, "--out", traces)
    assert run("eval", "--traces", traces, "--dataset", synth_file) != 0
    assert "JoinError" in capsys.readouterr().err


def test_ablate(tmp_path, synth_file, capsys):
    out = tmp_path / "abl.csv"
    assert run("ablate", "--dataset", synth_file, "--out", out, "--seed", 3) == 0
    rows = out.read_text().splitlines()
    assert [r.split(",")[0] for r in rows[1:]] == [
        "full", "no_cross_verify", "random_routing", "estimator_ptd", "estimator_ev"]
    first = out.read_bytes()
    run("ablate", "--dataset", synth_file, "--out", out, "--seed", 3)
    assert out.read_bytes() == first


def test_ablate_missing_fields(tmp_path, case_study_path, capsys):
    assert run("ablate", "--dataset", case_study_path, "--out", tmp_path / "a.csv") != 0
    err = capsys.readouterr().err
    assert "CapabilityError" in err and "small_aux_ptd" in err


def test_config_file_precedence(tmp_path, synth_file, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambda": 0.25, "beta": 0.1, "dataset": str(synth_file)}))
    out = tmp_path / "cal.json"
    assert run("calibrate", "--config", cfg, "--beta", 0.0, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["lambda"] == 0.25 and doc["beta"] == 0.0


def test_gen_synth_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run("gen-synth", "--n", 20, "--seed", 9, "--out", a)
    run("gen-synth", "--n", 20, "--seed", 9, "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_synthetic_backend_matches_replay(tmp_path, synth_file):
    cal = tmp_path / "cal.json"
    run("calibrate", "--dataset", synth_file, "--out", cal)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run("run", "--dataset", synth_file, "--calibration", cal, "--out", a)
    run("run", "--dataset", synth_file, "--calibration", cal, "--out", b, "--backend", "synthetic", "--seed", 4)
    assert a.read_bytes() == b.read_bytes()


def test_remote_backend_cli(tmp_path, case_study_path, monkeypatch):
    ds = ReplayDataset.load(case_study_path)
    out = tmp_path / "t.jsonl"
    with FakeMLLMServer(ds) as srv:
        monkeypatch.setenv("UCASCADE_ENDPOINT", srv.url)
        assert run("run", "--dataset", case_study_path, "--tau1", 0.59, "--tau2", 0.48,
                   "--backend", "remote", "--out", out) == 0
    assert json.loads(out.read_text())["final"] == -0.5


def test_figures(tmp_path, synth_file):
    figs = tmp_path / "figs"
    cal = tmp_path / "cal.json"
    traces = tmp_path / "t.jsonl"
    assert run("calibrate", "--dataset", synth_file, "--out", cal, "--figures", figs) == 0
    run("run", "--dataset", synth_file, "--calibration", cal, "--out", traces)
    assert run("eval", "--traces", traces, "--dataset", synth_file, "--calibration", cal, "--figures", figs) == 0
    assert run("ablate", "--dataset", synth_file, "--out", tmp_path / "a.csv", "--figures", figs) == 0
    names = sorted(p.name for p in figs.iterdir())
    assert names == ["ablation.png", "predictions.png", "stage_breakdown.png", "threshold_sweep.png",
                     "uncertainty_distributions.png"]
    assert all(p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n" for p in figs.iterdir())


def test_inputs_not_mutated(tmp_path, synth_file):
    before = synth_file.read_bytes()
    cal = tmp_path / "cal.json"
    run("calibrate", "--dataset", synth_file, "--out", cal)
    run("run", "--dataset", synth_file, "--calibration", cal, "--out", tmp_path / "t.jsonl")
    run("ablate", "--dataset", synth_file, "--out", tmp_path / "a.csv")
    assert synth_file.read_bytes() == before
