from ucascade import plotting
from ucascade.backends.replay import replay_backends
from ucascade.calibration import ThresholdPair
from ucascade.cascade import run_batch
from ucascade.metrics import build_report
from ucascade.runner import diagnostic_splits, sweep_grid, threshold_sweep, truths_of

PNG = b"\x89PNG\r\n\x1a\n"


def _render_all(ds, out):
    small, large = replay_backends(ds)
    pair = ThresholdPair(0.6, 0.4)
    traces = run_batch(ds.samples(), small, large, pair)
    truths = truths_of(ds)
    rep = build_report(traces, truths)
    s, l = diagnostic_splits(ds)
    return [
        plotting.plot_uncertainty_distributions(s, l, pair.tau1, pair.tau2, out / "u.png"),
        plotting.plot_stage_breakdown(rep, out / "stages.png"),
        plotting.plot_predictions([t.final for t in traces], [truths[t.sample_id] for t in traces],
                                  out / "pred.png"),
        plotting.plot_threshold_sweep(threshold_sweep(ds, pair, sweep_grid(ds, points=5)), out / "sweep.png"),
        plotting.plot_ablation([{"variant": "a", "mae": 0.3, "escalation_rate_stage2": 0.5},
                                {"variant": "b", "mae": 0.4, "escalation_rate_stage2": 0.5}], out / "abl.png"),
    ]


def test_figures_written_and_byte_stable(tmp_path, synth200):
    a = _render_all(synth200, tmp_path / "a")
    b = _render_all(synth200, tmp_path / "b")
    for pa, pb in zip(a, b):
        data = pa.read_bytes()
        assert data[:8] == PNG and len(data) > 1000
        assert data == pb.read_bytes()


def test_empty_split_panel(tmp_path):
    path = plotting.plot_uncertainty_distributions(([0.1, 0.2], []), ([], [0.5]), 0.3, float("inf"),
                                                   tmp_path / "x.png")
    assert path.read_bytes()[:8] == PNG
