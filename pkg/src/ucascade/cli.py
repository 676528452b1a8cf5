"""Command-line entry point: ``ucascade <command> [options]``.

Commands: calibrate, run, eval, ablate, gen-synth. Settings resolve as
CLI flag > ``--config`` JSON file > built-in default, and every command
prints the effective configuration as a ``# config:`` header line.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from . import plotting
from .backends.remote import ENDPOINT_ENV, RemoteBackend
from .backends.replay import ReplayDataset, SmallReplayBackend, replay_backends, write_replay
from .backends.synthetic import SyntheticBackend, synthetic_generate
from .calibration import file_fingerprint, load_thresholds, save_thresholds
from .cascade import CascadeConfig, StageTag, read_traces, run_batch, write_traces
from .errors import CascadeError, DegeneratePartition, InvalidInput
from .metrics import Acc2Convention, build_report, write_report_json, write_rows_csv
from .runner import (
    ablate,
    calibrate_dataset,
    dataset_scale,
    diagnostic_splits,
    sweep_grid,
    threshold_sweep,
    truths_of,
)
from .uncertainty import ESTIMATORS

log = logging.getLogger("ucascade")


@dataclass
class RunConfig:
    dataset: Optional[str] = None
    calibration: Optional[str] = None
    validation: Optional[str] = None
    out: Optional[str] = None
    lam: float = 0.5
    beta: float = 0.0
    epsilon: float = 1e-8
    estimator: str = "entropy"
    acc2_convention: str = "negnonneg"
    backend: str = "replay"
    endpoint: Optional[str] = None
    concurrency: int = 1
    continue_on_error: bool = False
    cross_verify: bool = True
    cv_fallback: str = "weighted_average"
    normalize_uncertainty: bool = False
    tau1: Optional[float] = None
    tau2: Optional[float] = None
    seed: int = 0
    profile: str = "mixed"
    figures: Optional[str] = None

    def validate(self):
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidInput(f"lambda must lie in [0, 1], got {self.lam}")
        if not self.epsilon > 0:
            raise InvalidInput(f"epsilon must be > 0, got {self.epsilon}")
        if self.concurrency < 1:
            raise InvalidInput("concurrency must be >= 1")
        if self.estimator not in ESTIMATORS:
            raise InvalidInput(f"unknown estimator {self.estimator!r}")
        Acc2Convention(self.acc2_convention)
        return self

    def cascade_config(self) -> CascadeConfig:
        return CascadeConfig(
            epsilon=self.epsilon,
            small_estimator=self.estimator,
            cross_verify=self.cross_verify,
            cv_fallback=self.cv_fallback,
            normalize_uncertainty=self.normalize_uncertainty,
            concurrency=self.concurrency,
            continue_on_error=self.continue_on_error,
        )


# config-file keys may use the spelled-out name
_ALIASES = {"lambda": "lam"}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        known = {f.name for f in fields(RunConfig)}
        for key, value in doc.items():
            key = _ALIASES.get(key, key).replace("-", "_")
            if key not in known:
                raise InvalidInput(f"{args.config}: unknown config key {key!r}")
            values[key] = value
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    if values.get("endpoint") is None and os.environ.get(ENDPOINT_ENV):
        values["endpoint"] = os.environ[ENDPOINT_ENV]
    return RunConfig(**values).validate()


def print_header(command: str, cfg: RunConfig):
    print(f"# config: {json.dumps({'command': command, **asdict(cfg)}, sort_keys=True)}")


def _need(cfg: RunConfig, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise InvalidInput(f"--{name.replace('_', '-')} is required")


def _load(path) -> ReplayDataset:
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return ReplayDataset.load(path)


def _backends(cfg: RunConfig, dataset: ReplayDataset):
    if cfg.backend == "replay":
        return replay_backends(dataset)
    scale = dataset_scale(dataset)
    scale_name = scale.name if scale else "mosi"
    if cfg.backend == "synthetic":
        return (SyntheticBackend("small", cfg.seed, cfg.profile, scale_name),
                SyntheticBackend("large", cfg.seed, cfg.profile, scale_name))
    if cfg.backend == "remote":
        return SmallReplayBackend(dataset), RemoteBackend(cfg.endpoint, max_concurrency=cfg.concurrency)
    raise InvalidInput(f"unknown backend {cfg.backend!r}")


def cmd_calibrate(cfg: RunConfig) -> int:
    _need(cfg, "dataset", "out")
    dataset = _load(cfg.dataset)
    try:
        pair = calibrate_dataset(dataset, cfg.lam, cfg.beta, cfg.estimator, file_fingerprint(cfg.dataset))
    except DegeneratePartition as exc:
        raise DegeneratePartition(
            f"{exc}. Hint: calibration needs both correctly and wrongly polarised validation "
            "predictions for each model; use a larger validation split.") from None
    save_thresholds(pair, cfg.out)
    for role, cal in (("small", pair.small), ("large", pair.large)):
        print(f"{role}\testimator={cal.estimator}\t"
              f"same: mu={cal.mu_same:.6f} sigma={cal.sigma_same:.6f} n={cal.n_same}\t"
              f"opposite: mu={cal.mu_opposite:.6f} sigma={cal.sigma_opposite:.6f} n={cal.n_opposite}\t"
              f"tau={cal.tau:.6f}")
    if cfg.figures:
        small, large = diagnostic_splits(dataset, cfg.estimator)
        plotting.plot_uncertainty_distributions(small, large, pair.tau1, pair.tau2,
                                                Path(cfg.figures) / "uncertainty_distributions.png")
    return 0


def cmd_run(cfg: RunConfig) -> int:
    _need(cfg, "dataset", "out")
    dataset = _load(cfg.dataset)
    if cfg.calibration is None:
        if cfg.tau1 is None or cfg.tau2 is None:
            raise InvalidInput("--calibration is required unless both --tau1 and --tau2 are given")
        from .calibration import ThresholdPair

        thresholds = ThresholdPair(cfg.tau1, cfg.tau2, cfg.lam, cfg.beta, cfg.estimator, "entropy")
    else:
        thresholds = load_thresholds(cfg.calibration).with_overrides(cfg.tau1, cfg.tau2)
    small, large = _backends(cfg, dataset)
    start = time.perf_counter()
    try:
        traces = run_batch(dataset.samples(), small, large, thresholds, cfg.cascade_config())
    finally:
        if isinstance(large, RemoteBackend):
            large.close()
    elapsed = time.perf_counter() - start
    write_traces(traces, cfg.out)
    counts = {tag.value: 0 for tag in StageTag}
    for t in traces:
        if t.outcome is not None:
            counts[t.outcome.value] += 1
    errors = sum(t.error is not None for t in traces)
    print(" ".join(f"{k}={v}" for k, v in counts.items()) + f" errors={errors} wall_time={elapsed:.3f}s")
    return 0


def cmd_eval(cfg: RunConfig, traces_path: str, table: Optional[str]) -> int:
    _need(cfg, "dataset")
    dataset = _load(cfg.dataset)
    traces = read_traces(traces_path)
    report = build_report(traces, truths_of(dataset), dataset_scale(dataset), cfg.acc2_convention)
    if cfg.out:
        write_report_json(report, cfg.out, config=asdict(cfg))
    if table:
        write_rows_csv([report.flat_row()], table)
    print(json.dumps(report.to_dict(), sort_keys=False))
    if cfg.figures:
        fig_dir = Path(cfg.figures)
        plotting.plot_stage_breakdown(report, fig_dir / "stage_breakdown.png")
        truths = truths_of(dataset)
        ok = [t for t in traces if t.error is None]
        plotting.plot_predictions([t.final for t in ok], [truths[t.sample_id] for t in ok],
                                  fig_dir / "predictions.png")
        if cfg.calibration:
            pair = load_thresholds(cfg.calibration)
            points = threshold_sweep(dataset, pair, sweep_grid(dataset, pair.small_estimator),
                                     CascadeConfig(small_estimator=pair.small_estimator))
            plotting.plot_threshold_sweep(points, fig_dir / "threshold_sweep.png")
    return 0


def cmd_ablate(cfg: RunConfig) -> int:
    _need(cfg, "dataset", "out")
    dataset = _load(cfg.dataset)
    validation = _load(cfg.validation) if cfg.validation else dataset
    rows = ablate(dataset, validation, lam=cfg.lam, beta=cfg.beta, epsilon=cfg.epsilon, seed=cfg.seed,
                  concurrency=cfg.concurrency, convention=cfg.acc2_convention)
    write_rows_csv(rows, cfg.out)
    print("variant\tmae\tacc2\tescalation\tcv_rate")
    for r in rows:
        print(f"{r['variant']}\t{r['mae']:.4f}\t{r['acc2']:.4f}\t{r['escalation_rate_stage2']:.4f}\t{r['cv_rate']:.4f}")
    if cfg.figures:
        plotting.plot_ablation(rows, Path(cfg.figures) / "ablation.png")
    return 0


def cmd_gen_synth(cfg: RunConfig, n: int, scale: str) -> int:
    _need(cfg, "out")
    write_replay(synthetic_generate(n, cfg.seed, cfg.profile, scale), cfg.out)
    print(f"wrote {n} synthetic records to {cfg.out}")
    return 0


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--dataset", help="replay dataset (JSONL)")
    p.add_argument("--out", help="output file")
    p.add_argument("--seed", type=int)
    p.add_argument("--figures", help="directory to render PNG figures into")
    p.add_argument("-v", "--verbose", action="store_true")


def _model_flags(p: argparse.ArgumentParser):
    p.add_argument("--lambda", dest="lam", type=float, help="threshold weight (default 0.5)")
    p.add_argument("--beta", type=float, help="threshold bias (default 0.0)")
    p.add_argument("--epsilon", type=float, help="weighted-average epsilon (default 1e-8)")
    p.add_argument("--estimator", choices=ESTIMATORS, help="small-model uncertainty estimator")
    p.add_argument("--acc2-convention", choices=[c.value for c in Acc2Convention])
    p.add_argument("--concurrency", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ucascade", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit tau1/tau2 on a validation replay file")
    _common(p)
    _model_flags(p)

    p = sub.add_parser("run", help="run the cascade and write one trace per sample")
    _common(p)
    _model_flags(p)
    p.add_argument("--calibration", help="calibration artifact from 'calibrate'")
    p.add_argument("--tau1", type=float, help="override tau1 (accepts inf/-inf)")
    p.add_argument("--tau2", type=float, help="override tau2 (accepts inf/-inf)")
    p.add_argument("--backend", choices=["replay", "synthetic", "remote"])
    p.add_argument("--endpoint", help=f"remote service URL (else ${ENDPOINT_ENV})")
    p.add_argument("--profile", help="synthetic difficulty profile")
    p.add_argument("--continue-on-error", action="store_true", default=None)
    p.add_argument("--no-cross-verify", dest="cross_verify", action="store_false", default=None)
    p.add_argument("--cv-fallback", choices=["weighted_average", "strict"])
    p.add_argument("--normalize-uncertainty", action="store_true", default=None)

    p = sub.add_parser("eval", help="score a trace file against dataset ground truth")
    _common(p)
    p.add_argument("--traces", required=True)
    p.add_argument("--table", help="also write a one-row CSV table")
    p.add_argument("--calibration", help="with --figures, adds a tau1 sweep plot")
    p.add_argument("--acc2-convention", choices=[c.value for c in Acc2Convention])

    p = sub.add_parser("ablate", help="compare the full system against its ablations")
    _common(p)
    _model_flags(p)
    p.add_argument("--validation", help="calibration split (default: the dataset itself)")

    p = sub.add_parser("gen-synth", help="write a seeded synthetic replay dataset")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--profile", help="mixed | easy | hard | constant difficulty in [0, 1]")
    p.add_argument("--scale", default="mosi", choices=["mosi", "mosei", "sims"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        print_header(args.command, cfg)
        if args.command == "calibrate":
            return cmd_calibrate(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.traces, args.table)
        if args.command == "ablate":
            return cmd_ablate(cfg)
        if args.command == "gen-synth":
            return cmd_gen_synth(cfg, args.n, args.scale)
    except (CascadeError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
