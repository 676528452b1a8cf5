"""Library-level workflows behind the CLI: calibration, runs, ablations."""

from __future__ import annotations

import math

import numpy as np

from .backends.replay import ReplayDataset, output_from_record, replay_backends
from .backends.synthetic import stream_seed
from .calibration import (
    DEFAULT_BETA,
    DEFAULT_LAMBDA,
    ThresholdPair,
    calibrate,
    correctness_split,
)
from .cascade import CascadeConfig, StageTag, run_batch
from .core import get_scale
from .errors import CapabilityError, SchemaError
from .metrics import Acc2Convention, build_report
from .uncertainty import ENTROPY, EV, PTD, estimate

ESTIMATOR_FIELDS = {PTD: "small_aux_ptd", EV: "small_ensemble"}


def validation_records(dataset: ReplayDataset, role: str, estimator: str = ENTROPY) -> list[tuple]:
    """(predicted, truth, uncertainty) triples for one model of a replay file."""
    out = []
    for rec in dataset:
        if rec.get("ground_truth") is None:
            raise SchemaError(f"validation record {rec['id']!r} has no ground_truth")
        mo = output_from_record(rec, role)
        out.append((mo.score, float(rec["ground_truth"]), estimate(mo, estimator)))
    return out


def require_estimator(dataset: ReplayDataset, estimator: str) -> None:
    key = ESTIMATOR_FIELDS.get(estimator)
    if key is None:
        return
    missing = [r["id"] for r in dataset if r.get(key) is None]
    if missing:
        raise CapabilityError(
            f"estimator {estimator!r} needs field {key!r}, missing in {len(missing)} records "
            f"(e.g. {missing[:3]})")


def calibrate_dataset(dataset: ReplayDataset, lam=DEFAULT_LAMBDA, beta=DEFAULT_BETA,
                      estimator: str = ENTROPY, fingerprint=None) -> ThresholdPair:
    require_estimator(dataset, estimator)
    return calibrate(validation_records(dataset, "small", estimator),
                     validation_records(dataset, "large", ENTROPY), lam, beta, fingerprint)


def diagnostic_splits(dataset: ReplayDataset, estimator: str = ENTROPY):
    small = correctness_split(validation_records(dataset, "small", estimator))
    large = correctness_split(validation_records(dataset, "large", ENTROPY))
    return small, large


def truths_of(dataset: ReplayDataset) -> dict:
    truths = {}
    for rec in dataset:
        if rec.get("ground_truth") is None:
            raise SchemaError(f"record {rec['id']!r} has no ground_truth")
        truths[rec["id"]] = float(rec["ground_truth"])
    return truths


def dataset_scale(dataset: ReplayDataset):
    names = {rec["scale"] for rec in dataset}
    if len(names) != 1:
        return None
    return get_scale(names.pop())


def random_escalation(ids, k: int, seed: int) -> dict:
    """Escalate exactly ``k`` uniformly chosen ids, from the ablation's own seed stream."""
    rng = np.random.default_rng(stream_seed(seed, "ablate", "random_routing"))
    chosen = set(rng.choice(len(ids), size=k, replace=False).tolist()) if k else set()
    return {sid: (i in chosen) for i, sid in enumerate(ids)}


def ablate(dataset: ReplayDataset, validation: ReplayDataset, *, lam=DEFAULT_LAMBDA, beta=DEFAULT_BETA,
           epsilon=1e-8, seed: int = 0, concurrency: int = 1,
           convention=Acc2Convention.NEG_NONNEG, estimators=(PTD, EV)) -> list[dict]:
    """Full system against its ablations; one report row per variant."""
    for est in estimators:
        require_estimator(dataset, est)
        require_estimator(validation, est)
    samples = dataset.samples()
    small, large = replay_backends(dataset)
    truths = truths_of(dataset)
    scale = dataset_scale(dataset)
    base_cfg = CascadeConfig(epsilon=epsilon, concurrency=concurrency)
    thresholds = calibrate_dataset(validation, lam, beta)

    rows = []

    def row(name, traces, pair):
        rep = build_report(traces, truths, scale, convention)
        rows.append({"variant": name, "tau1": pair.tau1, "tau2": pair.tau2, **rep.flat_row()})
        return traces

    full = row("full", run_batch(samples, small, large, thresholds, base_cfg), thresholds)
    row("no_cross_verify",
        run_batch(samples, small, large, thresholds, CascadeConfig(epsilon=epsilon, concurrency=concurrency,
                                                                   cross_verify=False)),
        thresholds)
    k = sum(t.outcome is not StageTag.STAGE1_FAST for t in full)
    forced = random_escalation([s.id for s in samples], k, seed)
    row("random_routing", run_batch(samples, small, large, thresholds, base_cfg, escalate=forced), thresholds)
    for est in estimators:
        pair = calibrate_dataset(validation, lam, beta, estimator=est)
        cfg = CascadeConfig(epsilon=epsilon, concurrency=concurrency, small_estimator=est)
        row(f"estimator_{est}", run_batch(samples, small, large, pair, cfg), pair)
    return rows


def threshold_sweep(dataset: ReplayDataset, thresholds: ThresholdPair, taus,
                    cfg: CascadeConfig = CascadeConfig()) -> list[tuple]:
    """(tau1, escalation_rate, mae) for each tau1 in ``taus``."""
    samples = dataset.samples()
    small, large = replay_backends(dataset)
    truths = truths_of(dataset)
    out = []
    for tau in taus:
        traces = run_batch(samples, small, large, thresholds.with_overrides(tau1=tau), cfg)
        rep = build_report(traces, truths, dataset_scale(dataset))
        out.append((float(tau), rep.escalation_rate_stage2, rep.mae))
    return out


def sweep_grid(dataset: ReplayDataset, estimator: str = ENTROPY, points: int = 11) -> list[float]:
    us = [estimate(output_from_record(r, "small"), estimator).value for r in dataset]
    lo, hi = min(us), max(us)
    if math.isclose(lo, hi):
        hi = lo + 1.0
    return np.linspace(lo - 1e-9, hi, points).tolist()

