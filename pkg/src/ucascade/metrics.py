"""Sentiment regression metrics and run-level reports."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.metrics import f1_score

from .cascade import CascadeTrace, CostRecord, StageTag, total_cost
from .core import DatasetScale
from .errors import EmptyEvaluationSet, JoinError, ScaleError, ShapeError, UndefinedCorrelation

REPORT_VERSION = 1

# SIMS bins are symmetric in |x|, given as magnitude edges.
# Acc5: [-1,-0.7] (-0.7,-0.1] (-0.1,0.1) [0.1,0.7) [0.7,1]; an edge leaves the neutral band.
# Acc3: (<-0.1) [-0.1,0.1] (>0.1); an edge stays neutral.
SIMS_ACC5_EDGES = (0.1, 0.7)
SIMS_ACC3_EDGES = (0.1,)


class Acc2Convention(str, enum.Enum):
    NEG_POS = "negpos"          # drop zero truths, compare negative vs positive
    NEG_NONNEG = "negnonneg"    # all samples, negative vs non-negative


def _pair(preds, truths) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds, dtype=float).ravel()
    t = np.asarray(truths, dtype=float).ravel()
    if p.shape != t.shape:
        raise ShapeError(f"{p.size} predictions vs {t.size} truths")
    if p.size == 0:
        raise EmptyEvaluationSet("no samples to evaluate")
    return p, t


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def acc7(preds, truths, scale: Optional[DatasetScale] = None) -> float:
    if scale is not None and (scale.min_score, scale.max_score) != (-3.0, 3.0):
        raise ScaleError(f"Acc7 is defined on the [-3, 3] scale, not {scale.name}")
    p, t = _pair(preds, truths)
    p7 = round_half_away(np.clip(p, -3.0, 3.0))
    t7 = round_half_away(np.clip(t, -3.0, 3.0))
    return float(np.mean(p7 == t7))


def _binary_labels(p, t, convention):
    convention = Acc2Convention(convention)
    if convention is Acc2Convention.NEG_POS:
        keep = t != 0
        if not keep.any():
            raise EmptyEvaluationSet("every truth is exactly 0; negative/positive Acc2 is undefined")
        # a zero prediction counts on the positive side
        return p[keep] >= 0, t[keep] > 0
    return p >= 0, t >= 0


def acc2(preds, truths, convention=Acc2Convention.NEG_NONNEG) -> float:
    pl, tl = _binary_labels(*_pair(preds, truths), convention)
    return float(np.mean(pl == tl))


def f1_binary(preds, truths, convention=Acc2Convention.NEG_NONNEG) -> float:
    """Support-weighted F1 over the two classes of the Acc2 labelling."""
    pl, tl = _binary_labels(*_pair(preds, truths), convention)
    return float(f1_score(tl, pl, average="weighted", zero_division=0))


def _binned(x: np.ndarray, edges, closed_neutral: bool) -> np.ndarray:
    """Signed bin index: sign(x) times the number of magnitude edges |x| has passed."""
    side = "left" if closed_neutral else "right"
    return np.sign(x).astype(int) * np.searchsorted(np.asarray(edges), np.abs(x), side=side)


def _check_sims(scale):
    if scale is not None and (scale.min_score, scale.max_score) != (-1.0, 1.0):
        raise ScaleError(f"Acc5/Acc3 are defined on the [-1, 1] scale, not {scale.name}")


def _acc_binned(preds, truths, scale, edges, closed_neutral):
    _check_sims(scale)
    p, t = _pair(preds, truths)
    pb = _binned(np.clip(p, -1, 1), edges, closed_neutral)
    tb = _binned(np.clip(t, -1, 1), edges, closed_neutral)
    return float(np.mean(pb == tb))


def acc5(preds, truths, scale: Optional[DatasetScale] = None, edges=SIMS_ACC5_EDGES) -> float:
    return _acc_binned(preds, truths, scale, edges, closed_neutral=False)


def acc3(preds, truths, scale: Optional[DatasetScale] = None, edges=SIMS_ACC3_EDGES) -> float:
    return _acc_binned(preds, truths, scale, edges, closed_neutral=True)


def mae(preds, truths) -> float:
    p, t = _pair(preds, truths)
    return math.fsum(np.abs(p - t).tolist()) / p.size


def pearson(preds, truths) -> float:
    p, t = _pair(preds, truths)
    dp, dt = p - p.mean(), t - t.mean()
    sp, st = math.sqrt(math.fsum((dp * dp).tolist())), math.sqrt(math.fsum((dt * dt).tolist()))
    if sp == 0 or st == 0:
        raise UndefinedCorrelation("a constant vector has no correlation")
    r = math.fsum((dp * dt).tolist()) / (sp * st)
    return max(-1.0, min(1.0, r))


@dataclass
class EvaluationReport:
    n: int
    acc2: float
    f1: float
    acc2_negpos: Optional[float]
    acc2_negnonneg: float
    f1_negpos: Optional[float]
    f1_negnonneg: float
    mae: float
    corr: Optional[float]
    acc7: Optional[float] = None
    acc5: Optional[float] = None
    acc3: Optional[float] = None
    escalation_rate_stage2: float = 0.0
    stage3_rate: float = 0.0
    cv_rate: float = 0.0
    per_stage_counts: dict = field(default_factory=dict)
    errors: int = 0
    total_cost: CostRecord = field(default_factory=CostRecord)
    acc2_convention: str = Acc2Convention.NEG_NONNEG.value

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_cost"] = asdict(self.total_cost)
        return {"report_version": REPORT_VERSION, **d}

    def flat_row(self) -> dict:
        d = self.to_dict()
        cost = d.pop("total_cost")
        counts = d.pop("per_stage_counts")
        d.update({f"cost_{k}": v for k, v in cost.items()})
        d.update({f"n_{tag.value}": counts.get(tag.value, 0) for tag in StageTag})
        return d


def build_report(traces: Sequence[CascadeTrace], truths: dict, scale: Optional[DatasetScale] = None,
                 convention=Acc2Convention.NEG_NONNEG) -> EvaluationReport:
    """Evaluate ``trace.final`` against ``truths`` (id -> score).

    Errored traces count toward costs and ``errors`` but not toward metrics.
    """
    convention = Acc2Convention(convention)
    trace_ids = [t.sample_id for t in traces]
    missing = [i for i in trace_ids if i not in truths]
    extra = set(truths) - set(trace_ids)
    if missing or extra:
        raise JoinError(f"trace/dataset id mismatch: {len(missing)} traces without truth "
                        f"(e.g. {missing[:3]}), {len(extra)} truths without trace (e.g. {sorted(extra)[:3]})")
    ok = [t for t in traces if t.error is None]
    if not ok:
        raise EmptyEvaluationSet("no successful traces to evaluate")
    p = np.array([t.final for t in ok], dtype=float)
    y = np.array([truths[t.sample_id] for t in ok], dtype=float)
    n = len(traces)

    try:
        negpos, f1_negpos = acc2(p, y, Acc2Convention.NEG_POS), f1_binary(p, y, Acc2Convention.NEG_POS)
    except EmptyEvaluationSet:
        negpos = f1_negpos = None
    nonneg, f1_nonneg = acc2(p, y, Acc2Convention.NEG_NONNEG), f1_binary(p, y, Acc2Convention.NEG_NONNEG)
    try:
        corr = pearson(p, y)
    except UndefinedCorrelation:
        corr = None

    counts = {tag.value: 0 for tag in StageTag}
    for t in ok:
        counts[t.outcome.value] += 1
    escalated = sum(v for k, v in counts.items() if k != StageTag.STAGE1_FAST.value)
    stage3 = counts[StageTag.STAGE3_WEIGHTED_AVG.value] + counts[StageTag.STAGE3_CROSS_VERIFY.value]

    sims = scale is not None and (scale.min_score, scale.max_score) == (-1.0, 1.0)
    wide = scale is None or (scale.min_score, scale.max_score) == (-3.0, 3.0)
    headline_np = convention is Acc2Convention.NEG_POS and negpos is not None
    return EvaluationReport(
        n=n,
        acc2=negpos if headline_np else nonneg,
        f1=f1_negpos if headline_np else f1_nonneg,
        acc2_negpos=negpos,
        acc2_negnonneg=nonneg,
        f1_negpos=f1_negpos,
        f1_negnonneg=f1_nonneg,
        mae=mae(p, y),
        corr=corr,
        acc7=acc7(p, y) if wide else None,
        acc5=acc5(p, y) if sims else None,
        acc3=acc3(p, y) if sims else None,
        escalation_rate_stage2=escalated / n,
        stage3_rate=stage3 / n,
        cv_rate=counts[StageTag.STAGE3_CROSS_VERIFY.value] / n,
        per_stage_counts=counts,
        errors=n - len(ok),
        total_cost=total_cost(t.cost for t in traces),
        acc2_convention=convention.value,
    )


def write_report_json(report: EvaluationReport, path, config: Optional[dict] = None) -> None:
    doc = report.to_dict()
    if config is not None:
        doc["config"] = config
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(doc, indent=2) + "\n")


def write_rows_csv(rows: Sequence[dict], path) -> None:
    """Flat table, one row per run or variant."""
    fields = list(rows[0])
    for r in rows[1:]:
        fields.extend(k for k in r if k not in fields)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
