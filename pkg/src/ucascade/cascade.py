"""Three-stage uncertainty-routed cascade between a small model and an MLLM."""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .backends.base import ConcurrencyLimited
from .calibration import ThresholdPair
from .core import SampleRecord, polarity
from .errors import BackendError, CapabilityError, CascadeError, EstimatorMismatch, InvalidInput, ParseError
from .prompts import build_enhanced_prompt
from .uncertainty import ENTROPY, estimate, max_entropy

DEFAULT_EPSILON = 1e-8
FALLBACK_WEIGHTED = "weighted_average"
FALLBACK_STRICT = "strict"


class StageTag(str, enum.Enum):
    STAGE1_FAST = "Stage1Fast"
    STAGE2_LARGE_ACCEPTED = "Stage2LargeAccepted"
    STAGE3_WEIGHTED_AVG = "Stage3WeightedAvg"
    STAGE3_CROSS_VERIFY = "Stage3CrossVerify"


@dataclass(frozen=True)
class CostRecord:
    """Backend calls made for one sample (or summed over many).

    ``large_calls`` counts base MLLM predictions only; cross-verification
    calls are counted in ``large_cv_calls``. ``wall_time`` sums the
    backend-reported latency of every call.
    """

    small_calls: int = 0
    large_calls: int = 0
    large_cv_calls: int = 0
    wall_time: float = 0.0

    def __add__(self, other: "CostRecord") -> "CostRecord":
        return CostRecord(
            self.small_calls + other.small_calls,
            self.large_calls + other.large_calls,
            self.large_cv_calls + other.large_cv_calls,
            self.wall_time + other.wall_time,
        )


def total_cost(costs) -> CostRecord:
    costs = list(costs)
    return CostRecord(
        sum(c.small_calls for c in costs),
        sum(c.large_calls for c in costs),
        sum(c.large_cv_calls for c in costs),
        math.fsum(c.wall_time for c in costs),
    )


@dataclass(frozen=True)
class CascadeTrace:
    sample_id: str
    outcome: Optional[StageTag]
    y_s: Optional[float]
    u_s: Optional[float]
    estimator: str
    final: Optional[float]
    cost: CostRecord
    y_l: Optional[float] = None
    u_l: Optional[float] = None
    w_s: Optional[float] = None
    u_cv: Optional[float] = None
    note: Optional[str] = None
    error: Optional[str] = None

    FIELDS = ("sample_id", "outcome", "estimator", "y_s", "u_s", "y_l", "u_l", "w_s", "u_cv",
              "final", "note", "small_calls", "large_calls", "large_cv_calls", "wall_time", "error")

    def to_dict(self) -> dict:
        d = {
            "sample_id": self.sample_id,
            "outcome": None if self.outcome is None else self.outcome.value,
            "estimator": self.estimator,
            "y_s": self.y_s,
            "u_s": self.u_s,
            "y_l": self.y_l,
            "u_l": self.u_l,
            "w_s": self.w_s,
            "u_cv": self.u_cv,
            "final": self.final,
            "note": self.note,
            "small_calls": self.cost.small_calls,
            "large_calls": self.cost.large_calls,
            "large_cv_calls": self.cost.large_cv_calls,
            "wall_time": self.cost.wall_time,
            "error": self.error,
        }
        return {k: d[k] for k in self.FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "CascadeTrace":
        return cls(
            sample_id=d["sample_id"],
            outcome=None if d.get("outcome") is None else StageTag(d["outcome"]),
            y_s=d.get("y_s"),
            u_s=d.get("u_s"),
            estimator=d.get("estimator", ENTROPY),
            final=d.get("final"),
            cost=CostRecord(d.get("small_calls", 0), d.get("large_calls", 0),
                            d.get("large_cv_calls", 0), d.get("wall_time", 0.0)),
            y_l=d.get("y_l"),
            u_l=d.get("u_l"),
            w_s=d.get("w_s"),
            u_cv=d.get("u_cv"),
            note=d.get("note"),
            error=d.get("error"),
        )


@dataclass(frozen=True)
class CascadeConfig:
    epsilon: float = DEFAULT_EPSILON
    small_estimator: str = ENTROPY
    large_estimator: str = ENTROPY
    cross_verify: bool = True
    cv_fallback: str = FALLBACK_WEIGHTED
    normalize_uncertainty: bool = False
    concurrency: int = 1
    continue_on_error: bool = False

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidInput(f"epsilon must be a positive finite number, got {self.epsilon!r}")
        if self.concurrency < 1:
            raise InvalidInput("concurrency must be >= 1")
        if self.cv_fallback not in (FALLBACK_WEIGHTED, FALLBACK_STRICT):
            raise InvalidInput(f"unknown cv_fallback {self.cv_fallback!r}")


def weighted_average(y_s: float, u_s: float, y_l: float, u_l: float,
                     epsilon: float = DEFAULT_EPSILON) -> tuple[float, float]:
    """Inverse-uncertainty weighted fusion; returns ``(final, w_s)``."""
    vals = (y_s, u_s, y_l, u_l, epsilon)
    if not all(math.isfinite(v) for v in vals):
        raise InvalidInput(f"weighted_average needs finite inputs, got {vals!r}")
    if u_s < 0 or u_l < 0 or epsilon <= 0:
        raise InvalidInput("uncertainties must be >= 0 and epsilon > 0")
    inv_s = 1.0 / (u_s + epsilon)
    inv_l = 1.0 / (u_l + epsilon)
    w_s = inv_s / (inv_s + inv_l)
    final = w_s * y_s + (1.0 - w_s) * y_l
    # rounding can push the blend one ulp outside the pair
    final = min(max(final, min(y_s, y_l)), max(y_s, y_l))
    return final, w_s


def check_compatibility(small, large, thresholds: ThresholdPair, cfg: CascadeConfig) -> None:
    """Refuse runs whose thresholds were calibrated under another estimator."""
    if thresholds.small_estimator != cfg.small_estimator:
        raise EstimatorMismatch(
            f"tau1 was calibrated with {thresholds.small_estimator!r}, run uses {cfg.small_estimator!r}")
    if thresholds.large_estimator != cfg.large_estimator:
        raise EstimatorMismatch(
            f"tau2 was calibrated with {thresholds.large_estimator!r}, run uses {cfg.large_estimator!r}")
    for role, backend, est in (("small", small, cfg.small_estimator), ("large", large, cfg.large_estimator)):
        modes = backend.capabilities.uncertainty_modes
        if modes and est not in modes:
            raise EstimatorMismatch(f"{role} backend offers {sorted(modes)}, not {est!r}")
    if cfg.cross_verify and not large.capabilities.supports_cross_verify:
        raise CapabilityError("large backend cannot cross-verify; disable cross_verify")


def _normalized(u: float, output, estimator: str, on: bool) -> float:
    if not on or estimator != ENTROPY:
        return u
    top = max_entropy(output)
    return u / top if top else u


def run_sample(sample: SampleRecord, small, large, thresholds: ThresholdPair,
               cfg: CascadeConfig = CascadeConfig(), *, escalate: Optional[bool] = None) -> CascadeTrace:
    """Route one sample through the cascade.

    ``escalate`` overrides the stage-1 decision (used by the random-routing
    ablation); ``None`` routes on ``u_s <= tau1``.
    """
    cost = CostRecord()
    partial = CascadeTrace(sample.id, None, None, None, cfg.small_estimator, None, cost)

    def call(fn, *args):
        try:
            return fn(*args)
        except BackendError as exc:
            exc.trace = exc.trace or partial
            raise
        except ParseError:
            raise
        except Exception as exc:
            raise BackendError(f"{sample.id}: {exc}", trace=partial) from exc

    out_s = call(small.predict, sample)
    cost = replace(cost, small_calls=1, wall_time=out_s.latency)
    y_s = out_s.score
    u_s = estimate(out_s, cfg.small_estimator).value
    partial = replace(partial, y_s=y_s, u_s=u_s, cost=cost)

    stop = (u_s <= thresholds.tau1) if escalate is None else not escalate
    if stop:
        return replace(partial, outcome=StageTag.STAGE1_FAST, final=y_s)

    out_l = call(large.predict, sample)
    cost = replace(cost, large_calls=1, wall_time=cost.wall_time + out_l.latency)
    y_l = out_l.score
    u_l = estimate(out_l, cfg.large_estimator).value
    partial = replace(partial, y_l=y_l, u_l=u_l, cost=cost)

    if u_l <= thresholds.tau2:
        return replace(partial, outcome=StageTag.STAGE2_LARGE_ACCEPTED, final=y_l)

    def blend(note=None):
        final, w_s = weighted_average(
            y_s, _normalized(u_s, out_s, cfg.small_estimator, cfg.normalize_uncertainty),
            y_l, _normalized(u_l, out_l, cfg.large_estimator, cfg.normalize_uncertainty),
            cfg.epsilon,
        )
        return replace(partial, outcome=StageTag.STAGE3_WEIGHTED_AVG, final=final, w_s=w_s, note=note)

    if polarity(y_s) == polarity(y_l):
        return blend()

    if not cfg.cross_verify:
        return replace(partial, outcome=StageTag.STAGE2_LARGE_ACCEPTED, final=y_l, note="cv_disabled")

    prompt = build_enhanced_prompt(sample, y_s, u_s, y_l, u_l)
    try:
        out_cv = call(large.cross_verify, sample, prompt)
    except ParseError as exc:
        partial = replace(partial, cost=replace(cost, large_cv_calls=1))
        if cfg.cv_fallback == FALLBACK_STRICT:
            raise BackendError(f"{sample.id}: cross-verification unparseable: {exc}", trace=partial) from exc
        return blend(note="cv_parse_fallback")
    cost = replace(cost, large_cv_calls=1, wall_time=cost.wall_time + out_cv.latency)
    u_cv = estimate(out_cv, ENTROPY).value if out_cv.token_dists else None
    final = sample.scale.clamp(out_cv.score, what=f"{sample.id} cross-verified score")
    return replace(partial, outcome=StageTag.STAGE3_CROSS_VERIFY, final=final, u_cv=u_cv, cost=cost)


def run_batch(samples: Sequence[SampleRecord], small, large, thresholds: ThresholdPair,
              cfg: CascadeConfig = CascadeConfig(), *,
              escalate: Optional[Mapping[str, bool]] = None) -> list[CascadeTrace]:
    """Run every sample; results keep input order whatever the concurrency."""
    if not samples:
        raise InvalidInput("run_batch needs at least one sample")
    check_compatibility(small, large, thresholds, cfg)
    small = ConcurrencyLimited(small, small.capabilities.max_concurrency)
    large = ConcurrencyLimited(large, large.capabilities.max_concurrency)

    def one(sample):
        forced = None if escalate is None else escalate.get(sample.id)
        try:
            return run_sample(sample, small, large, thresholds, cfg, escalate=forced)
        except CascadeError as exc:
            if not cfg.continue_on_error:
                raise
            base = getattr(exc, "trace", None) or CascadeTrace(
                sample.id, None, None, None, cfg.small_estimator, None, CostRecord())
            return replace(base, error=f"{type(exc).__name__}: {exc}")

    if cfg.concurrency == 1:
        return [one(s) for s in samples]
    with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
        return list(pool.map(one, samples))


def write_traces(traces: Sequence[CascadeTrace], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in traces:
            fh.write(json.dumps(t.to_dict()) + "\n")


def read_traces(path) -> list[CascadeTrace]:
    with open(path, encoding="utf-8") as fh:
        return [CascadeTrace.from_dict(json.loads(line)) for line in fh if line.strip()]
