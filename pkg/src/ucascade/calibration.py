"""Validation-set calibration of the two routing thresholds."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .core import polarity
from .errors import (
    DegeneratePartition,
    EmptyPartition,
    EmptyValidationSet,
    EstimatorMismatch,
    InvalidHyperparameter,
    InvalidInput,
    SchemaError,
)
from .uncertainty import UncertaintyScore

DEFAULT_LAMBDA = 0.5
DEFAULT_BETA = 0.0
ARTIFACT_VERSION = 1


@dataclass(frozen=True)
class PartitionedUncertainties:
    same: tuple
    opposite: tuple
    estimator: str


@dataclass(frozen=True)
class GaussianFit:
    mu: float
    sigma: float
    n: int


@dataclass(frozen=True)
class ModelCalibration:
    estimator: str
    mu_same: float
    mu_opposite: float
    sigma_same: float
    sigma_opposite: float
    n_same: int
    n_opposite: int
    tau: float


@dataclass(frozen=True)
class ThresholdPair:
    tau1: float
    tau2: float
    lam: float = DEFAULT_LAMBDA
    beta: float = DEFAULT_BETA
    small_estimator: str = "entropy"
    large_estimator: str = "entropy"
    fingerprint: str | None = None
    small: ModelCalibration | None = field(default=None, compare=False)
    large: ModelCalibration | None = field(default=None, compare=False)

    def __post_init__(self):
        if math.isnan(self.tau1) or math.isnan(self.tau2):
            raise InvalidInput("thresholds must not be NaN")
        _check_lambda(self.lam)

    def with_overrides(self, tau1: float | None = None, tau2: float | None = None) -> "ThresholdPair":
        from dataclasses import replace

        return replace(
            self,
            tau1=self.tau1 if tau1 is None else float(tau1),
            tau2=self.tau2 if tau2 is None else float(tau2),
        )


def _check_lambda(lam: float) -> None:
    if not (0.0 <= lam <= 1.0):
        raise InvalidHyperparameter(f"lambda must lie in [0, 1], got {lam!r}")


def _value(u) -> tuple[float, str | None]:
    if isinstance(u, UncertaintyScore):
        return u.value, u.estimator
    return float(u), None


def partition(records: Iterable[tuple]) -> PartitionedUncertainties:
    """Split (predicted, truth, uncertainty) triples by polarity agreement.

    A record is ``same`` only on exact polarity equality, so a neutral
    prediction against a non-neutral truth lands in ``opposite``.
    """
    same, opposite = [], []
    tags = set()
    count = 0
    for pred, truth, u in records:
        value, tag = _value(u)
        if value < 0 or not math.isfinite(value):
            raise InvalidInput(f"uncertainty must be finite and >= 0, got {value!r}")
        tags.add(tag)
        (same if polarity(pred) == polarity(truth) else opposite).append(value)
        count += 1
    if count == 0:
        raise EmptyValidationSet("no validation records")
    if len(tags) > 1:
        raise EstimatorMismatch(f"validation records mix estimators: {sorted(map(str, tags))}")
    return PartitionedUncertainties(tuple(same), tuple(opposite), tags.pop())


def gaussian_fit(values: Sequence[float]) -> GaussianFit:
    """Maximum-likelihood Gaussian: sample mean and population std."""
    vals = [float(v) for v in values]
    if not vals:
        raise EmptyPartition("cannot fit a Gaussian to an empty partition")
    n = len(vals)
    mu = math.fsum(vals) / n
    var = math.fsum((v - mu) ** 2 for v in vals) / n
    return GaussianFit(mu, math.sqrt(var), n)


def compute_threshold(mu_same: float, mu_opposite: float, lam: float = DEFAULT_LAMBDA,
                      beta: float = DEFAULT_BETA) -> float:
    _check_lambda(lam)
    if not (math.isfinite(mu_same) and math.isfinite(mu_opposite) and math.isfinite(beta)):
        raise InvalidInput("threshold statistics must be finite")
    return (1 - lam) * mu_same + lam * mu_opposite + beta


def calibrate_model(records, lam: float = DEFAULT_LAMBDA, beta: float = DEFAULT_BETA,
                    *, role: str = "model") -> ModelCalibration:
    parts = partition(records)
    if not parts.same or not parts.opposite:
        empty = "same" if not parts.same else "opposite"
        raise DegeneratePartition(
            f"{role}: the {empty!r} polarity group is empty "
            f"({len(parts.same)} same, {len(parts.opposite)} opposite); "
            "use a larger or more varied validation set"
        )
    fs, fo = gaussian_fit(parts.same), gaussian_fit(parts.opposite)
    return ModelCalibration(
        estimator=parts.estimator or "unknown",
        mu_same=fs.mu,
        mu_opposite=fo.mu,
        sigma_same=fs.sigma,
        sigma_opposite=fo.sigma,
        n_same=fs.n,
        n_opposite=fo.n,
        tau=compute_threshold(fs.mu, fo.mu, lam, beta),
    )


def calibrate(small_records, large_records, lam: float = DEFAULT_LAMBDA,
              beta: float = DEFAULT_BETA, fingerprint: str | None = None) -> ThresholdPair:
    small = calibrate_model(small_records, lam, beta, role="small model")
    large = calibrate_model(large_records, lam, beta, role="large model")
    return ThresholdPair(
        tau1=small.tau,
        tau2=large.tau,
        lam=lam,
        beta=beta,
        small_estimator=small.estimator,
        large_estimator=large.estimator,
        fingerprint=fingerprint,
        small=small,
        large=large,
    )


def file_fingerprint(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def save_thresholds(pair: ThresholdPair, path) -> None:
    doc = {
        "schema_version": ARTIFACT_VERSION,
        "dataset_fingerprint": pair.fingerprint,
        "lambda": pair.lam,
        "beta": pair.beta,
        "small": _model_doc(pair.small, pair.small_estimator, pair.tau1),
        "large": _model_doc(pair.large, pair.large_estimator, pair.tau2),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _model_doc(cal: ModelCalibration | None, estimator: str, tau: float) -> dict:
    if cal is None:
        return {"estimator": estimator, "tau": tau}
    return asdict(cal)


def load_thresholds(path) -> ThresholdPair:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not a calibration artifact ({exc})") from None
    if doc.get("schema_version") != ARTIFACT_VERSION:
        raise SchemaError(f"{path}: unsupported calibration schema {doc.get('schema_version')!r}")
    try:
        small, large = doc["small"], doc["large"]
        return ThresholdPair(
            tau1=float(small["tau"]),
            tau2=float(large["tau"]),
            lam=float(doc["lambda"]),
            beta=float(doc["beta"]),
            small_estimator=small["estimator"],
            large_estimator=large["estimator"],
            fingerprint=doc.get("dataset_fingerprint"),
            small=ModelCalibration(**small) if "mu_same" in small else None,
            large=ModelCalibration(**large) if "mu_same" in large else None,
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed calibration artifact ({exc})") from None


def correctness_split(records) -> tuple[list, list]:
    """Diagnostic split into (correct, incorrect) uncertainty populations.

    Correctness is binary negative/non-negative agreement, the view used
    for uncertainty-distribution plots. Routing never uses it.
    """
    correct, incorrect = [], []
    for pred, truth, u in records:
        value, _ = _value(u)
        ((correct if (pred < 0) == (truth < 0) else incorrect)).append(value)
    return correct, incorrect
