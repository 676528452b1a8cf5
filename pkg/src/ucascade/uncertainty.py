"""Uncertainty estimators.

All entropies are in nats. Three estimator families exist and their
outputs are never mixed: ``entropy`` (class or token-averaged entropy),
``ptd`` (auxiliary prediction-truth difference) and ``ev`` (ensemble
variance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import (
    CapabilityError,
    InsufficientEnsemble,
    InvalidEstimate,
    InvalidInput,
    MalformedDistribution,
    NoLabelTokens,
)

LOG_EPS = 1e-12
NORM_TOL = 1e-6

ENTROPY = "entropy"
PTD = "ptd"
EV = "ev"
ESTIMATORS = (ENTROPY, PTD, EV)


@dataclass(frozen=True)
class UncertaintyScore:
    value: float
    estimator: str

    def __float__(self):
        return self.value


def check_distribution(probs: Sequence[float], n: int | None = None) -> tuple:
    probs = tuple(float(p) for p in probs)
    if n is not None and len(probs) != n:
        raise MalformedDistribution(f"expected {n} probabilities, got {len(probs)}")
    if len(probs) < 2:
        raise MalformedDistribution("a distribution needs at least 2 outcomes")
    for p in probs:
        if not math.isfinite(p) or p < 0:
            raise MalformedDistribution(f"invalid probability {p!r}")
    if abs(math.fsum(probs) - 1.0) > NORM_TOL:
        raise MalformedDistribution(f"probabilities sum to {math.fsum(probs)!r}, not 1")
    return probs


def _entropy(probs: tuple) -> float:
    h = -math.fsum(p * math.log(p + LOG_EPS) for p in probs)
    # p*log(p+eps) is slightly negative-biased at p == 1; keep the score non-negative
    return max(h, 0.0)


def class_entropy(probs: Sequence[float]) -> UncertaintyScore:
    """Entropy of the small model's 3-class distribution."""
    return UncertaintyScore(_entropy(check_distribution(probs, 3)), ENTROPY)


def _mean(values: Sequence[float]) -> float:
    # anchored mean: exact when every value is identical
    first = values[0]
    return first + math.fsum(v - first for v in values) / len(values)


def token_avg_entropy(tokens: Sequence[Sequence[float]]) -> UncertaintyScore:
    """Mean entropy over the label-related output tokens.

    The backend decides which tokens are label-related; every distribution
    passed in is used.
    """
    if not tokens:
        raise NoLabelTokens("no label-related token distributions")
    hs = [_entropy(check_distribution(t)) for t in tokens]
    return UncertaintyScore(_mean(hs), ENTROPY)


def prediction_truth_difference(aux_estimate: float) -> UncertaintyScore:
    v = float(aux_estimate)
    if not math.isfinite(v) or v < 0:
        raise InvalidEstimate(f"auxiliary difference estimate must be >= 0, got {aux_estimate!r}")
    return UncertaintyScore(v, PTD)


def ensemble_variance(predictions: Sequence[float]) -> UncertaintyScore:
    """Population variance of the ensemble members' predictions."""
    preds = [float(p) for p in predictions]
    if len(preds) < 2:
        raise InsufficientEnsemble(f"need at least 2 ensemble predictions, got {len(preds)}")
    if not all(math.isfinite(p) for p in preds):
        raise InvalidInput("ensemble predictions must be finite")
    mean = _mean(preds)
    return UncertaintyScore(math.fsum((p - mean) ** 2 for p in preds) / len(preds), EV)


def estimate(output, estimator: str) -> UncertaintyScore:
    """Apply ``estimator`` to a backend ``ModelOutput``."""
    if estimator == ENTROPY:
        if output.class_dist is not None:
            return class_entropy(output.class_dist)
        if output.token_dists:
            return token_avg_entropy(output.token_dists)
        raise CapabilityError("entropy estimator needs class_dist or token_dists")
    if estimator == PTD:
        if output.aux_ptd is None:
            raise CapabilityError("ptd estimator needs an aux_ptd field")
        return prediction_truth_difference(output.aux_ptd)
    if estimator == EV:
        if output.ensemble is None:
            raise CapabilityError("ev estimator needs ensemble predictions")
        return ensemble_variance(output.ensemble)
    raise InvalidInput(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")


def max_entropy(output) -> float | None:
    """ln(n) for the widest distribution an entropy estimate was drawn from."""
    if output.class_dist is not None:
        return math.log(len(output.class_dist))
    if output.token_dists:
        return math.log(max(len(t) for t in output.token_dists))
    return None
