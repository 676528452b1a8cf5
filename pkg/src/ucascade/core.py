"""Domain types and polarity primitives."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional

from .errors import InvalidInput, InvalidScore, UnsupportedScale

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetScale:
    name: str
    min_score: float
    max_score: float

    def __post_init__(self):
        if not self.min_score < self.max_score:
            raise InvalidInput(f"scale {self.name}: min_score must be < max_score")
        if not self.min_score <= 0.0 <= self.max_score:
            raise InvalidInput(f"scale {self.name}: 0 must lie within the bounds")

    @property
    def half_range(self) -> float:
        return max(abs(self.min_score), abs(self.max_score))

    def contains(self, value: float) -> bool:
        return self.min_score <= value <= self.max_score

    def clamp(self, value: float, *, what: str = "score") -> float:
        """Clamp ``value`` into the scale, logging when it overshoots."""
        if value < self.min_score or value > self.max_score:
            clamped = min(max(value, self.min_score), self.max_score)
            logger.warning("%s %r outside %s bounds, clamped to %r", what, value, self.name, clamped)
            return clamped
        return value


MOSI = DatasetScale("mosi", -3.0, 3.0)
MOSEI = DatasetScale("mosei", -3.0, 3.0)
SIMS = DatasetScale("sims", -1.0, 1.0)

SCALES = {s.name: s for s in (MOSI, MOSEI, SIMS)}


def get_scale(name: str) -> DatasetScale:
    try:
        return SCALES[name.lower()]
    except KeyError:
        raise UnsupportedScale(f"unknown dataset scale {name!r}; known: {sorted(SCALES)}") from None


class SentimentClass(enum.IntEnum):
    NEUTRAL = 0
    NEGATIVE = 1
    POSITIVE = 2


@dataclass(frozen=True)
class SampleRecord:
    id: str
    text: str
    scale: DatasetScale
    ground_truth: Optional[float] = None

    def __post_init__(self):
        if not self.id:
            raise InvalidInput("sample id must be non-empty")
        if self.ground_truth is not None:
            _check_finite(self.ground_truth)
            if not self.scale.contains(self.ground_truth):
                raise InvalidScore(
                    f"sample {self.id}: ground truth {self.ground_truth} outside {self.scale.name} bounds"
                )


def _check_finite(value: float) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InvalidScore(f"not a number: {value!r}") from None
    if not math.isfinite(v):
        raise InvalidScore(f"non-finite score: {value!r}")
    return v


def polarity(score: float) -> int:
    """Sign of a sentiment score: -1, 0 or +1.

    Zero is matched by exact equality; callers wanting a tolerance band
    must round before calling.
    """
    v = _check_finite(score)
    if v < 0:
        return -1
    if v > 0:
        return 1
    return 0


def discretize(score: float) -> SentimentClass:
    p = polarity(score)
    if p < 0:
        return SentimentClass.NEGATIVE
    if p > 0:
        return SentimentClass.POSITIVE
    return SentimentClass.NEUTRAL
