"""Backend boundary: what the cascade engine needs from a model."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence, runtime_checkable

from ..core import SampleRecord
from ..errors import CapabilityError, InvalidInput


@dataclass(frozen=True)
class ModelOutput:
    """One backend answer.

    ``token_dists`` holds only the label-related output tokens, as marked
    by the backend. ``latency`` is the backend-reported cost of the call in
    seconds; it is what cost accounting sums, so replays stay deterministic.
    """

    score: float
    class_dist: Optional[tuple] = None
    token_dists: Optional[tuple] = None
    aux_ptd: Optional[float] = None
    ensemble: Optional[tuple] = None
    latency: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise InvalidInput(f"non-finite model score {self.score!r}")
        if not (self.latency >= 0):
            raise InvalidInput(f"latency must be >= 0, got {self.latency!r}")

    @property
    def has_uncertainty(self) -> bool:
        return any(
            x is not None
            for x in (self.class_dist, self.token_dists or None, self.aux_ptd, self.ensemble)
        )


@dataclass(frozen=True)
class Capabilities:
    supports_cross_verify: bool = False
    uncertainty_modes: frozenset = field(default_factory=frozenset)
    max_concurrency: Optional[int] = None  # None = unbounded


@runtime_checkable
class ModelBackend(Protocol):
    capabilities: Capabilities

    def predict(self, sample: SampleRecord) -> ModelOutput: ...

    def cross_verify(self, sample: SampleRecord, enhanced_prompt: str) -> ModelOutput: ...


class NoCrossVerify:
    """Mixin for backends that only answer base predictions."""

    def cross_verify(self, sample, enhanced_prompt):
        raise CapabilityError(f"{type(self).__name__} does not support cross-verification")


class ConcurrencyLimited:
    """Wraps a backend so at most ``limit`` calls run at once."""

    def __init__(self, backend, limit: Optional[int]):
        self.backend = backend
        self.capabilities = backend.capabilities
        self._sem = threading.BoundedSemaphore(limit) if limit else None

    def predict(self, sample):
        if self._sem is None:
            return self.backend.predict(sample)
        with self._sem:
            return self.backend.predict(sample)

    def cross_verify(self, sample, enhanced_prompt):
        if self._sem is None:
            return self.backend.cross_verify(sample, enhanced_prompt)
        with self._sem:
            return self.backend.cross_verify(sample, enhanced_prompt)


def as_tuple_dists(dists: Optional[Sequence[Sequence[float]]]) -> Optional[tuple]:
    if dists is None:
        return None
    return tuple(tuple(float(p) for p in d) for d in dists)
