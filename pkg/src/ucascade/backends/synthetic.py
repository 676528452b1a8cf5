"""Seeded synthetic replay data with a tunable difficulty/uncertainty coupling.

Every sample draws a latent difficulty ``d`` in [0, 1]. Model noise and
distribution temperatures grow with ``d``, so entropies act as a proxy
for how hard a sample is. Records are generated per id from
``(seed, id)`` alone, which lets :class:`SyntheticBackend` answer for
any id without materialising a file.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from ..core import SampleRecord, get_scale
from ..errors import InvalidCount, InvalidInput
from .base import Capabilities, ModelOutput, NoCrossVerify
from .replay import SCHEMA_VERSION, ReplayDataset, output_from_record

PROFILES = ("mixed", "easy", "hard")

SMALL_NOISE = 0.5     # std at d=1, as a fraction of the scale half-range
LARGE_NOISE = 0.25
CV_NOISE = 0.1
SMALL_TEMP = 2.0      # class temperature at d=1, in units of half-range**2
LARGE_TEMP = 0.6
N_LABEL_TOKENS = 2
TOKEN_VOCAB = 5
ENSEMBLE_SIZE = 5


def stream_seed(seed: int, *names) -> np.random.SeedSequence:
    """Named sub-stream of ``seed``; adding a name never perturbs another stream."""
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for name in names:
        digest = hashlib.sha256(str(name).encode("utf-8")).digest()
        words.extend(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))
    return np.random.SeedSequence(words)


def _difficulty(rng: np.random.Generator, profile) -> float:
    if isinstance(profile, (int, float)):
        d = float(profile)
    elif profile == "mixed":
        d = rng.uniform()
    elif profile == "easy":
        d = rng.beta(1.0, 3.0)
    elif profile == "hard":
        d = rng.beta(3.0, 1.0)
    else:
        try:
            d = float(profile)
        except (TypeError, ValueError):
            raise InvalidInput(f"unknown difficulty profile {profile!r}; use {PROFILES} or a number") from None
    if not 0.0 <= d <= 1.0:
        raise InvalidInput(f"difficulty must lie in [0, 1], got {d}")
    return d


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def class_probs(score: float, half_range: float, temperature: float) -> list[float]:
    """Distribution over [neutral, negative, positive] from distances to class anchors."""
    anchors = np.array([0.0, -half_range / 2, half_range / 2])
    dist2 = (score - anchors) ** 2
    if temperature <= 1e-12:
        probs = np.zeros(3)
        probs[int(np.argmin(dist2))] = 1.0
    else:
        probs = _softmax(-dist2 / temperature)
    return [round(float(p), 10) for p in probs]


def token_probs(temperature: float) -> list[float]:
    if temperature <= 1e-12:
        return [1.0] + [0.0] * (TOKEN_VOCAB - 1)
    logits = np.full(TOKEN_VOCAB, -1.0 / temperature)
    logits[0] = 0.0
    return [round(float(p), 10) for p in _softmax(logits)]


def synth_record(sample_id: str, seed: int, profile="mixed", scale: str = "mosi") -> dict:
    sc = get_scale(scale)
    R = sc.half_range
    rng = np.random.default_rng(stream_seed(seed, "synthetic", sample_id))

    def clip(x):
        return round(float(min(max(x, sc.min_score), sc.max_score)), 4)

    d = _difficulty(rng, profile)
    truth = clip(rng.uniform(sc.min_score, sc.max_score))
    small = clip(truth + rng.normal(0.0, SMALL_NOISE * R * d) if d > 0 else truth)
    # per-model multiplicative jitter keeps d = 0 exact while decoupling the two readouts
    d_small = min(1.0, d * math.exp(rng.normal(0.0, 0.25)))
    d_large = min(1.0, d * math.exp(rng.normal(0.0, 0.25)))
    probs = class_probs(small, R, SMALL_TEMP * R * R * d_small)
    large = clip(truth + rng.normal(0.0, LARGE_NOISE * R * d) if d > 0 else truth)
    tokens = [token_probs(LARGE_TEMP * d_large * math.exp(rng.normal(0.0, 0.1)))
              for _ in range(N_LABEL_TOKENS)]
    cv = clip(truth + rng.normal(0.0, CV_NOISE * R * d) if d > 0 else truth)
    aux = round(abs(small - truth) * math.exp(rng.normal(0.0, 0.3)), 4)
    ensemble = [clip(truth + rng.normal(0.0, SMALL_NOISE * R * d)) for _ in range(ENSEMBLE_SIZE)]
    return {
        "schema_version": SCHEMA_VERSION,
        "id": sample_id,
        "text": f"synthetic utterance {sample_id}",
        "scale": sc.name,
        "ground_truth": truth,
        "small_score": small,
        "small_probs": probs,
        "small_aux_ptd": aux,
        "small_ensemble": ensemble,
        "small_latency": round(0.007 + rng.uniform(0.0, 0.001), 6),
        "large_score": large,
        "large_token_probs": tokens,
        "large_latency": round(0.17 + rng.uniform(0.0, 0.02), 6),
        "large_cv_score": cv,
        "large_cv_latency": round(0.17 + rng.uniform(0.0, 0.02), 6),
        "difficulty": round(d, 6),
    }


def synthetic_generate(n: int, seed: int, profile="mixed", scale: str = "mosi",
                       prefix: str = "s") -> list[dict]:
    if n < 1:
        raise InvalidCount(f"need n >= 1 samples, got {n}")
    return [synth_record(f"{prefix}{i}", seed, profile, scale) for i in range(n)]


def synthetic_dataset(n: int, seed: int, profile="mixed", scale: str = "mosi") -> ReplayDataset:
    return ReplayDataset(synthetic_generate(n, seed, profile, scale), source=f"<synthetic seed={seed}>")


class SyntheticBackend(NoCrossVerify):
    """Answers any sample id with its seeded synthetic output."""

    def __init__(self, role: str, seed: int, profile="mixed", scale: str = "mosi"):
        if role not in ("small", "large"):
            raise InvalidInput(f"role must be 'small' or 'large', got {role!r}")
        self.role, self.seed, self.profile, self.scale = role, seed, profile, scale
        modes = frozenset({"entropy", "ptd", "ev"}) if role == "small" else frozenset({"entropy"})
        self.capabilities = Capabilities(role == "large", modes, None)

    def _record(self, sample: SampleRecord) -> dict:
        return synth_record(sample.id, self.seed, self.profile, self.scale)

    def predict(self, sample: SampleRecord) -> ModelOutput:
        return output_from_record(self._record(sample), self.role)

    def cross_verify(self, sample: SampleRecord, enhanced_prompt: str) -> ModelOutput:
        if self.role != "large":
            return super().cross_verify(sample, enhanced_prompt)
        return output_from_record(self._record(sample), "large_cv")
