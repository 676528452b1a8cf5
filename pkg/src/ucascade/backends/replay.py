"""Replay datasets: precomputed model outputs served from a JSONL file.

Record schema (version 1), one JSON object per line::

    schema_version      1 (mandatory)
    id, text, scale     sample identity; scale in {mosi, mosei, sims}
    ground_truth        float or null
    small_score         small-model score
    small_probs         [neutral, negative, positive] class probabilities
    small_aux_ptd       optional auxiliary |prediction - truth| estimate
    small_ensemble      optional list of ensemble-member scores
    small_latency       optional seconds per call (default 0)
    large_score         MLLM score
    large_token_probs   per-token distributions of the label-related tokens
    large_latency       optional seconds per call (default 0)
    large_cv_score      optional cross-verification answer
    large_cv_token_probs, large_cv_latency   optional
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable

from ..core import SampleRecord, get_scale
from ..errors import CapabilityError, InvalidInput, MissingRecord, ParseError, SchemaError
from ..uncertainty import ENTROPY, EV, PTD
from .base import Capabilities, ModelOutput, NoCrossVerify, as_tuple_dists

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

FIELD_ORDER = (
    "schema_version", "id", "text", "scale", "ground_truth",
    "small_score", "small_probs", "small_aux_ptd", "small_ensemble", "small_latency",
    "large_score", "large_token_probs", "large_latency",
    "large_cv_score", "large_cv_token_probs", "large_cv_latency",
    "difficulty",
)
REQUIRED = ("schema_version", "id", "text", "scale", "small_score", "small_probs",
            "large_score", "large_token_probs")


def _validate(rec: dict, where: str) -> dict:
    missing = [k for k in REQUIRED if k not in rec]
    if missing:
        raise SchemaError(f"{where}: missing fields {missing}")
    if rec["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(f"{where}: unsupported schema_version {rec['schema_version']!r}")
    scale = get_scale(rec["scale"])
    rec = dict(rec)
    for key in ("small_score", "large_score", "large_cv_score"):
        if rec.get(key) is not None:
            rec[key] = scale.clamp(float(rec[key]), what=f"{rec['id']}.{key}")
    return rec


class ReplayDataset:
    """Ordered, immutable collection of replay records keyed by id."""

    def __init__(self, records: Iterable[dict], source: str = "<memory>"):
        self._records = {}
        for i, rec in enumerate(records):
            rec = _validate(rec, f"{source}:{i + 1}")
            if rec["id"] in self._records:
                raise SchemaError(f"{source}: duplicate id {rec['id']!r}")
            self._records[rec["id"]] = rec
        if not self._records:
            raise SchemaError(f"{source}: no records")
        self.source = source

    @classmethod
    def load(cls, path) -> "ReplayDataset":
        path = Path(path)
        records = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"{path}:{lineno}: {exc}") from None
        return cls(records, source=str(path))

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records.values())

    def __contains__(self, sample_id):
        return sample_id in self._records

    def record(self, sample_id: str) -> dict:
        try:
            return self._records[sample_id]
        except KeyError:
            raise MissingRecord(f"{self.source}: no record for id {sample_id!r}") from None

    def samples(self) -> list[SampleRecord]:
        return [to_sample(r) for r in self._records.values()]

    def fields_present(self, key: str) -> bool:
        return all(r.get(key) is not None for r in self._records.values())

    def uncertainty_modes(self, role: str) -> frozenset:
        modes = {ENTROPY}
        if role == "small":
            if self.fields_present("small_aux_ptd"):
                modes.add(PTD)
            if self.fields_present("small_ensemble"):
                modes.add(EV)
        return frozenset(modes)


def to_sample(rec: dict) -> SampleRecord:
    gt = rec.get("ground_truth")
    return SampleRecord(
        id=rec["id"],
        text=rec["text"],
        scale=get_scale(rec["scale"]),
        ground_truth=None if gt is None else float(gt),
    )


def output_from_record(rec: dict, role: str) -> ModelOutput:
    if role == "small":
        ens = rec.get("small_ensemble")
        return ModelOutput(
            score=float(rec["small_score"]),
            class_dist=tuple(float(p) for p in rec["small_probs"]),
            aux_ptd=None if rec.get("small_aux_ptd") is None else float(rec["small_aux_ptd"]),
            ensemble=None if ens is None else tuple(float(x) for x in ens),
            latency=float(rec.get("small_latency") or 0.0),
        )
    if role == "large":
        return ModelOutput(
            score=float(rec["large_score"]),
            token_dists=as_tuple_dists(rec["large_token_probs"]),
            latency=float(rec.get("large_latency") or 0.0),
        )
    if role == "large_cv":
        if rec.get("large_cv_score") is None:
            raise ParseError(f"record {rec['id']!r} has no stored cross-verification answer")
        return ModelOutput(
            score=float(rec["large_cv_score"]),
            token_dists=as_tuple_dists(rec.get("large_cv_token_probs")),
            latency=float(rec.get("large_cv_latency") or rec.get("large_latency") or 0.0),
        )
    raise InvalidInput(f"unknown replay role {role!r}")


def write_replay(records: Iterable[dict], path) -> None:
    """Write records with a stable field order, one JSON object per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            ordered = {k: rec[k] for k in FIELD_ORDER if k in rec}
            ordered.update((k, v) for k, v in rec.items() if k not in ordered)
            fh.write(json.dumps(ordered, ensure_ascii=False) + "\n")


class SmallReplayBackend(NoCrossVerify):
    def __init__(self, dataset: ReplayDataset):
        self.dataset = dataset
        self.capabilities = Capabilities(False, dataset.uncertainty_modes("small"), None)

    def predict(self, sample: SampleRecord) -> ModelOutput:
        return output_from_record(self.dataset.record(sample.id), "small")


class LargeReplayBackend:
    def __init__(self, dataset: ReplayDataset):
        self.dataset = dataset
        self.capabilities = Capabilities(True, dataset.uncertainty_modes("large"), None)

    def predict(self, sample: SampleRecord) -> ModelOutput:
        return output_from_record(self.dataset.record(sample.id), "large")

    def cross_verify(self, sample: SampleRecord, enhanced_prompt: str) -> ModelOutput:
        if not self.capabilities.supports_cross_verify:
            raise CapabilityError("cross-verification disabled")
        return output_from_record(self.dataset.record(sample.id), "large_cv")


def replay_backends(dataset: ReplayDataset):
    return SmallReplayBackend(dataset), LargeReplayBackend(dataset)
