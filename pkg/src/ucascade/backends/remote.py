"""HTTP client for a remote MLLM service.

Wire protocol (single endpoint, JSON, UTF-8)::

    POST <endpoint>
    request  {"id": str, "prompt": str, "mode": "base" | "cross_verify"}
    response {"text": str, "token_probs": [[float, ...], ...] | null, "latency_ms": float}

Status codes: 200 ok; 422 parse-hint (the service could not produce a
score, body may carry ``text``); 503 overload (retried). Anything else
is a hard failure. Prompts are deterministic, so requests are treated as
idempotent and retried on overload and transport errors.
"""

from __future__ import annotations

import logging
import os
import re
import threading
import time

import httpx

from ..core import SampleRecord
from ..errors import BackendError, CapabilityError, ParseError
from ..prompts import build_base_prompt
from .base import Capabilities, ModelOutput, as_tuple_dists

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "UCASCADE_ENDPOINT"
STATUS_OK = 200
STATUS_PARSE_HINT = 422
STATUS_OVERLOAD = 503

_NUMBER = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)")


def parse_score(text: str) -> float:
    """First signed decimal number in ``text``."""
    m = _NUMBER.search(text or "")
    if m is None:
        raise ParseError(f"no numeric score in answer {text!r}")
    return float(m.group(0))


def render_score(x: float) -> str:
    """Answer text a well-behaved service returns for score ``x``."""
    return f"The sentiment score is {x + 0.0:.4f}."


def resolve_endpoint(endpoint: str | None = None) -> str:
    endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        raise BackendError(f"no remote endpoint: pass --endpoint or set {ENDPOINT_ENV}")
    return endpoint


class RemoteBackend:
    def __init__(self, endpoint: str | None = None, *, max_concurrency: int = 4, retries: int = 2,
                 backoff: float = 0.25, timeout: float = 30.0, client: httpx.Client | None = None):
        self.endpoint = resolve_endpoint(endpoint)
        self.retries = retries
        self.backoff = backoff
        self.capabilities = Capabilities(True, frozenset({"entropy"}), max_concurrency)
        self._sem = threading.BoundedSemaphore(max_concurrency)
        self._client = client or httpx.Client(timeout=timeout)

    def close(self):
        self._client.close()

    def _post(self, body: dict) -> dict:
        attempts = 0
        status = None
        while True:
            attempts += 1
            try:
                with self._sem:
                    resp = self._client.post(self.endpoint, json=body)
                status = resp.status_code
            except httpx.TransportError as exc:
                err = exc
            else:
                if status == STATUS_OK:
                    return resp.json()
                if status == STATUS_PARSE_HINT:
                    raise ParseError(f"service could not score sample {body['id']!r}: {resp.text[:200]}")
                if status != STATUS_OVERLOAD:
                    raise BackendError(f"remote returned HTTP {status}", attempts=attempts, status=status)
                err = None
            if attempts > self.retries:
                msg = f"remote call for {body['id']!r} failed after {attempts} attempts"
                if err is not None:
                    msg += f": {err}"
                raise BackendError(msg, attempts=attempts, status=status)
            delay = self.backoff * 2 ** (attempts - 1)
            logger.info("retrying %s in %.2fs (attempt %d, status %s)", body["id"], delay, attempts, status)
            time.sleep(delay)

    def _call(self, sample: SampleRecord, prompt: str, mode: str) -> ModelOutput:
        doc = self._post({"id": sample.id, "prompt": prompt, "mode": mode})
        score = sample.scale.clamp(parse_score(doc.get("text", "")), what=f"{sample.id} remote score")
        return ModelOutput(
            score=score,
            token_dists=as_tuple_dists(doc.get("token_probs")),
            latency=float(doc.get("latency_ms") or 0.0) / 1000.0,
        )

    def predict(self, sample: SampleRecord) -> ModelOutput:
        out = self._call(sample, build_base_prompt(sample), "base")
        if not out.token_dists:
            raise CapabilityError(f"remote answer for {sample.id!r} carries no token_probs")
        return out

    def cross_verify(self, sample: SampleRecord, enhanced_prompt: str) -> ModelOutput:
        return self._call(sample, enhanced_prompt, "cross_verify")
