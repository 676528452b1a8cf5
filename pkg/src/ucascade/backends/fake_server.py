"""In-process fake of the remote MLLM service, for tests and local demos.

Serves answers from a replay dataset over the remote wire protocol and
records the peak number of requests in flight.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .remote import STATUS_OK, STATUS_OVERLOAD, STATUS_PARSE_HINT, render_score


class FakeMLLMServer:
    """Context manager running the fake service on 127.0.0.1.

    ``answer(body) -> (status, doc)`` overrides the default replay lookup.
    ``overload_first`` makes the first N requests answer 503.
    """

    def __init__(self, dataset=None, *, delay: float = 0.0, overload_first: int = 0, answer=None):
        self.dataset = dataset
        self.delay = delay
        self.answer = answer or self._replay_answer
        self._overload_left = overload_first
        self._lock = threading.Lock()
        self.in_flight = 0
        self.peak_in_flight = 0
        self.requests = []
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), self._handler())
        self._server.daemon_threads = True
        self._thread = None

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/predict"

    def __enter__(self):
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()

    def _replay_answer(self, body):
        rec = self.dataset.record(body["id"])
        if body["mode"] == "cross_verify":
            score = rec.get("large_cv_score")
            if score is None:
                return STATUS_PARSE_HINT, {"text": "unable to answer"}
            return STATUS_OK, {"text": render_score(score), "token_probs": rec.get("large_cv_token_probs"),
                               "latency_ms": 1000.0 * (rec.get("large_cv_latency") or 0.0)}
        return STATUS_OK, {"text": render_score(rec["large_score"]), "token_probs": rec["large_token_probs"],
                           "latency_ms": 1000.0 * (rec.get("large_latency") or 0.0)}

    def _handle(self, body):
        with self._lock:
            self.in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
            self.requests.append(body)
            overloaded = self._overload_left > 0
            if overloaded:
                self._overload_left -= 1
        try:
            if self.delay:
                time.sleep(self.delay)
            if overloaded:
                return STATUS_OVERLOAD, {"error": "overloaded"}
            return self.answer(body)
        finally:
            with self._lock:
                self.in_flight -= 1

    def _handler(self):
        fake = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length).decode("utf-8"))
                status, doc = fake._handle(body)
                payload = json.dumps(doc).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        return Handler
