"""In-fixture HTTP model servers used by the unit and end-to-end tests.

EchoModelServer is a deterministic rule-based stand-in for a real model
server. Its generation rules (documented on the methods below) depend only
on (role, input text, seed, variant index), so repeated runs produce
byte-identical artifacts.

CannedModelServer returns scripted outputs keyed by input text and records
every /train payload, for tests that assert exact counts.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


def _hash_int(*parts: object) -> int:
    joined = ":".join(str(p) for p in parts)
    return int(hashlib.sha1(joined.encode("utf-8")).hexdigest(), 16)


def echo_backward(text: str, k: int, seed: int | None) -> list[str]:
    """Question -> triplet sequence: consecutive token pairs with rel tokens.

    Variant j only rotates the relation names, so content tokens survive the
    round trip unchanged.
    """
    s = seed or 0
    tokens = text.lower().split()
    variants = []
    for j in range(k):
        if len(tokens) == 1:
            variants.append(f"{tokens[0]} rel{(j + s) % 3} {tokens[0]}")
        else:
            triplets = [
                f"{tokens[i]} rel{(i + j + s) % 3} {tokens[i + 1]}"
                for i in range(len(tokens) - 1)
            ]
            variants.append(" </s> ".join(triplets))
    return variants


def echo_forward(text: str, k: int, seed: int | None) -> list[str]:
    """Triplet sequence -> question: template over the recovered entities.

    The template index is a hash of (seed, text, variant), and template 3 is
    deliberately lossy (keeps only the first entity) so a deterministic
    fraction of round trips fails a semantic gate.
    """
    s = seed or 0
    entities: list[str] = []
    for chunk in text.lower().split("</s>"):
        words = chunk.split()
        if not words:
            continue
        for position in (0, 2):
            if position < len(words) and words[position] not in entities:
                entities.append(words[position])
    if not entities:
        entities = ["nothing"]
    variants = []
    for j in range(k):
        template_id = _hash_int(s, text, j) % 4
        joined = " ".join(entities)
        if template_id == 0:
            variants.append(f"what is {joined} ?")
        elif template_id == 1:
            variants.append(f"who {joined} ?")
        elif template_id == 2:
            variants.append(f"{joined} is what ?")
        else:
            variants.append(f"what is {entities[0]} ?")
    return variants


def echo_embed(text: str, dim: int = 32) -> list[float]:
    """Hashed bag-of-words vector; identical texts embed identically."""
    vec = [0.0] * dim
    for token in text.lower().split():
        vec[_hash_int(token) % dim] += 1.0
    return vec


class _Handler(BaseHTTPRequestHandler):
    server_version = "MockModelServer/0.1"

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        try:
            return json.loads(raw)
        except json.JSONDecodeError:
            return None

    def do_GET(self):
        if self.path == "/health":
            if self.server.owner.fail_health:
                self._reply(503, {"error": "unhealthy"})
            else:
                self._reply(200, {"status": "ok"})
        else:
            self._reply(404, {"error": "not found"})

    def do_POST(self):
        owner = self.server.owner
        payload = self._read_json()
        if payload is None or not isinstance(payload, dict):
            self._reply(400, {"error": "bad json"})
            return
        with owner.lock:
            owner.request_log.append((self.path, payload))
        if self.path == "/generate":
            self._generate(owner, payload)
        elif self.path == "/train":
            self._train(owner, payload)
        elif self.path == "/embed":
            self._embed(owner, payload)
        else:
            self._reply(404, {"error": "not found"})

    def _generate(self, owner, payload):
        inputs = payload.get("inputs")
        k = payload.get("k")
        if (
            not isinstance(inputs, list)
            or not inputs
            or any(not isinstance(t, str) or not t for t in inputs)
            or not isinstance(k, int)
            or k < 1
        ):
            self._reply(400, {"error": "bad generate request"})
            return
        fail = owner.take_failure("/generate")
        if fail:
            self._reply(500, {"error": "injected failure"})
            return
        try:
            outputs = [owner.generate(text, k, payload.get("seed")) for text in inputs]
        except KeyError as exc:
            self._reply(400, {"error": f"no scripted output for {exc}"})
            return
        self._reply(200, {"outputs": outputs})

    def _train(self, owner, payload):
        pairs = payload.get("pairs")
        if (
            not isinstance(pairs, list)
            or not pairs
            or any(
                not isinstance(p, dict) or not p.get("source") or not p.get("target")
                for p in pairs
            )
        ):
            self._reply(400, {"error": "bad train request"})
            return
        fail = owner.take_failure("/train")
        if fail:
            self._reply(500, {"error": "injected failure"})
            return
        with owner.lock:
            owner.train_calls.append(pairs)
            if owner.spool_dir:
                path = os.path.join(
                    owner.spool_dir, f"train_{len(owner.train_calls):04d}.jsonl"
                )
                with open(path, "w", encoding="utf-8") as handle:
                    for pair in pairs:
                        handle.write(json.dumps(pair, sort_keys=True) + "\n")
        self._reply(200, {"status": "completed", "steps": len(pairs)})

    def _embed(self, owner, payload):
        texts = payload.get("texts")
        if not isinstance(texts, list) or not texts:
            self._reply(400, {"error": "bad embed request"})
            return
        vectors = [echo_embed(text) for text in texts]
        self._reply(200, {"vectors": vectors, "dim": 32})


class MockModelServer:
    """Threaded HTTP server wrapper; use as a context manager."""

    def __init__(self, spool_dir: str | None = None):
        self.spool_dir = spool_dir
        self.lock = threading.Lock()
        self.train_calls: list[list[dict]] = []
        self.request_log: list[tuple[str, dict]] = []
        self.fail_health = False
        self._failures: dict[str, int] = {}
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self._httpd.owner = self
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    # scripted failure injection: next `count` requests to `path` answer 500
    def fail_next(self, path: str, count: int = 1) -> None:
        with self.lock:
            self._failures[path] = self._failures.get(path, 0) + count

    def take_failure(self, path: str) -> bool:
        with self.lock:
            remaining = self._failures.get(path, 0)
            if remaining > 0:
                self._failures[path] = remaining - 1
                return True
        return False

    def generate(self, text: str, k: int, seed):
        raise NotImplementedError

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address
        return f"http://{host}:{port}"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._httpd.shutdown()
        self._httpd.server_close()

    def generate_request_count(self) -> int:
        with self.lock:
            return sum(1 for path, _ in self.request_log if path == "/generate")


class EchoModelServer(MockModelServer):
    def __init__(self, role: str, spool_dir: str | None = None):
        super().__init__(spool_dir)
        if role not in ("forward", "backward", "embedder"):
            raise ValueError(f"unknown role {role!r}")
        self.role = role

    def generate(self, text: str, k: int, seed):
        if self.role == "backward":
            return echo_backward(text, k, seed)
        return echo_forward(text, k, seed)


class CannedModelServer(MockModelServer):
    """Returns outputs[text][:k] for /generate; raises 400 on unknown inputs."""

    def __init__(self, outputs: dict[str, list[str]], spool_dir: str | None = None):
        super().__init__(spool_dir)
        self.outputs = outputs

    def generate(self, text: str, k: int, seed):
        rows = self.outputs[text]
        return rows[:k]
