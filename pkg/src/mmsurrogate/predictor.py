"""Black-box predictor contract: synthetic in-process models and wire clients.

The engine never hands raw features to a remote predictor more than once.  It
registers the full instance up front, then sends mask-only requests, which
keeps per-perturbation payloads tiny even for large embeddings.  Messages are
one JSON object per line:

    -> {"type": "register", "instance": {...instance file object...}}
    <- {"type": "registered", "instance_id": "..."}
    -> {"type": "predict", "requests": [{"request_id": "r1",
         "instance_id": "...", "token_mask": [1, 0, ...],
         "visual_mask": [1, 1, ...], "strategy": "zero",
         "strategy_seed": 123}, ...]}
    <- {"type": "predictions", "results": [{"request_id": "r1",
         "probabilities": {"nodule": 0.97, ...}}, ...]}
    <- {"type": "error", "request_id": "r1", "message": "..."}   (per-request)

``token_mask`` indexes the instance's distinct words in first-occurrence
order (see :attr:`Instance.unique_words`); ``visual_mask`` indexes boxes.
Responses are correlated by ``request_id`` only and may arrive out of order.
Transports: a subprocess's stdin/stdout (primary) or an HTTP POST endpoint
taking one message per request body (alternate).
"""

from __future__ import annotations

import itertools
import json
import math
import queue
import shlex
import subprocess
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np

from .model import Instance, SchemaError, ValidationError, read_json, write_json, FORMAT_VERSION

DEFAULT_TIMEOUT = 60.0
DEFAULT_BATCH_SIZE = 32


class PredictorError(RuntimeError):
    """The predictor failed: transport trouble, timeout, or a reported error."""


class ProtocolError(PredictorError):
    """The predictor answered, but not in the documented wire format."""


@dataclass(frozen=True, eq=False)
class PredictionRequest:
    """One mask pair for one registered instance."""

    request_id: str
    instance_id: str
    token_mask: np.ndarray
    visual_mask: np.ndarray
    strategy: str = "zero"
    strategy_seed: int = 0

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "instance_id": self.instance_id,
            "token_mask": np.asarray(self.token_mask, dtype=int).tolist(),
            "visual_mask": np.asarray(self.visual_mask, dtype=int).tolist(),
            "strategy": self.strategy,
            "strategy_seed": int(self.strategy_seed),
        }


@dataclass(frozen=True)
class Prediction:
    """Per-finding probabilities; findings are independent, not a simplex."""

    probabilities: tuple  # of (finding, probability)

    def __post_init__(self):
        probs = tuple(sorted((str(k), float(v)) for k, v in dict(self.probabilities).items()))
        object.__setattr__(self, "probabilities", probs)
        for finding, p in probs:
            if not (0.0 <= p <= 1.0):
                raise ValidationError(f"probability for {finding!r} out of [0, 1]: {p}")

    def __getitem__(self, finding: str) -> float:
        for k, v in self.probabilities:
            if k == finding:
                return v
        raise KeyError(finding)

    @property
    def findings(self) -> tuple:
        return tuple(k for k, _ in self.probabilities)

    def as_dict(self) -> dict:
        return dict(self.probabilities)


# ---------------------------------------------------------------------------
# synthetic logistic model


@dataclass(frozen=True)
class FindingWeights:
    """Logistic weights for one finding: bias + per-word and per-box terms."""

    bias: float = 0.0
    word_weights: tuple = ()  # of (word, weight)
    box_weights: tuple = ()  # of (box_index, weight)

    def __post_init__(self):
        ww = tuple(sorted((str(k), float(v)) for k, v in dict(self.word_weights).items()))
        bw = tuple(sorted((int(k), float(v)) for k, v in dict(self.box_weights).items()))
        object.__setattr__(self, "word_weights", ww)
        object.__setattr__(self, "box_weights", bw)
        values = [self.bias] + [v for _, v in ww] + [v for _, v in bw]
        if not all(math.isfinite(v) for v in values):
            raise ValidationError("synthetic model weights must be finite")


@dataclass(frozen=True)
class SyntheticLogisticModel:
    """Ground-truth oracle: an independent logistic model per finding."""

    findings: tuple  # of (label, FindingWeights)

    def __post_init__(self):
        items = dict(self.findings)
        if not items:
            raise ValidationError("synthetic model needs at least one finding")
        object.__setattr__(self, "findings", tuple(sorted(items.items())))

    @property
    def labels(self) -> tuple:
        return tuple(k for k, _ in self.findings)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "synthetic-logistic",
            "findings": {
                label: {
                    "bias": fw.bias,
                    "word_weights": dict(fw.word_weights),
                    "box_weights": {str(i): v for i, v in fw.box_weights},
                }
                for label, fw in self.findings
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticLogisticModel":
        if not isinstance(d, dict) or d.get("kind") != "synthetic-logistic":
            raise SchemaError("not a synthetic-logistic model file")
        if d.get("format_version") != FORMAT_VERSION:
            raise SchemaError(f"model file has format_version {d.get('format_version')!r}")
        try:
            findings = tuple(
                (
                    label,
                    FindingWeights(
                        bias=float(fw.get("bias", 0.0)),
                        word_weights=tuple(fw.get("word_weights", {}).items()),
                        box_weights=tuple(
                            (int(i), v) for i, v in fw.get("box_weights", {}).items()
                        ),
                    ),
                )
                for label, fw in d["findings"].items()
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise SchemaError(f"model object missing/invalid field: {exc}") from exc
        return cls(findings=findings)


def load_model(path) -> SyntheticLogisticModel:
    return SyntheticLogisticModel.from_dict(read_json(path))


def save_model(model: SyntheticLogisticModel, path) -> None:
    write_json(model.to_dict(), path)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def synthetic_predict(
    model: SyntheticLogisticModel, instance: Instance, token_mask, visual_mask
) -> Prediction:
    """Probability per finding: sigmoid(bias + sum of active feature weights).

    "Active" means mask bit 1; inactivated features simply drop out, so the
    result does not depend on the embedding inactivation strategy.
    """
    token_mask = np.asarray(token_mask, dtype=np.float64).ravel()
    visual_mask = np.asarray(visual_mask, dtype=np.float64).ravel()
    unique = instance.unique_words
    if token_mask.shape[0] != len(unique):
        raise ValidationError(
            f"token mask length {token_mask.shape[0]} != {len(unique)} unique words"
        )
    if visual_mask.shape[0] != instance.n_boxes:
        raise ValidationError(
            f"visual mask length {visual_mask.shape[0]} != {instance.n_boxes} boxes"
        )
    out = {}
    for label, fw in model.findings:
        logit = fw.bias
        ww = dict(fw.word_weights)
        for w, bit in zip(unique, token_mask):
            if bit:
                logit += ww.get(w, 0.0)
        bw = dict(fw.box_weights)
        for j, bit in enumerate(visual_mask):
            if bit:
                logit += bw.get(j, 0.0)
        out[label] = float(sigmoid(logit))
    return Prediction(probabilities=tuple(out.items()))


# ---------------------------------------------------------------------------
# predictor interface


class Predictor:
    """Anything that can answer mask-pair requests for a registered instance."""

    name: str = "predictor"
    findings = None  # known label tuple, or None until discovered

    def predict(self, instance: Instance, requests) -> list:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SyntheticPredictor(Predictor):
    """In-process predictor around a :class:`SyntheticLogisticModel`.

    Batches are evaluated with one matrix product per finding, so large
    perturbation runs stay cheap.
    """

    def __init__(self, model: SyntheticLogisticModel, name: str = "synthetic"):
        self.model = model
        self.name = name
        self.findings = model.labels

    def _weight_vectors(self, instance: Instance):
        unique = instance.unique_words
        vectors = []
        for label, fw in self.model.findings:
            ww = dict(fw.word_weights)
            bw = dict(fw.box_weights)
            wv = np.array([ww.get(w, 0.0) for w in unique])
            bv = np.array([bw.get(j, 0.0) for j in range(instance.n_boxes)])
            vectors.append((label, fw.bias, wv, bv))
        return vectors

    def predict(self, instance: Instance, requests) -> list:
        requests = list(requests)
        if not requests:
            return []
        token = np.asarray([r.token_mask for r in requests], dtype=np.float64)
        visual = np.asarray([r.visual_mask for r in requests], dtype=np.float64)
        unique_count = len(instance.unique_words)
        if token.shape[1] != unique_count or visual.shape[1] != instance.n_boxes:
            raise ValidationError("mask lengths do not match the instance")
        per_finding = {}
        for label, bias, wv, bv in self._weight_vectors(instance):
            per_finding[label] = sigmoid(bias + token @ wv + visual @ bv)
        return [
            Prediction(
                probabilities=tuple((label, float(per_finding[label][i])) for label in per_finding)
            )
            for i in range(len(requests))
        ]


class CountingPredictor(Predictor):
    """Wrapper that counts requests; used to verify prediction budgets."""

    def __init__(self, inner: Predictor):
        self.inner = inner
        self.name = inner.name
        self.request_count = 0

    @property
    def findings(self):
        return self.inner.findings

    def predict(self, instance, requests):
        requests = list(requests)
        self.request_count += len(requests)
        return self.inner.predict(instance, requests)


# ---------------------------------------------------------------------------
# wire transports


def _match_results(requests, resolved) -> list:
    missing = [r.request_id for r in requests if r.request_id not in resolved]
    if missing:
        raise ProtocolError(f"response missing request ids: {', '.join(missing)}")
    return [resolved[r.request_id] for r in requests]


def _parse_predictions(message, resolved, known_ids) -> None:
    results = message.get("results")
    if not isinstance(results, list):
        raise ProtocolError("predictions message lacks a results array")
    for entry in results:
        rid = entry.get("request_id")
        if rid not in known_ids:
            raise ProtocolError(f"response for unknown request id {rid!r}")
        try:
            resolved[rid] = Prediction(probabilities=tuple(entry["probabilities"].items()))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ProtocolError(f"malformed result for request {rid!r}: {exc}") from exc


class _WireClient(Predictor):
    """Shared register-once, mask-only request logic for remote transports."""

    def __init__(self, timeout: float = DEFAULT_TIMEOUT, batch_size: int = DEFAULT_BATCH_SIZE):
        self.timeout = timeout
        self.batch_size = max(1, int(batch_size))
        self._registered = set()

    def _roundtrip(self, message: dict, expect_ids=None) -> dict:
        raise NotImplementedError

    def _register(self, instance: Instance) -> None:
        if instance.id in self._registered:
            return
        reply = self._roundtrip({"type": "register", "instance": instance.to_dict()})
        if reply.get("type") == "error":
            raise PredictorError(f"predictor rejected registration: {reply.get('message')}")
        if reply.get("type") != "registered" or reply.get("instance_id") != instance.id:
            raise ProtocolError(f"unexpected registration reply: {reply}")
        self._registered.add(instance.id)

    def predict(self, instance: Instance, requests) -> list:
        requests = list(requests)
        if not requests:
            return []
        self._register(instance)
        resolved = {}
        for start in range(0, len(requests), self.batch_size):
            chunk = requests[start : start + self.batch_size]
            self._predict_chunk(chunk, resolved)
        predictions = _match_results(requests, resolved)
        if self.findings is None:
            self.findings = predictions[0].findings
        return predictions

    def _predict_chunk(self, chunk, resolved) -> None:
        message = {"type": "predict", "requests": [r.to_dict() for r in chunk]}
        known_ids = {r.request_id for r in chunk}
        reply = self._handle_reply(self._roundtrip(message, expect_ids=known_ids), resolved, known_ids)
        return reply

    @staticmethod
    def _handle_reply(message, resolved, known_ids):
        kind = message.get("type")
        if kind == "predictions":
            _parse_predictions(message, resolved, known_ids)
        elif kind == "error":
            rid = message.get("request_id")
            detail = f" for request {rid}" if rid else ""
            raise PredictorError(f"predictor error{detail}: {message.get('message')}")
        else:
            raise ProtocolError(f"unexpected message type {kind!r}")


class SubprocessPredictor(_WireClient):
    """Speaks the line protocol over a child process's stdin/stdout."""

    def __init__(self, argv, timeout=DEFAULT_TIMEOUT, batch_size=DEFAULT_BATCH_SIZE, name=None):
        super().__init__(timeout=timeout, batch_size=batch_size)
        if isinstance(argv, str):
            argv = shlex.split(argv)
        self.argv = list(argv)
        self.name = name or "cmd:" + " ".join(self.argv)
        self._proc = None
        self._lines = None

    def _ensure_started(self):
        if self._proc is not None and self._proc.poll() is None:
            return
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise PredictorError(f"cannot start predictor {self.argv}: {exc}") from exc
        self._registered = set()
        self._lines = queue.Queue()

        def _pump(stream, lines):
            for line in stream:
                lines.put(line)
            lines.put(None)  # EOF marker

        threading.Thread(
            target=_pump, args=(self._proc.stdout, self._lines), daemon=True
        ).start()

    def _send(self, message: dict) -> None:
        try:
            self._proc.stdin.write(json.dumps(message) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PredictorError(f"predictor process closed its input: {exc}") from exc

    def _read_message(self, deadline: float) -> dict:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise PredictorError(f"predictor timed out after {self.timeout:g}s")
        try:
            line = self._lines.get(timeout=remaining)
        except queue.Empty:
            raise PredictorError(f"predictor timed out after {self.timeout:g}s") from None
        if line is None:
            raise PredictorError("predictor process closed its output")
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"predictor sent a non-JSON line: {line!r}") from exc
        if not isinstance(message, dict):
            raise ProtocolError(f"predictor sent a non-object message: {message!r}")
        return message

    def _roundtrip(self, message: dict, expect_ids=None) -> dict:
        self._ensure_started()
        self._send(message)
        return self._read_message(time.monotonic() + self.timeout)

    def _predict_chunk(self, chunk, resolved) -> None:
        # A batch is answered by per-request error lines (if any) followed by
        # one predictions line, which closes the batch: ids still unresolved
        # after it are a protocol violation.
        self._ensure_started()
        known_ids = {r.request_id for r in chunk}
        self._send({"type": "predict", "requests": [r.to_dict() for r in chunk]})
        deadline = time.monotonic() + self.timeout
        while True:
            message = self._read_message(deadline)
            self._handle_reply(message, resolved, known_ids)
            if message.get("type") == "predictions":
                missing = sorted(known_ids - resolved.keys())
                if missing:
                    raise ProtocolError(f"response missing request ids: {', '.join(missing)}")
                return

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None


class HttpPredictor(_WireClient):
    """POSTs one protocol message per request body to a single endpoint."""

    def __init__(self, url, timeout=DEFAULT_TIMEOUT, batch_size=DEFAULT_BATCH_SIZE, name=None):
        super().__init__(timeout=timeout, batch_size=batch_size)
        self.url = url
        self.name = name or f"url:{url}"

    def _roundtrip(self, message: dict, expect_ids=None) -> dict:
        payload = json.dumps(message).encode("utf-8")
        request = urllib.request.Request(
            self.url, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                body = response.read()
        except urllib.error.URLError as exc:
            raise PredictorError(f"HTTP predictor {self.url} failed: {exc}") from exc
        try:
            reply = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"HTTP predictor sent a non-JSON body: {body[:200]!r}") from exc
        if not isinstance(reply, dict):
            raise ProtocolError(f"HTTP predictor sent a non-object message: {reply!r}")
        return reply


def remote_predict(predictor: Predictor, instance: Instance, requests) -> list:
    """One Prediction per request, matched by request_id, in request order."""
    return predictor.predict(instance, list(requests))


# ---------------------------------------------------------------------------
# construction from a spec string


_request_counter = itertools.count()


def next_request_id() -> str:
    """Session-unique request id."""
    return f"r{next(_request_counter):08d}"


def build_predictor(spec: str, timeout=DEFAULT_TIMEOUT, batch_size=DEFAULT_BATCH_SIZE) -> Predictor:
    """Build a predictor from 'synthetic:<path>', 'cmd:<argv>' or 'url:<endpoint>'."""
    kind, sep, rest = spec.partition(":")
    if not sep or not rest:
        raise ValidationError(
            f"predictor spec {spec!r} must look like synthetic:<path>, cmd:<argv>, or url:<endpoint>"
        )
    if kind == "synthetic":
        return SyntheticPredictor(load_model(rest), name=f"synthetic:{rest}")
    if kind == "cmd":
        return SubprocessPredictor(rest, timeout=timeout, batch_size=batch_size)
    if kind == "url":
        return HttpPredictor(rest, timeout=timeout, batch_size=batch_size)
    raise ValidationError(f"unknown predictor kind {kind!r} (expected synthetic, cmd, or url)")
