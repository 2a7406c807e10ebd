"""The two model kinds: synthetic logistic files and Python hooks.

Both answer one request as {finding: probability}.  The synthetic kind reads
masks directly (its weights attach to whole features, so perturbation of the
embedding values is irrelevant to it); the hook kind receives the perturbed
word list, boxes, and embeddings and is free to run any real model.
"""

from __future__ import annotations

import importlib
import importlib.util
import json
import math
from pathlib import Path

from .features import HeldInstance, apply_token_mask, apply_visual_mask


class SyntheticModel:
    """Logistic model per finding over word and box indicator features."""

    def __init__(self, findings: dict):
        # findings: {label: {"bias": float, "word_weights": {word: w},
        #                    "box_weights": {int index: w}}}
        self.findings = findings

    @classmethod
    def from_file(cls, path) -> "SyntheticModel":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if data.get("kind") != "synthetic-logistic":
            raise ValueError(f"{path}: not a synthetic-logistic model file")
        findings = {}
        for label, fw in data["findings"].items():
            findings[label] = {
                "bias": float(fw.get("bias", 0.0)),
                "word_weights": {str(k): float(v) for k, v in fw.get("word_weights", {}).items()},
                "box_weights": {int(k): float(v) for k, v in fw.get("box_weights", {}).items()},
            }
        if not findings:
            raise ValueError(f"{path}: model has no findings")
        return cls(findings)

    def predict(self, instance: HeldInstance, request: dict, config) -> dict:
        unique = instance.unique_words
        token_mask = request["token_mask"]
        visual_mask = request["visual_mask"]
        if len(token_mask) != len(unique):
            raise ValueError(
                f"token_mask length {len(token_mask)} != {len(unique)} distinct words"
            )
        if len(visual_mask) != instance.n_boxes:
            raise ValueError(
                f"visual_mask length {len(visual_mask)} != {instance.n_boxes} boxes"
            )
        out = {}
        for label, fw in self.findings.items():
            logit = fw["bias"]
            for word, bit in zip(unique, token_mask):
                if bit:
                    logit += fw["word_weights"].get(word, 0.0)
            for j, bit in enumerate(visual_mask):
                if bit:
                    logit += fw["box_weights"].get(j, 0.0)
            out[label] = 1.0 / (1.0 + math.exp(-logit))
        return out


class HookModel:
    """Wraps predict(words, boxes, embeddings) -> {finding: probability}.

    The adapter perturbs the held tensors per the request's masks, strategy,
    and strategy_seed, then hands the hook ready-to-consume inputs.  The
    placeholder word arrives verbatim in the word list; the hook decides how
    its tokenizer encodes it.
    """

    def __init__(self, predict_fn):
        self.predict_fn = predict_fn

    @classmethod
    def from_target(cls, target: str) -> "HookModel":
        if target.endswith(".py") or "/" in target:
            spec = importlib.util.spec_from_file_location("mmsurrogate_adapter_hook", target)
            if spec is None or spec.loader is None:
                raise ValueError(f"cannot load hook file {target!r}")
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
        else:
            module = importlib.import_module(target)
        predict_fn = getattr(module, "predict", None)
        if not callable(predict_fn):
            raise ValueError(f"hook {target!r} does not expose a callable predict()")
        return cls(predict_fn)

    def predict(self, instance: HeldInstance, request: dict, config) -> dict:
        words = apply_token_mask(instance, request["token_mask"], config.placeholder)
        boxes, embeddings = apply_visual_mask(
            instance,
            request["visual_mask"],
            request.get("strategy", "zero"),
            int(request.get("strategy_seed", 0)),
            config.mean_std_k,
        )
        probabilities = self.predict_fn(words, boxes, embeddings)
        return {str(k): float(v) for k, v in dict(probabilities).items()}


def load_model(spec: str):
    """Build a model from 'synthetic:<path>' or 'hook:<module-or-file>'."""
    kind, _, target = spec.partition(":")
    if kind == "synthetic":
        return SyntheticModel.from_file(target)
    if kind == "hook":
        return HookModel.from_target(target)
    raise ValueError(f"unknown model kind {kind!r} (expected synthetic or hook)")
