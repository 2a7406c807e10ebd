"""Held instances and mask application.

The protocol's token_mask indexes the instance's distinct words in
first-occurrence order; visual_mask indexes boxes.  Inactivation semantics
(what bit 0 does to a feature) live here, adapter-side, so any wrapped model
gets them for free:

* a masked word is replaced, every occurrence, by the placeholder word;
* a masked box has its embedding row rewritten per strategy and its box
  coordinates zeroed.  "zero" writes zeros; "mean-std" writes
  mean(row) + k * std(row) * u with a fresh u in {-1, +1} per element;
  "randomize" draws each element uniformly from [min(row), max(row)].

Random draws come from numpy's default generator seeded with the request's
strategy_seed, consumed in ascending masked-row order, so the engine can
reproduce the adapter's perturbations exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK_WORD = "¤masked¤"
STRATEGIES = ("zero", "mean-std", "randomize")


@dataclass(frozen=True)
class HeldInstance:
    """The feature tensors registered once per instance."""

    id: str
    words: tuple
    boxes: np.ndarray  # (N, 4)
    embeddings: np.ndarray  # (N, D)

    @classmethod
    def from_payload(cls, payload: dict) -> "HeldInstance":
        try:
            boxes = np.asarray(payload["boxes"], dtype=np.float64)
            embeddings = np.asarray(payload["embeddings"], dtype=np.float64)
            instance = cls(
                id=str(payload["id"]),
                words=tuple(str(w) for w in payload["words"]),
                boxes=boxes,
                embeddings=embeddings,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad instance payload: {exc}") from exc
        if boxes.ndim != 2 or boxes.shape[1] != 4 or embeddings.ndim != 2:
            raise ValueError("instance boxes must be (N, 4) and embeddings (N, D)")
        if boxes.shape[0] != embeddings.shape[0]:
            raise ValueError(
                f"{boxes.shape[0]} boxes but {embeddings.shape[0]} embedding rows"
            )
        if not instance.words:
            raise ValueError("instance has no words")
        return instance

    @property
    def unique_words(self) -> tuple:
        return tuple(dict.fromkeys(self.words))

    @property
    def n_boxes(self) -> int:
        return self.boxes.shape[0]


def apply_token_mask(instance: HeldInstance, mask, placeholder: str = MASK_WORD) -> list:
    """Word list with every masked-off distinct word replaced in place."""
    unique = instance.unique_words
    if len(mask) != len(unique):
        raise ValueError(f"token_mask length {len(mask)} != {len(unique)} distinct words")
    inactive = {w for w, bit in zip(unique, mask) if not bit}
    if not inactive:
        return list(instance.words)
    return [placeholder if w in inactive else w for w in instance.words]


def apply_visual_mask(instance: HeldInstance, mask, strategy: str, seed: int, mean_std_k: float = 2.0):
    """(boxes, embeddings) with masked-off rows rewritten per strategy."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {list(STRATEGIES)}")
    if len(mask) != instance.n_boxes:
        raise ValueError(f"visual_mask length {len(mask)} != {instance.n_boxes} boxes")
    boxes = np.array(instance.boxes)
    embeddings = np.array(instance.embeddings)
    inactive = [i for i, bit in enumerate(mask) if not bit]
    if not inactive:
        return boxes, embeddings
    rng = np.random.default_rng(seed)
    for i in inactive:
        row = instance.embeddings[i]
        if strategy == "zero":
            embeddings[i] = 0.0
        elif strategy == "mean-std":
            u = rng.integers(0, 2, size=row.shape[0]) * 2 - 1
            embeddings[i] = row.mean() + mean_std_k * row.std() * u
        else:  # randomize
            embeddings[i] = rng.uniform(row.min(), row.max(), size=row.shape[0])
        boxes[i] = 0.0
    return boxes, embeddings
