"""Binomial perturbation masks and feature inactivation.

A mask is a binary vector over one modality's features: the distinct words of
the report, or the visual boxes.  Bit 1 keeps a feature, bit 0 inactivates
it.  Row 0 of every batch is the all-ones mask, i.e. the unperturbed input.

Text inactivation replaces every occurrence of a word with the reserved
placeholder :data:`MASK_WORD` (sequence length never changes); visual
inactivation rewrites the embedding row according to a pluggable strategy and
zeroes the box coordinates alongside it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Instance, STRATEGIES, ValidationError

#: Reserved placeholder standing in for an inactivated word.  Predictors
#: decide how to encode it (mask token, unknown token, ...).
MASK_WORD = "¤masked¤"


@dataclass(frozen=True, eq=False)
class PerturbationBatch:
    """S binary masks over F features of one modality; row 0 is all ones."""

    modality: str  # "text" | "visual"
    masks: np.ndarray  # (S, F) of 0/1, int8

    def __post_init__(self):
        if self.modality not in ("text", "visual"):
            raise ValidationError(f"modality must be 'text' or 'visual', got {self.modality!r}")
        masks = np.asarray(self.masks, dtype=np.int8)
        if masks.ndim != 2 or masks.shape[0] < 1 or masks.shape[1] < 1:
            raise ValidationError(f"masks must be a non-empty 2-d matrix, got shape {masks.shape}")
        if not np.isin(masks, (0, 1)).all():
            raise ValidationError("mask entries must be 0 or 1")
        if not (masks[0] == 1).all():
            raise ValidationError("mask row 0 must be all ones (the original input)")
        masks = masks.copy()
        masks.setflags(write=False)
        object.__setattr__(self, "masks", masks)

    @property
    def n_samples(self) -> int:
        return self.masks.shape[0]

    @property
    def n_features(self) -> int:
        return self.masks.shape[1]


@dataclass(frozen=True)
class InactivationStrategy:
    """How an inactivated visual feature is rewritten.

    kind "zero" sets the embedding row to zeros; "mean-std" replaces each
    element with mean(row) + mean_std_k * std(row) * u for a fresh draw
    u in {-1, +1}; "randomize" draws each element uniformly from
    [min(row), max(row)].  All strategies zero the box coordinates.
    """

    kind: str = "zero"
    mean_std_k: float = 2.0

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValidationError(f"strategy kind must be one of {list(STRATEGIES)}")
        if not np.isfinite(self.mean_std_k):
            raise ValidationError("mean_std_k must be finite")


def sample_masks(
    feature_count: int, samples: int, p: float, seed: int, modality: str = "text"
) -> "PerturbationBatch":
    """Draw a batch of Bernoulli masks.

    Row 0 is all ones; in rows 1..samples-1 each entry is independently 0
    with probability ``p``.  Deterministic for fixed arguments.
    """
    if feature_count < 1:
        raise ValidationError("feature_count must be >= 1")
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    if not (0.0 <= p <= 1.0):
        raise ValidationError("p must be in [0, 1]")
    rng = np.random.default_rng(seed)
    masks = np.ones((samples, feature_count), dtype=np.int8)
    if samples > 1:
        # entry is 0 with probability p; rng.random() lies in [0, 1)
        masks[1:] = (rng.random((samples - 1, feature_count)) >= p).astype(np.int8)
    return PerturbationBatch(modality=modality, masks=masks)


def _check_mask(mask, length: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.int8).ravel()
    if mask.shape[0] != length:
        raise ValidationError(f"mask length {mask.shape[0]} does not match feature count {length}")
    return mask


def apply_text_mask(instance: Instance, mask) -> list:
    """Return the report words with every masked-off distinct word replaced.

    ``mask`` indexes :attr:`Instance.unique_words`; all occurrences of a word
    toggle together, so the output has the same length as ``instance.words``.
    """
    unique = instance.unique_words
    mask = _check_mask(mask, len(unique))
    inactive = {w for w, bit in zip(unique, mask) if bit == 0}
    if not inactive:
        return list(instance.words)
    return [MASK_WORD if w in inactive else w for w in instance.words]


def apply_visual_mask(instance: Instance, mask, strategy: InactivationStrategy, seed: int = 0):
    """Return (boxes, embeddings) with masked-off rows rewritten per strategy.

    Active rows are bitwise-unchanged copies.  Random draws (mean-std and
    randomize kinds) are consumed in ascending row order from a generator
    seeded with ``seed``, so identical arguments give identical outputs.
    """
    mask = _check_mask(mask, instance.n_boxes)
    boxes = np.array(instance.boxes, dtype=np.float64)
    embeddings = np.array(instance.embeddings, dtype=np.float64)
    inactive = np.flatnonzero(mask == 0)
    if inactive.size == 0:
        return boxes, embeddings
    rng = np.random.default_rng(seed)
    for i in inactive:
        row = instance.embeddings[i]
        if strategy.kind == "zero":
            embeddings[i] = 0.0
        elif strategy.kind == "mean-std":
            u = rng.integers(0, 2, size=row.shape[0]) * 2 - 1
            embeddings[i] = row.mean() + strategy.mean_std_k * row.std() * u
        else:  # randomize
            embeddings[i] = rng.uniform(row.min(), row.max(), size=row.shape[0])
        boxes[i] = 0.0
    return boxes, embeddings
