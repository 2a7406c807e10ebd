"""Proximity weighting of perturbation samples.

Each perturbed sample gets a weight in (0, 1] measuring how close its mask is
to the all-ones original: weight = exp(-d^2 / sigma^2) with d the cosine
distance between the masks.  In simultaneous mode the text and visual weights
of a paired sample are summed and halved so the combined weight stays in
(0, 1] and the unperturbed pair keeps weight exactly 1.
"""

from __future__ import annotations

import math

import numpy as np

from .model import ValidationError
from .perturb import PerturbationBatch


def cosine_distance(mask_a, mask_b) -> float:
    """1 - cos(a, b) for binary masks; defined as 1.0 when b is all zeros."""
    a = np.asarray(mask_a, dtype=np.float64).ravel()
    b = np.asarray(mask_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"mask lengths differ: {a.shape[0]} vs {b.shape[0]}")
    norm_a = math.sqrt(float(a @ a))
    norm_b = math.sqrt(float(b @ b))
    if norm_a == 0.0:
        raise ValidationError("reference mask is all zeros")
    if norm_b == 0.0:
        return 1.0
    if np.array_equal(a, b):
        return 0.0
    d = 1.0 - float(a @ b) / (norm_a * norm_b)
    # clamp away float noise so d stays in [0, 1]
    return min(max(d, 0.0), 1.0)


def kernel_weight(distance: float, sigma: float) -> float:
    """exp(-d^2 / sigma^2); strictly decreasing in d, 1.0 at d = 0."""
    if sigma <= 0:
        raise ValidationError("kernel width sigma must be > 0")
    if not (0.0 <= distance <= 1.0):
        raise ValidationError("distance must be in [0, 1]")
    return math.exp(-(distance**2) / sigma**2)


def combine_modal_weights(w_text: float, w_visual: float) -> float:
    """Sum the two modality weights and halve, keeping the result in (0, 1]."""
    for name, w in (("w_text", w_text), ("w_visual", w_visual)):
        if not (0.0 < w <= 1.0):
            raise ValidationError(f"{name} must be in (0, 1], got {w!r}")
    return (w_text + w_visual) / 2.0


def batch_weights(batch: PerturbationBatch, sigma: float) -> np.ndarray:
    """Kernel weights of every mask row against the all-ones original (row 0).

    For a binary mask with s active bits out of F, the cosine distance from
    the all-ones mask reduces to 1 - sqrt(s / F); this vectorized form is
    exercised against :func:`cosine_distance` in the test suite.
    """
    if sigma <= 0:
        raise ValidationError("kernel width sigma must be > 0")
    masks = batch.masks
    f = masks.shape[1]
    active = masks.sum(axis=1, dtype=np.float64)
    distances = 1.0 - np.sqrt(active / f)
    weights = np.exp(-(distances**2) / sigma**2)
    weights[0] = 1.0  # exact for the unperturbed row
    return weights
