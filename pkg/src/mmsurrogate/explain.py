"""End-to-end explanation pipelines.

Two pipelines produce a multi-modal explanation for one (instance, finding)
pair:

* separate: one surrogate per modality, the other modality pinned to its
  original features, outputs merged (2*S predictor requests);
* simultaneous: paired text+visual masks concatenated into one design matrix,
  a single surrogate with combined kernel weights (S requests).

A third, the random baseline, draws words and boxes uniformly and is the
evaluation lower bound.
"""

from __future__ import annotations

import numpy as np

from . import kernel
from .model import (
    Explanation,
    ExplainerConfig,
    Provenance,
    ValidationError,
    validate_config,
)
from .perturb import sample_masks
from .predictor import PredictionRequest, Predictor, next_request_id
from .seeding import derive_seed
from .surrogate import fit_weighted_ridge, rank_coefficients

_LOSS_EPS = 1e-12


def _check_finding(predictor: Predictor, finding: str) -> None:
    known = predictor.findings
    if known is not None and finding not in known:
        raise ValidationError(f"unknown finding {finding!r}; predictor knows {sorted(known)}")


def _predict_masks(predictor, instance, token_masks, visual_masks, config, tag):
    """Query the predictor once per (token, visual) mask pair, in order."""
    strategy_base = derive_seed(config.seed, f"{tag}:strategy")
    requests = [
        PredictionRequest(
            request_id=next_request_id(),
            instance_id=instance.id,
            token_mask=token_masks[i],
            visual_mask=visual_masks[i],
            strategy=config.strategy,
            strategy_seed=strategy_base + i,
        )
        for i in range(len(token_masks))
    ]
    return predictor.predict(instance, requests)


def _targets(predictions, finding, config) -> np.ndarray:
    try:
        probs = np.array([p[finding] for p in predictions])
    except KeyError:
        available = sorted(predictions[0].findings) if predictions else []
        raise ValidationError(f"unknown finding {finding!r}; predictor knows {available}") from None
    if config.target == "probability":
        return probs
    # loss target: cross-entropy against the unperturbed input's predicted label
    label = 1.0 if probs[0] >= 0.5 else 0.0
    clipped = np.clip(probs, _LOSS_EPS, 1.0 - _LOSS_EPS)
    return -(label * np.log(clipped) + (1.0 - label) * np.log(1.0 - clipped))


def _text_run(instance, finding, predictor, config):
    validate_config(config)
    _check_finding(predictor, finding)
    unique = instance.unique_words
    batch = sample_masks(
        len(unique), config.samples, config.p_text, derive_seed(config.seed, "text"), "text"
    )
    ones_visual = np.ones(instance.n_boxes, dtype=np.int8)
    visual_masks = [ones_visual] * batch.n_samples
    predictions = _predict_masks(predictor, instance, batch.masks, visual_masks, config, "text")
    targets = _targets(predictions, finding, config)
    weights = kernel.batch_weights(batch, config.kernel_width)
    fit = fit_weighted_ridge(batch.masks, targets, weights, config.ridge_lambda)
    items = [
        (unique[i], score) for i, score in rank_coefficients(fit.coefficients, config.k_words)
    ]
    return items, predictions[0]


def _visual_run(instance, finding, predictor, config):
    validate_config(config)
    _check_finding(predictor, finding)
    batch = sample_masks(
        instance.n_boxes,
        config.samples,
        config.p_visual,
        derive_seed(config.seed, "visual"),
        "visual",
    )
    ones_text = np.ones(len(instance.unique_words), dtype=np.int8)
    token_masks = [ones_text] * batch.n_samples
    predictions = _predict_masks(predictor, instance, token_masks, batch.masks, config, "visual")
    targets = _targets(predictions, finding, config)
    weights = kernel.batch_weights(batch, config.kernel_width)
    fit = fit_weighted_ridge(batch.masks, targets, weights, config.ridge_lambda)
    items = [
        (i, tuple(instance.boxes[i]), score)
        for i, score in rank_coefficients(fit.coefficients, config.k_boxes)
    ]
    return items, predictions[0]


def explain_text_only(instance, finding, predictor, config: ExplainerConfig) -> list:
    """Ranked (word, score) list from text perturbations only."""
    return _text_run(instance, finding, predictor, config)[0]


def explain_visual_only(instance, finding, predictor, config: ExplainerConfig) -> list:
    """Ranked (box_index, box, score) list from visual perturbations only."""
    return _visual_run(instance, finding, predictor, config)[0]


def _provenance(config, predictor, sub_seeds, base_prediction=None) -> Provenance:
    return Provenance(
        seed=config.seed,
        samples=config.samples,
        p_text=config.p_text,
        p_visual=config.p_visual,
        kernel_width=config.kernel_width,
        ridge_lambda=config.ridge_lambda,
        strategy=config.strategy,
        predictor=predictor.name,
        target=config.target,
        sub_seeds=tuple(sub_seeds.items()),
        base_probabilities=tuple(base_prediction.probabilities) if base_prediction else (),
    )


def _sub_seeds(config) -> dict:
    return {
        "text": derive_seed(config.seed, "text"),
        "visual": derive_seed(config.seed, "visual"),
    }


def explain_separate(instance, finding, predictor, config: ExplainerConfig) -> Explanation:
    """Merge a text-only and a visual-only run into one explanation.

    Issues exactly 2 * config.samples predictor requests; the unperturbed
    prediction is taken from row 0 rather than queried again.
    """
    word_items, base = _text_run(instance, finding, predictor, config)
    box_items, _ = _visual_run(instance, finding, predictor, config)
    return Explanation(
        instance_id=instance.id,
        finding=finding,
        mode="separate",
        word_items=tuple(word_items),
        box_items=tuple(box_items),
        provenance=_provenance(config, predictor, _sub_seeds(config), base),
    )


def explain_simultaneous(
    instance, finding, predictor, config: ExplainerConfig, combine_weights=None
) -> Explanation:
    """One surrogate over concatenated text+visual masks with combined weights.

    Issues exactly config.samples predictor requests.  ``combine_weights``
    swaps in an alternative per-sample weight combination rule; the default
    is :func:`kernel.combine_modal_weights` applied elementwise.
    """
    validate_config(config)
    _check_finding(predictor, finding)
    unique = instance.unique_words
    f_text = len(unique)
    text_batch = sample_masks(
        f_text, config.samples, config.p_text, derive_seed(config.seed, "text"), "text"
    )
    visual_batch = sample_masks(
        instance.n_boxes,
        config.samples,
        config.p_visual,
        derive_seed(config.seed, "visual"),
        "visual",
    )
    predictions = _predict_masks(
        predictor, instance, text_batch.masks, visual_batch.masks, config, "simultaneous"
    )
    targets = _targets(predictions, finding, config)
    w_text = kernel.batch_weights(text_batch, config.kernel_width)
    w_visual = kernel.batch_weights(visual_batch, config.kernel_width)
    if combine_weights is None:
        weights = (w_text + w_visual) / 2.0
    else:
        weights = np.array([combine_weights(t, v) for t, v in zip(w_text, w_visual)])
    design = np.hstack([text_batch.masks, visual_batch.masks])
    fit = fit_weighted_ridge(design, targets, weights, config.ridge_lambda)
    word_items = [
        (unique[i], score)
        for i, score in rank_coefficients(fit.coefficients[:f_text], config.k_words)
    ]
    box_items = [
        (i, tuple(instance.boxes[i]), score)
        for i, score in rank_coefficients(fit.coefficients[f_text:], config.k_boxes)
    ]
    return Explanation(
        instance_id=instance.id,
        finding=finding,
        mode="simultaneous",
        word_items=tuple(word_items),
        box_items=tuple(box_items),
        provenance=_provenance(config, predictor, _sub_seeds(config), predictions[0]),
    )


def random_explanation(instance, finding, k_words: int, k_boxes: int, seed: int) -> Explanation:
    """Uniform random word/box picks; the evaluation lower bound."""
    unique = instance.unique_words
    if k_words > len(unique):
        raise ValidationError(f"k_words {k_words} exceeds {len(unique)} unique words")
    if k_boxes > instance.n_boxes:
        raise ValidationError(f"k_boxes {k_boxes} exceeds {instance.n_boxes} boxes")
    rng = np.random.default_rng(seed)
    word_idx = sorted(rng.choice(len(unique), size=k_words, replace=False).tolist())
    box_idx = sorted(rng.choice(instance.n_boxes, size=k_boxes, replace=False).tolist())
    provenance = Provenance(
        seed=seed,
        samples=0,
        p_text=0.0,
        p_visual=0.0,
        kernel_width=0.0,
        ridge_lambda=0.0,
        strategy="zero",
        predictor="random",
        target="probability",
    )
    return Explanation(
        instance_id=instance.id,
        finding=finding,
        mode="random-baseline",
        word_items=tuple((unique[i], 0.0) for i in word_idx),
        box_items=tuple((i, tuple(instance.boxes[i]), 0.0) for i in box_idx),
        provenance=provenance,
    )
