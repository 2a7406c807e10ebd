"""Static visual artifacts: box overlays (SVG) and word listings (HTML).

Model boxes are drawn blue, expert boxes green.  Output is deterministic for
identical inputs, and the renderer never invents geometry: every rectangle
comes from the explanation or the annotation.  The background X-ray, when
given, is referenced by path rather than embedded.
"""

from __future__ import annotations

import html
from dataclasses import dataclass

from .evaluate import image_similarity, text_similarity
from .model import Explanation, Instance, ValidationError, validate_boxes

MODEL_COLOR = "blue"
EXPERT_COLOR = "green"
CAPTION_LINE_HEIGHT = 16
CAPTION_PAD = 8


@dataclass(frozen=True)
class OverlayDocument:
    """A box overlay: viewport, styled rectangles, and caption lines."""

    width: int
    height: int
    model_boxes: tuple
    expert_boxes: tuple
    caption_lines: tuple
    background: str = ""

    def __post_init__(self):
        object.__setattr__(
            self, "model_boxes", tuple(tuple(float(v) for v in b) for b in self.model_boxes)
        )
        object.__setattr__(
            self, "expert_boxes", tuple(tuple(float(v) for v in b) for b in self.expert_boxes)
        )
        object.__setattr__(self, "caption_lines", tuple(str(s) for s in self.caption_lines))
        for boxes in (self.model_boxes, self.expert_boxes):
            if boxes:
                validate_boxes(boxes, self.width, self.height, what="overlay box")

    def to_svg(self) -> str:
        caption_height = (
            len(self.caption_lines) * CAPTION_LINE_HEIGHT + CAPTION_PAD
            if self.caption_lines
            else 0
        )
        total_height = self.height + caption_height
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{total_height}" viewBox="0 0 {self.width} {total_height}">'
        ]
        if self.background:
            parts.append(
                f'  <image href="{html.escape(self.background, quote=True)}" x="0" y="0" '
                f'width="{self.width}" height="{self.height}"/>'
            )
        else:
            parts.append(
                f'  <rect x="0" y="0" width="{self.width}" height="{self.height}" '
                f'fill="#202020"/>'
            )
        for color, boxes in ((MODEL_COLOR, self.model_boxes), (EXPERT_COLOR, self.expert_boxes)):
            for x1, y1, x2, y2 in boxes:
                parts.append(
                    f'  <rect x="{x1:g}" y="{y1:g}" width="{x2 - x1:g}" height="{y2 - y1:g}" '
                    f'fill="none" stroke="{color}" stroke-width="2"/>'
                )
        for i, line in enumerate(self.caption_lines):
            y = self.height + CAPTION_PAD + (i + 1) * CAPTION_LINE_HEIGHT - 4
            parts.append(
                f'  <text x="4" y="{y}" font-family="monospace" font-size="12" '
                f'fill="black">{html.escape(line)}</text>'
            )
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def render_image_overlay(
    instance: Instance, explanation: Explanation, annotation=None, background: str = ""
) -> OverlayDocument:
    """Blue rectangles for the explanation's boxes (in rank order), green for
    the expert's (in input order), plus a caption."""
    if explanation.instance_id != instance.id:
        raise ValidationError(
            f"explanation is for {explanation.instance_id!r}, instance is {instance.id!r}"
        )
    model_boxes = explanation.box_list
    expert_boxes = annotation.box_list if annotation is not None else ()
    caption = [f"Target: {explanation.finding}"]
    base = dict(explanation.provenance.base_probabilities)
    if base:
        predicted = sorted(f for f, p in base.items() if p >= 0.5) or ["none"]
        caption.append(f"Prediction: {', '.join(predicted)}")
    if annotation is not None:
        similarity = image_similarity(model_boxes, expert_boxes)
        caption.append(f"Image similarity: {similarity:.3f}")
    return OverlayDocument(
        width=instance.image_width,
        height=instance.image_height,
        model_boxes=model_boxes,
        expert_boxes=expert_boxes,
        caption_lines=tuple(caption),
        background=background,
    )


def _word_list_items(words, shared) -> str:
    if not words:
        return "<li>(none)</li>"
    out = []
    for w in words:
        escaped = html.escape(w)
        if w in shared:
            out.append(f'<li><mark class="shared">{escaped}</mark></li>')
        else:
            out.append(f"<li>{escaped}</li>")
    return "".join(out)


def render_text_listing(instance: Instance, explanation: Explanation, annotation=None) -> str:
    """HTML document listing model words (and expert words, when given) with
    shared words marked and the pair's text similarity."""
    if explanation.instance_id != instance.id:
        raise ValidationError(
            f"explanation is for {explanation.instance_id!r}, instance is {instance.id!r}"
        )
    model_words = [w for w, _ in explanation.word_items]
    lines = [
        "<!DOCTYPE html>",
        "<html><head><meta charset=\"utf-8\"/>",
        f"<title>{html.escape(instance.id)} / {html.escape(explanation.finding)}</title>",
        "<style>mark.shared { background: #c8f0c8; }</style>",
        "</head><body>",
        f"<h1>{html.escape(instance.id)} &mdash; {html.escape(explanation.finding)}</h1>",
    ]
    if annotation is not None:
        expert_words = sorted(annotation.word_set)
        shared = set(model_words) & set(expert_words)
        similarity = text_similarity(explanation.word_set, annotation.word_set)
        lines += [
            "<h2>Domain Expert:</h2>",
            f"<ul>{_word_list_items(expert_words, shared)}</ul>",
            "<h2>Explainable Model:</h2>",
            f"<ul>{_word_list_items(model_words, shared)}</ul>",
            f"<p>Similarity: {similarity:.3f}</p>",
        ]
    else:
        lines += [
            "<h2>Explainable Model:</h2>",
            f"<ul>{_word_list_items(model_words, set())}</ul>",
        ]
    lines.append("</body></html>")
    return "\n".join(lines) + "\n"
