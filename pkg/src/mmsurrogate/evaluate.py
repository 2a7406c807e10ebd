"""Agreement metrics between explanations and expert annotations.

Text agreement is set intersection-over-union of identified words.  Image
agreement is region IoU: each side's boxes are merged into one point set
(overlaps within a side count once) and the two regions are compared, which
scores differently-sized, unaligned box sets sensibly.  Empty-vs-empty is
defined as perfect agreement (1.0), empty-vs-nonempty as 0.0.

Corpus-level helpers compute inter-annotator agreement (the de facto upper
bound), the random-explanation baseline (the lower bound), and grouped mean
roll-ups with JSON and aligned-column text output.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .explain import random_explanation
from .model import ValidationError, as_box_array, validate_boxes
from .seeding import derive_seed

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# report types


@dataclass(frozen=True)
class SimilarityReport:
    """Text and image IoU between two explanation-like objects."""

    instance_id: str
    finding: str
    text_iou: float
    image_iou: float
    left_source: str
    right_source: str
    mode: str = ""
    predictor: str = ""
    annotator: str = ""

    def __post_init__(self):
        for name in ("text_iou", "image_iou"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} out of [0, 1]: {v}")

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "finding": self.finding,
            "text_iou": self.text_iou,
            "image_iou": self.image_iou,
            "left_source": self.left_source,
            "right_source": self.right_source,
            "mode": self.mode,
            "predictor": self.predictor,
            "annotator": self.annotator,
        }


@dataclass(frozen=True)
class AggregateReport:
    """Mean text/image IoU for one group of similarity reports."""

    group: tuple  # of (key, value)
    mean_text_iou: float
    mean_image_iou: float
    count: int

    def __post_init__(self):
        object.__setattr__(self, "group", tuple(self.group))
        if self.count < 1:
            raise ValidationError("aggregate count must be >= 1")
        for name in ("mean_text_iou", "mean_image_iou"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} out of [0, 1]: {v}")

    def to_dict(self) -> dict:
        return {
            "group": dict(self.group),
            "mean_text_iou": self.mean_text_iou,
            "mean_image_iou": self.mean_image_iou,
            "count": self.count,
        }


# ---------------------------------------------------------------------------
# core metrics


def text_similarity(words_a, words_b) -> float:
    """|A & B| / |A | B| over word sets; 1.0 when both sides are empty."""
    a, b = set(words_a), set(words_b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def region_union_area(boxes) -> float:
    """Exact area of the union of axis-aligned rectangles.

    Coordinate compression: the distinct x and y cuts tile the plane into
    cells that are each fully inside or outside every box, so summing covered
    cells is exact.  Box counts here are tens at most, so the O(nx*ny*n)
    cover test is cheap.
    """
    arr = as_box_array(boxes)
    n = arr.shape[0]
    if n == 0:
        return 0.0
    if n == 1:
        x1, y1, x2, y2 = arr[0]
        return float((x2 - x1) * (y2 - y1))
    xs = np.unique(arr[:, [0, 2]])
    ys = np.unique(arr[:, [1, 3]])
    # covered[i, j]: cell (xs[i], xs[i+1]) x (ys[j], ys[j+1]) inside some box
    x_lo, x_hi = xs[:-1], xs[1:]
    y_lo, y_hi = ys[:-1], ys[1:]
    covered = np.zeros((x_lo.size, y_lo.size), dtype=bool)
    for x1, y1, x2, y2 in arr:
        xi = (x_lo >= x1) & (x_hi <= x2)
        yi = (y_lo >= y1) & (y_hi <= y2)
        covered |= xi[:, None] & yi[None, :]
    widths = x_hi - x_lo
    heights = y_hi - y_lo
    return float((widths[:, None] * heights[None, :])[covered].sum())


def _clip_box(a, b):
    x1 = max(a[0], b[0])
    y1 = max(a[1], b[1])
    x2 = min(a[2], b[2])
    y2 = min(a[3], b[3])
    if x1 < x2 and y1 < y2:
        return (x1, y1, x2, y2)
    return None


def image_similarity(boxes_a, boxes_b) -> float:
    """Region IoU between the unions of two box sets.

    The intersection of two rectangle unions is the union of all pairwise
    clipped rectangles, so both numerator and denominator reduce to
    :func:`region_union_area` calls.
    """
    a = [tuple(float(v) for v in box) for box in boxes_a]
    b = [tuple(float(v) for v in box) for box in boxes_b]
    validate_boxes(as_box_array(a))
    validate_boxes(as_box_array(b))
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    if len(a) == 1 and len(b) == 1:
        clipped = _clip_box(a[0], b[0])
        inter = 0.0 if clipped is None else region_union_area([clipped])
        area_a = (a[0][2] - a[0][0]) * (a[0][3] - a[0][1])
        area_b = (b[0][2] - b[0][0]) * (b[0][3] - b[0][1])
        return inter / (area_a + area_b - inter)
    pairwise = [c for p in a for q in b if (c := _clip_box(p, q)) is not None]
    inter = region_union_area(pairwise) if pairwise else 0.0
    union = region_union_area(a + b)
    return inter / union


def _word_set(obj):
    if hasattr(obj, "word_set"):
        return obj.word_set
    raise ValidationError(f"object {type(obj).__name__} has no word_set")


def _box_list(obj):
    if hasattr(obj, "box_list"):
        return obj.box_list
    raise ValidationError(f"object {type(obj).__name__} has no box_list")


def _source(obj) -> str:
    return getattr(obj, "source_id", type(obj).__name__)


def evaluate_pair(left, right) -> SimilarityReport:
    """Compare two explanation-like objects (Explanation or ExpertAnnotation).

    Symmetric in its metric values; mode/predictor/annotator metadata is
    pulled from whichever side carries it, for later grouping.
    """
    if left.instance_id != right.instance_id:
        raise ValidationError(
            f"instance mismatch: {left.instance_id!r} vs {right.instance_id!r}"
        )
    finding = getattr(left, "finding", "") or getattr(right, "finding", "")
    mode = next((o.mode for o in (left, right) if hasattr(o, "mode")), "")
    predictor = next(
        (o.provenance.predictor for o in (left, right) if hasattr(o, "provenance")), ""
    )
    annotator = next((o.annotator_id for o in (left, right) if hasattr(o, "annotator_id")), "")
    return SimilarityReport(
        instance_id=left.instance_id,
        finding=finding,
        text_iou=text_similarity(_word_set(left), _word_set(right)),
        image_iou=image_similarity(_box_list(left), _box_list(right)),
        left_source=_source(left),
        right_source=_source(right),
        mode=mode,
        predictor=predictor,
        annotator=annotator,
    )


# ---------------------------------------------------------------------------
# corpus-level evaluation


def aggregate(reports, group_by=()) -> list:
    """Arithmetic mean of text/image IoU per group of reports.

    ``group_by`` names SimilarityReport fields (e.g. "mode", "annotator",
    "predictor"); an empty tuple yields one overall row.
    """
    reports = list(reports)
    if not reports:
        raise ValidationError("cannot aggregate an empty report list")
    group_by = tuple(group_by)
    groups = {}
    for r in reports:
        key = tuple((k, getattr(r, k)) for k in group_by)
        groups.setdefault(key, []).append(r)
    out = []
    for key in sorted(groups):
        members = groups[key]
        out.append(
            AggregateReport(
                group=key,
                mean_text_iou=float(np.mean([m.text_iou for m in members])),
                mean_image_iou=float(np.mean([m.image_iou for m in members])),
                count=len(members),
            )
        )
    return out


def _annotation_key(annotation):
    return (annotation.instance_id, frozenset(annotation.finding_context))


def inter_annotator_agreement(annotations) -> list:
    """Pairwise mean IoU between annotators over commonly annotated items.

    Returns one AggregateReport per unordered annotator pair; pairs with no
    overlap are skipped with a warning, and an empty list means no pair
    overlapped at all.
    """
    by_annotator = {}
    for a in annotations:
        by_annotator.setdefault(a.annotator_id, {})[_annotation_key(a)] = a
    names = sorted(by_annotator)
    if len(names) < 2:
        log.warning("inter-annotator agreement needs at least 2 annotators, got %d", len(names))
        return []
    out = []
    for i, left in enumerate(names):
        for right in names[i + 1 :]:
            shared = sorted(
                by_annotator[left].keys() & by_annotator[right].keys(),
                key=lambda k: (k[0], sorted(k[1])),
            )
            if not shared:
                log.warning("annotators %s and %s share no annotated items", left, right)
                continue
            pairs = [
                evaluate_pair(by_annotator[left][k], by_annotator[right][k]) for k in shared
            ]
            out.append(
                AggregateReport(
                    group=(("annotator_pair", f"{left}|{right}"),),
                    mean_text_iou=float(np.mean([p.text_iou for p in pairs])),
                    mean_image_iou=float(np.mean([p.image_iou for p in pairs])),
                    count=len(pairs),
                )
            )
    if not out:
        log.warning("no annotator pair shares any annotated item; agreement report is empty")
    return out


def _baseline_pair(instance, annotation, k_words, k_boxes, trials, seed):
    """Trial sums for one (instance, annotation) pair; see baseline_run."""
    finding = min(annotation.finding_context) if annotation.finding_context else "none"
    text_sum = image_sum = 0.0
    for t in range(trials):
        trial_seed = derive_seed(seed, f"baseline:{instance.id}:{annotation.annotator_id}:{t}")
        expl = random_explanation(instance, finding, k_words, k_boxes, trial_seed)
        report = evaluate_pair(expl, annotation)
        text_sum += report.text_iou
        image_sum += report.image_iou
    return annotation.annotator_id, text_sum, image_sum, trials


def baseline_run(
    instances, annotations, k_words: int, k_boxes: int, trials: int, seed: int, jobs: int = 1
) -> list:
    """Random-explanation baseline against every (instance, annotation) pair.

    Per pair, ``trials`` random explanations are scored against the
    annotation; per-annotator means and an overall mean are returned.
    Instances where k exceeds the candidate pool are skipped with a warning;
    the rest proceed.  ``jobs`` parallelizes over pairs; per-trial seeds are
    derived from ids, and means merge as sum+count, so results are identical
    at any worker count.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    by_id = {i.id: i for i in instances}
    pairs = []
    for annotation in annotations:
        instance = by_id.get(annotation.instance_id)
        if instance is None:
            log.warning("no instance %r for annotation by %s; skipping",
                        annotation.instance_id, annotation.annotator_id)
            continue
        pairs.append((instance, annotation))

    def run_pair(pair):
        instance, annotation = pair
        try:
            return _baseline_pair(instance, annotation, k_words, k_boxes, trials, seed)
        except ValidationError as exc:
            log.warning("baseline skipped instance %s: %s", instance.id, exc)
            return None

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            partials = list(pool.map(run_pair, pairs))
    else:
        partials = [run_pair(pair) for pair in pairs]

    sums = {}  # annotator -> [text_sum, image_sum, count]
    for partial in partials:
        if partial is None:
            continue
        annotator, text_sum, image_sum, count = partial
        acc = sums.setdefault(annotator, [0.0, 0.0, 0])
        acc[0] += text_sum
        acc[1] += image_sum
        acc[2] += count
    out = []
    total = [0.0, 0.0, 0]
    for annotator in sorted(sums):
        text_sum, image_sum, count = sums[annotator]
        out.append(
            AggregateReport(
                group=(("annotator", annotator),),
                mean_text_iou=text_sum / count,
                mean_image_iou=image_sum / count,
                count=count,
            )
        )
        total[0] += text_sum
        total[1] += image_sum
        total[2] += count
    if total[2]:
        out.append(
            AggregateReport(
                group=(("annotator", "*overall*"),),
                mean_text_iou=total[0] / total[2],
                mean_image_iou=total[1] / total[2],
                count=total[2],
            )
        )
    return out


# ---------------------------------------------------------------------------
# output formatting


def format_reports(reports, fmt: str = "table") -> str:
    """Render aggregate (or similarity) reports as JSON or aligned columns."""
    reports = list(reports)
    if fmt == "json":
        import json

        return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    if fmt != "table":
        raise ValidationError(f"unknown report format {fmt!r} (expected json or table)")
    if not reports:
        return "(empty report)\n"
    rows = []
    for r in reports:
        d = r.to_dict()
        if "group" in d:
            row = dict(d["group"])
            row["text_iou"] = f"{r.mean_text_iou:.3f}"
            row["image_iou"] = f"{r.mean_image_iou:.3f}"
            row["count"] = str(r.count)
        else:
            row = {
                "instance": r.instance_id,
                "finding": r.finding,
                "left": r.left_source,
                "right": r.right_source,
                "text_iou": f"{r.text_iou:.3f}",
                "image_iou": f"{r.image_iou:.3f}",
            }
        rows.append(row)
    columns = list(dict.fromkeys(k for row in rows for k in row))
    widths = {c: max(len(c), *(len(row.get(c, "")) for row in rows)) for c in columns}
    lines = ["  ".join(c.ljust(widths[c]) for c in columns)]
    for row in rows:
        lines.append("  ".join(row.get(c, "").ljust(widths[c]) for c in columns))
    return "\n".join(line.rstrip() for line in lines) + "\n"
