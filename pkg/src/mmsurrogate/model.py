"""Core data model: instances, expert annotations, explanations, configuration.

An :class:`Instance` is one vision+language data point: the ordered words of a
report plus N candidate image regions ("boxes"), each carrying pixel
coordinates and a D-dimensional embedding extracted upstream.  Expert
annotations and generated explanations both reduce to a word set and a box
set, which is what the evaluation metrics compare.

All types are immutable after construction and validate their invariants in
``__post_init__``; code further down the pipeline never sees an invalid
object.  Files are UTF-8 JSON with a top-level ``"format_version": 1``.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1

DEFAULT_FINDINGS = ("atelectasis", "cardiomegaly", "nodule")

EXPLANATION_MODES = ("separate", "simultaneous", "random-baseline")
STRATEGIES = ("zero", "mean-std", "randomize")
TARGETS = ("probability", "loss")


class SchemaError(ValueError):
    """A file could not be parsed as the documented JSON format."""


class ValidationError(ValueError):
    """A domain invariant was violated; the message names the invariant."""


# ---------------------------------------------------------------------------
# word normalization


def normalize_word(word: str) -> str:
    """Lowercase and strip surrounding whitespace/punctuation from one word.

    Idempotent; may return the empty string (e.g. for a bare hyphen), which
    callers drop.  Inner punctuation such as the hyphen in "x-ray" survives.
    """
    return word.strip().lower().strip(string.punctuation)


def normalize_words(words) -> tuple[str, ...]:
    """Normalize an ordered word sequence, dropping tokens that normalize away."""
    out = []
    for w in words:
        n = normalize_word(str(w))
        if n:
            out.append(n)
    return tuple(out)


def normalize_word_set(words) -> frozenset:
    """Normalize an unordered word collection into a deduplicated set."""
    return frozenset(normalize_words(words))


def tokenize_report(text: str) -> tuple[str, ...]:
    """Whitespace-tokenize free text into normalized words."""
    return normalize_words(text.split())


def validate_finding_labels(labels) -> tuple[str, ...]:
    labels = tuple(labels)
    if not labels:
        raise ValidationError("finding label set is empty")
    if len(set(labels)) != len(labels):
        raise ValidationError("finding label set contains duplicates")
    return labels


# ---------------------------------------------------------------------------
# boxes


def as_box_array(boxes) -> np.ndarray:
    """Coerce a box collection to a read-only (n, 4) float array."""
    arr = np.asarray(boxes, dtype=np.float64)
    if arr.size == 0:
        arr = arr.reshape(0, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValidationError(f"boxes must be (n, 4) coordinates, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def validate_boxes(boxes: np.ndarray, width=None, height=None, what: str = "box") -> None:
    """Check x1 < x2, y1 < y2, non-negative coords, and image bounds if given."""
    for i, (x1, y1, x2, y2) in enumerate(np.asarray(boxes, dtype=np.float64)):
        ctx = f"{what} {i} ({x1:g},{y1:g},{x2:g},{y2:g})"
        if not np.isfinite([x1, y1, x2, y2]).all():
            raise ValidationError(f"{ctx}: non-finite coordinate")
        if not x1 < x2:
            raise ValidationError(f"{ctx}: x1 < x2 violated")
        if not y1 < y2:
            raise ValidationError(f"{ctx}: y1 < y2 violated")
        if x1 < 0 or y1 < 0:
            raise ValidationError(f"{ctx}: negative coordinate")
        if width is not None and x2 > width:
            raise ValidationError(f"{ctx}: x2 exceeds image width {width:g}")
        if height is not None and y2 > height:
            raise ValidationError(f"{ctx}: y2 exceeds image height {height:g}")


# ---------------------------------------------------------------------------
# Instance


@dataclass(frozen=True, eq=False)
class Instance:
    """One vision+language data point with precomputed visual features.

    ``words`` is the report in order (normalized, may repeat); ``boxes`` is an
    (N, 4) array of (x1, y1, x2, y2) pixel coordinates and ``embeddings`` an
    aligned (N, D) array.  Both arrays are read-only.
    """

    id: str
    words: tuple[str, ...]
    image_width: int
    image_height: int
    boxes: np.ndarray
    embeddings: np.ndarray
    gold_findings: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "boxes", as_box_array(self.boxes))
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if emb.ndim != 2:
            raise ValidationError(f"embeddings must be a 2-d matrix, got ndim {emb.ndim}")
        emb = emb.copy()
        emb.setflags(write=False)
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "gold_findings", frozenset(self.gold_findings))
        self._validate()

    def _validate(self):
        if not self.id:
            raise ValidationError("instance id is empty")
        if not self.words:
            raise ValidationError("words is empty")
        for w in self.words:
            if not w or any(c.isspace() for c in w):
                raise ValidationError(f"word {w!r} is empty or contains whitespace")
            if w != normalize_word(w):
                raise ValidationError(f"word {w!r} is not normalized (lowercase, punctuation-stripped)")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValidationError("image dimensions must be positive")
        n = self.boxes.shape[0]
        if n < 1:
            raise ValidationError("instance needs at least one box")
        if self.embeddings.shape[0] != n:
            raise ValidationError(
                f"dimension mismatch: {n} boxes but {self.embeddings.shape[0]} embedding rows"
            )
        if self.embeddings.shape[1] < 1:
            raise ValidationError("embedding dimension must be >= 1")
        if not np.isfinite(self.embeddings).all():
            raise ValidationError("embeddings contain non-finite values")
        validate_boxes(self.boxes, self.image_width, self.image_height)

    @property
    def n_boxes(self) -> int:
        return self.boxes.shape[0]

    @property
    def embedding_dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def unique_words(self) -> tuple[str, ...]:
        """Distinct words in first-occurrence order; index i is text feature i."""
        return tuple(dict.fromkeys(self.words))

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.id == other.id
            and self.words == other.words
            and self.image_width == other.image_width
            and self.image_height == other.image_height
            and np.array_equal(self.boxes, other.boxes)
            and np.array_equal(self.embeddings, other.embeddings)
            and self.gold_findings == other.gold_findings
        )

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "id": self.id,
            "words": list(self.words),
            "image": {"width": self.image_width, "height": self.image_height},
            "boxes": self.boxes.tolist(),
            "embeddings": self.embeddings.tolist(),
            "gold_findings": sorted(self.gold_findings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        _check_version(d, "instance")
        try:
            image = d["image"]
            return cls(
                id=str(d["id"]),
                words=normalize_words(d["words"]),
                image_width=int(image["width"]),
                image_height=int(image["height"]),
                boxes=d["boxes"],
                embeddings=d["embeddings"],
                gold_findings=frozenset(normalize_word(f) for f in d.get("gold_findings", [])),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"instance object missing/invalid field: {exc}") from exc


# ---------------------------------------------------------------------------
# ExpertAnnotation


@dataclass(frozen=True)
class ExpertAnnotation:
    """One annotator's highlighted words and drawn boxes for an instance."""

    annotator_id: str
    instance_id: str
    finding_context: frozenset
    words: frozenset
    boxes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "finding_context", frozenset(self.finding_context))
        object.__setattr__(self, "words", frozenset(self.words))
        boxes = tuple(tuple(float(v) for v in b) for b in self.boxes)
        object.__setattr__(self, "boxes", boxes)
        if not self.annotator_id:
            raise ValidationError("annotator_id is empty")
        if not self.instance_id:
            raise ValidationError("instance_id is empty")
        for w in self.words:
            if not w or any(c.isspace() for c in w):
                raise ValidationError(f"annotation word {w!r} is empty or contains whitespace")
        # Image dimensions are unknown here; bounds vs. width/height are
        # checked where an Instance is available.
        validate_boxes(as_box_array(boxes), what="annotation box")

    @property
    def word_set(self) -> frozenset:
        return self.words

    @property
    def box_list(self) -> tuple:
        return self.boxes

    @property
    def source_id(self) -> str:
        return self.annotator_id

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "annotator_id": self.annotator_id,
            "instance_id": self.instance_id,
            "finding_context": sorted(self.finding_context),
            "words": sorted(self.words),
            "boxes": [list(b) for b in self.boxes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExpertAnnotation":
        _check_version(d, "annotation")
        try:
            return cls(
                annotator_id=str(d["annotator_id"]),
                instance_id=str(d["instance_id"]),
                finding_context=frozenset(normalize_word(f) for f in d.get("finding_context", [])),
                words=normalize_word_set(d.get("words", [])),
                boxes=tuple(tuple(b) for b in d.get("boxes", [])),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"annotation object missing/invalid field: {exc}") from exc


# ---------------------------------------------------------------------------
# ExplainerConfig


@dataclass(frozen=True)
class ExplainerConfig:
    """Hyperparameters of one explanation run; see :func:`validate_config`."""

    samples: int = 1000
    p_text: float = 0.5
    p_visual: float = 0.5
    kernel_width: float = 0.25
    ridge_lambda: float = 1.0
    k_words: int = 5
    k_boxes: int = 3
    strategy: str = "zero"
    mean_std_k: float = 2.0
    target: str = "probability"
    seed: int = 0

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "ExplainerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"format_version"}
        if unknown:
            raise SchemaError(f"unknown config fields: {sorted(unknown)}")
        return cls(**{k: v for k, v in d.items() if k in known})


def validate_config(config: ExplainerConfig) -> ExplainerConfig:
    """Return the config unchanged if every bound holds, else raise listing each violation."""
    problems = []
    if not isinstance(config.samples, int) or config.samples < 1:
        problems.append("samples must be a positive integer")
    for name in ("p_text", "p_visual"):
        p = getattr(config, name)
        if not (0.0 <= p <= 1.0):
            problems.append(f"{name} must be in [0, 1]")
    if not (config.kernel_width > 0):
        problems.append("kernel_width must be > 0")
    if not (config.ridge_lambda >= 0):
        problems.append("ridge_lambda must be ≥ 0")
    if not isinstance(config.k_words, int) or config.k_words < 1:
        problems.append("k_words must be a positive integer")
    if not isinstance(config.k_boxes, int) or config.k_boxes < 1:
        problems.append("k_boxes must be a positive integer")
    if config.strategy not in STRATEGIES:
        problems.append(f"strategy must be one of {list(STRATEGIES)}")
    if not math.isfinite(config.mean_std_k):
        problems.append("mean_std_k must be finite")
    if config.target not in TARGETS:
        problems.append(f"target must be one of {list(TARGETS)}")
    if not isinstance(config.seed, int):
        problems.append("seed must be an integer")
    if problems:
        raise ValidationError("; ".join(problems))
    return config


# ---------------------------------------------------------------------------
# Explanation


@dataclass(frozen=True)
class Provenance:
    """Everything needed to reproduce an explanation run with this build."""

    seed: int
    samples: int
    p_text: float
    p_visual: float
    kernel_width: float
    ridge_lambda: float
    strategy: str
    predictor: str
    target: str = "probability"
    sub_seeds: tuple = ()
    base_probabilities: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sub_seeds", tuple(sorted(tuple(self.sub_seeds))))
        object.__setattr__(
            self, "base_probabilities", tuple(sorted(tuple(self.base_probabilities)))
        )

    def to_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "samples": self.samples,
            "p_text": self.p_text,
            "p_visual": self.p_visual,
            "kernel_width": self.kernel_width,
            "ridge_lambda": self.ridge_lambda,
            "strategy": self.strategy,
            "predictor": self.predictor,
            "target": self.target,
            "sub_seeds": {k: v for k, v in self.sub_seeds},
            "base_probabilities": {k: v for k, v in self.base_probabilities},
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        try:
            return cls(
                seed=int(d["seed"]),
                samples=int(d["samples"]),
                p_text=float(d["p_text"]),
                p_visual=float(d["p_visual"]),
                kernel_width=float(d["kernel_width"]),
                ridge_lambda=float(d["ridge_lambda"]),
                strategy=str(d["strategy"]),
                predictor=str(d["predictor"]),
                target=str(d.get("target", "probability")),
                sub_seeds=tuple(d.get("sub_seeds", {}).items()),
                base_probabilities=tuple(d.get("base_probabilities", {}).items()),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"provenance missing/invalid field: {exc}") from exc


@dataclass(frozen=True)
class Explanation:
    """Ranked word and box attributions for one (instance, finding) pair."""

    instance_id: str
    finding: str
    mode: str
    word_items: tuple  # of (word, score)
    box_items: tuple  # of (box_index, (x1, y1, x2, y2), score)
    provenance: Provenance

    def __post_init__(self):
        word_items = tuple((str(w), float(s)) for w, s in self.word_items)
        box_items = tuple(
            (int(i), tuple(float(v) for v in box), float(s)) for i, box, s in self.box_items
        )
        object.__setattr__(self, "word_items", word_items)
        object.__setattr__(self, "box_items", box_items)
        if self.mode not in EXPLANATION_MODES:
            raise ValidationError(f"mode must be one of {list(EXPLANATION_MODES)}")
        words = [w for w, _ in word_items]
        if len(set(words)) != len(words):
            raise ValidationError("word_items contains duplicate words")
        indices = [i for i, _, _ in box_items]
        if len(set(indices)) != len(indices):
            raise ValidationError("box_items contains duplicate box indices")
        if any(i < 0 for i in indices):
            raise ValidationError("box_items contains a negative box index")
        for items in (word_items, box_items):
            scores = [abs(it[-1]) for it in items]
            if any(not math.isfinite(s) for s in scores):
                raise ValidationError("scores must be finite")
            if any(a < b for a, b in zip(scores, scores[1:])):
                raise ValidationError("items are not sorted by descending |score|")

    @property
    def word_set(self) -> frozenset:
        return frozenset(w for w, _ in self.word_items)

    @property
    def box_list(self) -> tuple:
        return tuple(box for _, box, _ in self.box_items)

    @property
    def box_indices(self) -> tuple:
        return tuple(i for i, _, _ in self.box_items)

    @property
    def source_id(self) -> str:
        return self.mode

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "instance_id": self.instance_id,
            "finding": self.finding,
            "mode": self.mode,
            "word_items": [[w, s] for w, s in self.word_items],
            "box_items": [[i, list(box), s] for i, box, s in self.box_items],
            "provenance": self.provenance.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Explanation":
        _check_version(d, "explanation")
        try:
            return cls(
                instance_id=str(d["instance_id"]),
                finding=str(d["finding"]),
                mode=str(d["mode"]),
                word_items=tuple((w, s) for w, s in d["word_items"]),
                box_items=tuple((i, tuple(box), s) for i, box, s in d["box_items"]),
                provenance=Provenance.from_dict(d["provenance"]),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"explanation object missing/invalid field: {exc}") from exc


# ---------------------------------------------------------------------------
# file I/O


def _check_version(d, what: str) -> None:
    if not isinstance(d, dict):
        raise SchemaError(f"{what} file must hold a JSON object, got {type(d).__name__}")
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(f"{what} file has format_version {version!r}, expected {FORMAT_VERSION}")


def read_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read file: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_instance(path) -> Instance:
    """Load and validate one instance file."""
    return Instance.from_dict(read_json(path))


def save_instance(instance: Instance, path) -> None:
    write_json(instance.to_dict(), path)


def load_annotations(path) -> list:
    """Load one annotation file holding a single object or an array of them."""
    data = read_json(path)
    if isinstance(data, list):
        return [ExpertAnnotation.from_dict(d) for d in data]
    return [ExpertAnnotation.from_dict(data)]


def save_annotations(annotations, path) -> None:
    annotations = list(annotations)
    if len(annotations) == 1:
        write_json(annotations[0].to_dict(), path)
    else:
        write_json([a.to_dict() for a in annotations], path)


def load_explanation(path) -> Explanation:
    return Explanation.from_dict(read_json(path))


def save_explanation(explanation: Explanation, path) -> None:
    write_json(explanation.to_dict(), path)
