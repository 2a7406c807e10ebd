"""Corpus-level evaluation: agreement metrics, baseline, and roll-ups.

Shows the two IoU metrics on hand-sized inputs, then the corpus helpers:
inter-annotator agreement (upper bound), the random baseline (lower bound),
and grouped aggregation.  Run:  python3 demos/evaluate_against_experts.py
"""

import mmsurrogate as mm
from mmsurrogate.cli import build_fixture
from mmsurrogate.evaluate import format_reports

# --- the two metrics ------------------------------------------------------

model_words = {"innumerable", "nodules", "atelectasis", "or", "infiltrate"}
expert_words = {"innumerable", "nodules", "atelectasis", "bilateral", "calcified"}
print(f"text IoU (3 shared of 7 total): "
      f"{mm.text_similarity(model_words, expert_words):.3f}")

# Region IoU merges each side's boxes into one region first, so overlapping
# boxes on one side never double-count.
a = [(0, 0, 2, 1)]
b = [(1, 0, 3, 1)]
print(f"image IoU of two offset boxes: {mm.image_similarity(a, b):.3f}")
split = [(0, 0, 1, 1), (1, 0, 2, 1)]  # same region as `a`, split in two
print(f"same region split into two boxes: {mm.image_similarity(split, b):.3f}")

# --- inter-annotator agreement (the de facto upper bound) -----------------

def expert(annotator, words):
    return mm.ExpertAnnotation(
        annotator_id=annotator, instance_id="case-1",
        finding_context=frozenset({"nodule"}),
        words=frozenset(words), boxes=((10, 10, 40, 40),),
    )

annotations = [
    expert("alice", {"nodule", "calcified", "opacity"}),
    expert("bob", {"nodule", "calcified", "effusion"}),
    expert("carol", {"nodule", "blunting"}),
]
print("\ninter-annotator agreement:")
print(format_reports(mm.inter_annotator_agreement(annotations), "table"))

# --- random baseline (the lower bound) -------------------------------------

instance, _, oracle_annotation = build_fixture(words=20, boxes=36, dim=4, seed=3)
reports = mm.baseline_run(
    [instance], [oracle_annotation], k_words=3, k_boxes=3, trials=2000, seed=0
)
print("random baseline vs the ideal annotator:")
print(format_reports(reports, "table"))

# --- grouped aggregation ---------------------------------------------------

pairs = [
    mm.SimilarityReport(
        instance_id="case-1", finding="nodule", text_iou=t, image_iou=i,
        left_source=f"model/{mode}", right_source=annotator,
        mode=mode, annotator=annotator,
    )
    for mode, annotator, t, i in [
        ("separate", "alice", 0.50, 0.40),
        ("separate", "bob", 0.33, 0.25),
        ("simultaneous", "alice", 0.25, 0.40),
        ("simultaneous", "bob", 0.20, 0.10),
    ]
]
print("aggregated by mode:")
print(format_reports(mm.aggregate(pairs, ("mode",)), "table"))
