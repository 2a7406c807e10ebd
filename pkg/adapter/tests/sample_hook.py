"""Example external hook: any callable with this signature plugs in.

Scores one finding from how much of the input survived perturbation, so
tests can verify that masks were applied before the hook ran.
"""

import math

MASK_WORD = "¤masked¤"


def predict(words, boxes, embeddings):
    active_words = sum(1 for w in words if w != MASK_WORD)
    zeroed_boxes = sum(1 for b in boxes if not any(b))
    logit = 0.4 * active_words - 0.9 * zeroed_boxes - 1.0
    return {"nodule": 1.0 / (1.0 + math.exp(-logit))}
