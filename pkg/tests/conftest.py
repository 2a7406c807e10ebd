import numpy as np
import pytest

import mmsurrogate as mm
from mmsurrogate.cli import build_fixture


@pytest.fixture
def tiny_instance():
    return mm.Instance(
        id="tiny",
        words=("no", "acute", "cardiopulmonary", "findings"),
        image_width=100,
        image_height=80,
        boxes=[[0, 0, 50, 40], [50, 40, 100, 80]],
        embeddings=np.arange(6, dtype=float).reshape(2, 3),
        gold_findings=frozenset({"nodule"}),
    )


@pytest.fixture
def repeat_instance():
    return mm.Instance(
        id="repeat",
        words=("the", "heart", "the", "lungs"),
        image_width=10,
        image_height=10,
        boxes=[[1, 1, 9, 9]],
        embeddings=[[1.0, 2.0]],
    )


@pytest.fixture
def oracle_fixture():
    """Instance + planted-signal logistic model + the ideal annotation."""
    instance, model, annotation = build_fixture(
        words=20, boxes=36, dim=8, hot_words=3, hot_boxes=3, seed=7
    )
    return instance, model, annotation


def hot_features(instance, annotation):
    """(hot word set, hot box index set) recovered from the ideal annotation."""
    hot_words = set(annotation.word_set)
    expert_boxes = set(annotation.box_list)
    hot_boxes = {i for i, b in enumerate(instance.boxes) if tuple(b) in expert_boxes}
    return hot_words, hot_boxes
