import json

import numpy as np
import pytest

from mmsurrogate_adapter import AdapterConfig
from mmsurrogate_adapter.models import SyntheticModel
from mmsurrogate_adapter.server import ProtocolSession


@pytest.fixture
def instance_payload():
    rng = np.random.default_rng(3)
    return {
        "format_version": 1,
        "id": "case-1",
        "words": ["no", "acute", "no", "cardiopulmonary", "findings"],
        "image": {"width": 100, "height": 100},
        "boxes": [[0, 0, 40, 40], [40, 0, 80, 40], [0, 40, 40, 80]],
        "embeddings": rng.standard_normal((3, 5)).tolist(),
        "gold_findings": ["nodule"],
    }


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps({
        "format_version": 1,
        "kind": "synthetic-logistic",
        "findings": {
            "nodule": {
                "bias": 0.0,
                "word_weights": {"acute": 1.0986122886681098},  # ln 3
                "box_weights": {"1": 0.5},
            }
        },
    }))
    return path


@pytest.fixture
def session(model_file):
    config = AdapterConfig(model=f"synthetic:{model_file}")
    return ProtocolSession(SyntheticModel.from_file(model_file), config)


def register(session, payload):
    (reply,) = session.handle({"type": "register", "instance": payload})
    assert reply == {"type": "registered", "instance_id": payload["id"]}
    return reply


def request(request_id="r1", instance_id="case-1", token_mask=(1, 1, 1, 1),
            visual_mask=(1, 1, 1), strategy="zero", strategy_seed=0):
    return {
        "request_id": request_id,
        "instance_id": instance_id,
        "token_mask": list(token_mask),
        "visual_mask": list(visual_mask),
        "strategy": strategy,
        "strategy_seed": strategy_seed,
    }
