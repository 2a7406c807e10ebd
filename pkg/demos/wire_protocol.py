"""The black-box predictor wire protocol, message by message.

The engine registers the full instance once, then sends mask-only requests:
one JSON object per line over a subprocess's stdin/stdout (or POSTed to an
HTTP endpoint).  This keeps per-perturbation payloads tiny even when the
embeddings are 36 x 2048.  Run:  python3 demos/wire_protocol.py
"""

import json

import numpy as np

import mmsurrogate as mm
from mmsurrogate.cli import build_fixture
from mmsurrogate.predictor import next_request_id

instance, model, _ = build_fixture(words=8, boxes=4, dim=3, hot_words=2, hot_boxes=1, seed=2)

# 1. registration: the only time the full feature tensors cross the wire
register = {"type": "register", "instance": instance.to_dict()}
print("-> register (truncated):")
print(json.dumps(register)[:120], "...")
print('<- {"type": "registered", "instance_id": "%s"}' % instance.id)

# 2. prediction requests carry masks only.  token_mask indexes the distinct
#    report words in first-occurrence order; visual_mask indexes boxes.
request = mm.PredictionRequest(
    request_id=next_request_id(),
    instance_id=instance.id,
    token_mask=np.array([1, 0, 1, 1, 1, 0, 1, 1]),
    visual_mask=np.array([1, 1, 0, 1]),
    strategy="zero",
    strategy_seed=123,
)
predict = {"type": "predict", "requests": [request.to_dict()]}
print("\n-> predict:")
print(json.dumps(predict, indent=2))

# 3. in-process, the same request answered by the synthetic model
predictor = mm.SyntheticPredictor(model)
(prediction,) = predictor.predict(instance, [request])
print("<- predictions:")
print(json.dumps({
    "type": "predictions",
    "results": [{"request_id": request.request_id,
                 "probabilities": prediction.as_dict()}],
}, indent=2))

# A real counterparty: any process speaking this protocol plugs in via
#   mm.SubprocessPredictor(["my-model-server", ...])   or
#   mm.HttpPredictor("http://localhost:8000/")
# The companion package in adapter/ ships `mmsurrogate-adapter`, a reference
# server that wraps either a synthetic model file or any Python callable
# predict(words, boxes, embeddings) -> {finding: probability}.
print("\nCLI equivalent: --predictor cmd:'mmsurrogate-adapter --transport stdio "
      "--model synthetic:model.json'")
