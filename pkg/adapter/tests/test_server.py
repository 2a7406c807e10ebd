import io
import json
import math
import threading
import urllib.request
from pathlib import Path

import numpy as np
import pytest

from conftest import register, request
from mmsurrogate_adapter import AdapterConfig, HeldInstance
from mmsurrogate_adapter.features import MASK_WORD, apply_token_mask, apply_visual_mask
from mmsurrogate_adapter.models import HookModel, load_model
from mmsurrogate_adapter.server import ProtocolSession, handle_line, serve_stdio

HOOK_FILE = str(Path(__file__).parent / "sample_hook.py")


class TestRegistration:
    def test_register_echoes_instance_id(self, session, instance_payload):
        register(session, instance_payload)

    def test_bad_payload_is_error(self, session):
        (reply,) = session.handle({"type": "register", "instance": {"id": "x"}})
        assert reply["type"] == "error"

    def test_dimension_mismatch_rejected(self, session, instance_payload):
        instance_payload["embeddings"] = instance_payload["embeddings"][:2]
        (reply,) = session.handle({"type": "register", "instance": instance_payload})
        assert reply["type"] == "error"
        assert "embedding rows" in reply["message"]


class TestSyntheticPredict:
    def test_hand_values(self, session, instance_payload):
        register(session, instance_payload)
        # all features active: logit = ln 3 + 0.5
        replies = session.handle({"type": "predict", "requests": [request()]})
        assert replies[-1]["type"] == "predictions"
        (result,) = replies[-1]["results"]
        assert result["probabilities"]["nodule"] == pytest.approx(
            1 / (1 + math.exp(-(math.log(3) + 0.5)))
        )
        # masking 'acute' (distinct word 1) and box 1 leaves logit 0
        replies = session.handle({
            "type": "predict",
            "requests": [request(token_mask=(1, 0, 1, 1), visual_mask=(1, 0, 1))],
        })
        (result,) = replies[-1]["results"]
        assert result["probabilities"]["nodule"] == pytest.approx(0.5)

    def test_unregistered_instance_is_per_request_error(self, session):
        replies = session.handle({"type": "predict", "requests": [request(instance_id="ghost")]})
        assert replies[0]["type"] == "error"
        assert replies[0]["request_id"] == "r1"
        assert replies[-1] == {"type": "predictions", "results": []}

    def test_mixed_batch_answers_good_requests(self, session, instance_payload):
        register(session, instance_payload)
        batch = [
            request("ok-1"),
            request("bad", token_mask=(1, 1)),  # wrong length
            request("ok-2", token_mask=(0, 1, 1, 1)),
        ]
        replies = session.handle({"type": "predict", "requests": batch})
        errors = [r for r in replies if r["type"] == "error"]
        assert len(errors) == 1 and errors[0]["request_id"] == "bad"
        results = replies[-1]["results"]
        assert [r["request_id"] for r in results] == ["ok-1", "ok-2"]  # order kept

    def test_batch_order_preserved(self, session, instance_payload):
        register(session, instance_payload)
        ids = [f"r{i}" for i in range(20)]
        replies = session.handle({
            "type": "predict", "requests": [request(i) for i in ids]
        })
        assert [r["request_id"] for r in replies[-1]["results"]] == ids


class TestLineHandling:
    def test_malformed_line_reports_line_number_and_continues(self, session, instance_payload):
        stdin = io.StringIO(
            "{this is not json\n"
            + json.dumps({"type": "register", "instance": instance_payload}) + "\n"
        )
        stdout = io.StringIO()
        serve_stdio(session.model, session.config, stdin, stdout)
        lines = [json.loads(l) for l in stdout.getvalue().splitlines()]
        assert lines[0]["type"] == "error"
        assert "line 1" in lines[0]["message"]
        assert lines[1] == {"type": "registered", "instance_id": "case-1"}

    def test_unknown_type_is_error(self, session):
        (reply,) = handle_line(session, '{"type": "train"}', 1)
        assert reply["type"] == "error"

    def test_blank_lines_ignored(self, session):
        assert handle_line(session, "   \n", 1) == []


class TestMaskApplication:
    def test_token_mask_replaces_all_occurrences(self, instance_payload):
        instance = HeldInstance.from_payload(instance_payload)
        words = apply_token_mask(instance, [0, 1, 1, 1])
        assert words == [MASK_WORD, "acute", MASK_WORD, "cardiopulmonary", "findings"]

    def test_all_ones_identity(self, instance_payload):
        instance = HeldInstance.from_payload(instance_payload)
        assert apply_token_mask(instance, [1, 1, 1, 1]) == list(instance.words)
        boxes, embeddings = apply_visual_mask(instance, [1, 1, 1], "zero", 0)
        assert np.array_equal(boxes, instance.boxes)
        assert np.array_equal(embeddings, instance.embeddings)

    def test_zero_strategy(self, instance_payload):
        instance = HeldInstance.from_payload(instance_payload)
        boxes, embeddings = apply_visual_mask(instance, [1, 0, 1], "zero", 0)
        assert (embeddings[1] == 0).all()
        assert (boxes[1] == 0).all()
        assert np.array_equal(embeddings[0], instance.embeddings[0])

    def test_mean_std_degenerate_row(self, instance_payload):
        instance_payload["embeddings"] = [[2.0, 2.0], [5.0, 5.0], [7.0, 7.0]]
        instance = HeldInstance.from_payload(instance_payload)
        _, embeddings = apply_visual_mask(instance, [1, 0, 1], "mean-std", 9)
        np.testing.assert_allclose(embeddings[1], 5.0)

    def test_randomize_stays_in_row_range(self, instance_payload):
        instance = HeldInstance.from_payload(instance_payload)
        row = instance.embeddings[2]
        _, embeddings = apply_visual_mask(instance, [1, 1, 0], "randomize", 4)
        assert (embeddings[2] >= row.min()).all()
        assert (embeddings[2] <= row.max()).all()

    def test_deterministic_per_strategy_seed(self, instance_payload):
        instance = HeldInstance.from_payload(instance_payload)
        a = apply_visual_mask(instance, [0, 0, 0], "randomize", 5)
        b = apply_visual_mask(instance, [0, 0, 0], "randomize", 5)
        assert np.array_equal(a[1], b[1])

    def test_unknown_strategy_rejected(self, instance_payload):
        instance = HeldInstance.from_payload(instance_payload)
        with pytest.raises(ValueError, match="strategy"):
            apply_visual_mask(instance, [1, 1, 0], "blur", 0)


class TestHookModel:
    def test_hook_sees_perturbed_inputs(self, instance_payload):
        config = AdapterConfig(model=f"hook:{HOOK_FILE}")
        session = ProtocolSession(load_model(config.model), config)
        register(session, instance_payload)
        # all active: 5 words, 0 zeroed boxes -> logit 0.4*5 - 1 = 1.0
        replies = session.handle({"type": "predict", "requests": [request()]})
        p_full = replies[-1]["results"][0]["probabilities"]["nodule"]
        assert p_full == pytest.approx(1 / (1 + math.exp(-1.0)))
        # mask word 'no' (2 occurrences) and one box:
        # logit 0.4*3 - 0.9*1 - 1 = -0.7
        replies = session.handle({
            "type": "predict",
            "requests": [request(token_mask=(0, 1, 1, 1), visual_mask=(1, 0, 1))],
        })
        p_masked = replies[-1]["results"][0]["probabilities"]["nodule"]
        assert p_masked == pytest.approx(1 / (1 + math.exp(0.7)))

    def test_missing_predict_rejected(self, tmp_path):
        bad = tmp_path / "bad_hook.py"
        bad.write_text("x = 1\n")
        with pytest.raises(ValueError, match="predict"):
            HookModel.from_target(str(bad))


class TestConfig:
    def test_bad_transport(self):
        with pytest.raises(ValueError, match="transport"):
            AdapterConfig(transport="grpc", model="synthetic:x")

    def test_bad_model_spec(self):
        with pytest.raises(ValueError, match="model"):
            AdapterConfig(model="nonsense")


class TestHttpTransport:
    def test_round_trip_over_http(self, model_file, instance_payload):
        from http.server import ThreadingHTTPServer

        import mmsurrogate_adapter.server as server_mod
        from mmsurrogate_adapter.models import SyntheticModel

        # same handler logic as serve_http, bound to an ephemeral port
        config = AdapterConfig(transport="http", model=f"synthetic:{model_file}", port=0)
        session = ProtocolSession(SyntheticModel.from_file(model_file), config)

        class Handler(server_mod.BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0"))
                replies = server_mod.handle_line(session, self.rfile.read(length).decode(), 1)
                errors = [r for r in replies if r.get("type") == "error"]
                reply = errors[0] if errors else replies[-1]
                body = json.dumps(reply).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=httpd.serve_forever, daemon=True).start()
        try:
            url = f"http://127.0.0.1:{httpd.server_address[1]}/"

            def post(message):
                req = urllib.request.Request(url, data=json.dumps(message).encode())
                with urllib.request.urlopen(req, timeout=10) as response:
                    return json.loads(response.read())

            reply = post({"type": "register", "instance": instance_payload})
            assert reply == {"type": "registered", "instance_id": "case-1"}
            reply = post({"type": "predict", "requests": [request()]})
            assert reply["type"] == "predictions"
            assert reply["results"][0]["request_id"] == "r1"
        finally:
            httpd.shutdown()
