import pytest

import mmsurrogate as mm


@pytest.fixture
def explanation(tiny_instance):
    prov = mm.Provenance(
        seed=1, samples=10, p_text=0.5, p_visual=0.5, kernel_width=0.25,
        ridge_lambda=1.0, strategy="zero", predictor="synthetic",
        base_probabilities=(("nodule", 0.87),),
    )
    return mm.Explanation(
        instance_id="tiny",
        finding="nodule",
        mode="separate",
        word_items=(("acute", 0.9), ("findings", -0.2)),
        box_items=((0, (0, 0, 50, 40), 0.7),),
        provenance=prov,
    )


def annotation(boxes=((10, 10, 40, 30), (60, 50, 90, 70)), words=("acute", "nodules")):
    return mm.ExpertAnnotation(
        annotator_id="expert1",
        instance_id="tiny",
        finding_context=frozenset({"nodule"}),
        words=frozenset(words),
        boxes=tuple(boxes),
    )


class TestOverlay:
    def test_model_boxes_only(self, tiny_instance, explanation):
        doc = mm.render_image_overlay(tiny_instance, explanation)
        svg = doc.to_svg()
        assert svg.count('stroke="blue"') == 1
        assert svg.count('stroke="green"') == 0
        assert "Target: nodule" in svg
        assert "Prediction: nodule" in svg

    def test_model_plus_expert_boxes(self, tiny_instance, explanation):
        doc = mm.render_image_overlay(tiny_instance, explanation, annotation())
        svg = doc.to_svg()
        assert svg.count('stroke="blue"') == 1
        assert svg.count('stroke="green"') == 2
        assert "Image similarity:" in svg

    def test_deterministic_bytes(self, tiny_instance, explanation):
        a = mm.render_image_overlay(tiny_instance, explanation, annotation()).to_svg()
        b = mm.render_image_overlay(tiny_instance, explanation, annotation()).to_svg()
        assert a.encode() == b.encode()

    def test_background_referenced_not_embedded(self, tiny_instance, explanation):
        svg = mm.render_image_overlay(
            tiny_instance, explanation, background="xray.png"
        ).to_svg()
        assert '<image href="xray.png"' in svg

    def test_boxes_validated_against_viewport(self):
        with pytest.raises(mm.ValidationError):
            mm.OverlayDocument(
                width=10, height=10, model_boxes=((0, 0, 20, 5),),
                expert_boxes=(), caption_lines=(),
            )

    def test_renderer_invents_no_geometry(self, tiny_instance, explanation):
        doc = mm.render_image_overlay(tiny_instance, explanation, annotation())
        assert set(doc.model_boxes) <= set(explanation.box_list)
        assert set(doc.expert_boxes) <= set(annotation().box_list)

    def test_wrong_instance_rejected(self, explanation):
        other = mm.Instance(
            id="other", words=("a",), image_width=100, image_height=80,
            boxes=[[0, 0, 50, 40]], embeddings=[[1.0]],
        )
        with pytest.raises(mm.ValidationError):
            mm.render_image_overlay(other, explanation)


class TestListing:
    def test_shared_words_marked_and_similarity_printed(self, tiny_instance):
        # expert [calcifications, nodule, process, dense, granulomatous] vs
        # model [calcifications, nodule, process, effusion, normal]: 3 shared,
        # similarity 3/7 = 0.429
        prov = mm.Provenance(
            seed=1, samples=10, p_text=0.5, p_visual=0.5, kernel_width=0.25,
            ridge_lambda=1.0, strategy="zero", predictor="synthetic",
        )
        explanation = mm.Explanation(
            instance_id="tiny", finding="nodule", mode="separate",
            word_items=(
                ("calcifications", 0.9), ("nodule", 0.8), ("process", 0.7),
                ("effusion", 0.2), ("normal", 0.1),
            ),
            box_items=(), provenance=prov,
        )
        expert = annotation(words=("calcifications", "nodule", "process", "dense", "granulomatous"))
        html = mm.render_text_listing(tiny_instance, explanation, expert)
        assert "Domain Expert:" in html
        assert "Explainable Model:" in html
        assert html.count('<mark class="shared">') == 6  # 3 shared words on both lists
        assert "Similarity: 0.429" in html

    def test_model_only_listing(self, tiny_instance):
        explanation = mm.random_explanation(tiny_instance, "nodule", 2, 1, seed=4)
        html = mm.render_text_listing(tiny_instance, explanation)
        assert "Explainable Model:" in html
        assert "Domain Expert:" not in html
        assert "Similarity" not in html

    def test_empty_word_list_marker(self, tiny_instance):
        prov = mm.Provenance(
            seed=1, samples=10, p_text=0.5, p_visual=0.5, kernel_width=0.25,
            ridge_lambda=1.0, strategy="zero", predictor="synthetic",
        )
        explanation = mm.Explanation(
            instance_id="tiny", finding="nodule", mode="separate",
            word_items=(), box_items=(), provenance=prov,
        )
        html = mm.render_text_listing(tiny_instance, explanation)
        assert "(none)" in html

    def test_deterministic_bytes(self, tiny_instance):
        explanation = mm.random_explanation(tiny_instance, "nodule", 2, 1, seed=4)
        a = mm.render_text_listing(tiny_instance, explanation, annotation())
        b = mm.render_text_listing(tiny_instance, explanation, annotation())
        assert a == b
