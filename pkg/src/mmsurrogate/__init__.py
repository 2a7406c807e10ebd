"""Model-agnostic multi-modal local-surrogate explainer and evaluation harness.

Perturbs the word and visual-box features of a vision+language instance,
queries any black-box predictor through a mask-only wire protocol, fits a
weighted ridge surrogate, and emits ranked word/box explanations.  The
evaluation half scores explanations against expert annotations with text and
region IoU, a random baseline, and inter-annotator agreement.
"""

from .explain import (
    explain_separate,
    explain_simultaneous,
    explain_text_only,
    explain_visual_only,
    random_explanation,
)
from .evaluate import (
    AggregateReport,
    SimilarityReport,
    aggregate,
    baseline_run,
    evaluate_pair,
    image_similarity,
    inter_annotator_agreement,
    region_union_area,
    text_similarity,
)
from .kernel import batch_weights, combine_modal_weights, cosine_distance, kernel_weight
from .model import (
    DEFAULT_FINDINGS,
    Explanation,
    ExplainerConfig,
    ExpertAnnotation,
    Instance,
    Provenance,
    SchemaError,
    ValidationError,
    load_annotations,
    load_explanation,
    load_instance,
    save_annotations,
    save_explanation,
    save_instance,
    validate_config,
)
from .perturb import (
    MASK_WORD,
    InactivationStrategy,
    PerturbationBatch,
    apply_text_mask,
    apply_visual_mask,
    sample_masks,
)
from .predictor import (
    CountingPredictor,
    HttpPredictor,
    Prediction,
    PredictionRequest,
    Predictor,
    PredictorError,
    ProtocolError,
    SubprocessPredictor,
    SyntheticLogisticModel,
    SyntheticPredictor,
    FindingWeights,
    build_predictor,
    load_model,
    remote_predict,
    save_model,
    synthetic_predict,
)
from .render import OverlayDocument, render_image_overlay, render_text_listing
from .seeding import derive_seed
from .surrogate import (
    SingularSystemError,
    SurrogateFit,
    fit_weighted_ridge,
    rank_coefficients,
    rank_features,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
