"""Reference predictor server for the mask-only explanation wire protocol.

Wraps either a synthetic logistic model file or a user-supplied Python hook
behind the register/predict line protocol, applying token and visual masks
adapter-side so any wrapped model gets identical perturbation semantics.
"""

from .config import AdapterConfig
from .features import HeldInstance, MASK_WORD, apply_token_mask, apply_visual_mask
from .models import HookModel, SyntheticModel, load_model
from .server import handle_line, serve_http, serve_stdio

__version__ = "0.1.0"
