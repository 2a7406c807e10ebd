"""Deterministic seed derivation.

All randomness in a run flows from one root seed; independent consumers
(text masks, visual masks, per-sample inactivation noise, baseline trials)
get decorrelated child seeds derived from the root seed plus a tag, so the
same root seed reproduces the same run regardless of evaluation order.
"""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, tag: str) -> int:
    """Derive a stable 63-bit child seed from a root seed and a label."""
    digest = hashlib.sha256(f"{seed}:{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFF_FFFF_FFFF_FFFF
