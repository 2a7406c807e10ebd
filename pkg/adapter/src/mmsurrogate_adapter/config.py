"""Adapter configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class AdapterConfig:
    """One active model behind one transport.

    ``model`` is ``synthetic:<model.json>`` or ``hook:<module-or-file>``
    where the hook target exposes ``predict(words, boxes, embeddings) ->
    {finding: probability}``.

    Placeholder rule: an inactivated word is replaced (every occurrence)
    by ``placeholder`` before the wrapped model sees the word list.  The
    default is the reserved word the engine documents; hooks that wrap
    tokenizing models decide how to encode it (mask token, unknown token,
    or dropping it), and receive it verbatim here.
    """

    transport: str = "stdio"  # stdio | http
    model: str = ""
    placeholder: str = "¤masked¤"
    mean_std_k: float = 2.0  # multiplier for the mean-std inactivation kind
    host: str = "127.0.0.1"
    port: int = 8972

    def __post_init__(self):
        if self.transport not in ("stdio", "http"):
            raise ValueError(f"transport must be stdio or http, got {self.transport!r}")
        kind = self.model.partition(":")[0]
        if kind not in ("synthetic", "hook") or ":" not in self.model:
            raise ValueError(
                f"model must be synthetic:<path> or hook:<module-or-file>, got {self.model!r}"
            )
