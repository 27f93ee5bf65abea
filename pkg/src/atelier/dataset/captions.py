"""Caption transforms: whole-caption dropout and token shuffling.

Dropout empties the entire caption (the convention of the trainers this
tooling feeds), never individual tokens. Shuffling permutes comma-separated
phrases when the caption is tag-styled, else whitespace tokens; the token
multiset is preserved exactly whenever dropout does not fire.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CaptionTransformConfig:
    dropout_p: float = 0.05
    token_shuffle: bool = True
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.dropout_p <= 1.0:
            raise ValueError(f"dropout_p must be in [0, 1], got {self.dropout_p}")


def split_tokens(caption: str) -> tuple[list[str], str]:
    """Tokens plus the separator to rejoin them with."""
    if "," in caption:
        return [t.strip() for t in caption.split(",") if t.strip()], ", "
    return caption.split(), " "


def caption_transform(caption: str, cfg: CaptionTransformConfig) -> str:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    if rng.random() < cfg.dropout_p:
        return ""
    if not cfg.token_shuffle:
        return caption
    tokens, sep = split_tokens(caption)
    if len(tokens) < 2:
        return caption
    order = rng.permutation(len(tokens))
    return sep.join(tokens[i] for i in order)
