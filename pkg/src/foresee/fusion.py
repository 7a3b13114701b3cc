"""Merging the two decoder branches into one logit volume.

Both strategies operate on raw pre-softmax scores and return a full
LogitVolume so the same decoding path serves every variant. max_merge keeps
the higher of the two branch confidences per pixel and bin and needs no
mask at inference; mask_merge crops foreground rows from the foreground
branch and pastes them over the background branch's output.
"""

from __future__ import annotations

import numpy as np

from .core import ForegroundMask, LogitVolume
from .errors import ShapeMismatchError


def max_merge(p_f: LogitVolume, p_b: LogitVolume) -> LogitVolume:
    """Element-wise maximum of the two branches' scores."""
    if p_f.scores.shape != p_b.scores.shape:
        raise ShapeMismatchError(
            f"branch shapes differ: {p_f.scores.shape} vs {p_b.scores.shape}"
        )
    return LogitVolume(scores=np.maximum(p_f.scores, p_b.scores))


def mask_merge(p_f: LogitVolume, p_b: LogitVolume, fg: ForegroundMask) -> LogitVolume:
    """Foreground branch where the mask is set, background branch elsewhere."""
    if p_f.scores.shape != p_b.scores.shape:
        raise ShapeMismatchError(
            f"branch shapes differ: {p_f.scores.shape} vs {p_b.scores.shape}"
        )
    if fg.flags.shape != p_f.scores.shape[:2]:
        raise ShapeMismatchError(
            f"mask {fg.flags.shape} does not match volume {p_f.scores.shape[:2]}"
        )
    return LogitVolume(scores=np.where(fg.flags[..., None], p_f.scores, p_b.scores))
