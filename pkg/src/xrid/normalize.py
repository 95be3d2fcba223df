"""Min-max score normalization along a configurable axis.

``per_probe_row`` rescales each probe row by its own extremes: it is a
strictly increasing affine map on every non-constant row, so per-row
rankings (hence CMC) cannot change. ``per_gallery_column`` rescales each
gallery column across probes, which CAN reorder rows; it exactly removes
any additive per-gallery offset, which is where normalization earns its
keep. ``two_sided`` applies the column pass first, then the row pass.

The axis the original experiments used is not documented anywhere
authoritative; ``per_gallery_column`` is the default because it is the
only axis that can move rank rates at all.

Constant slices (max == min) map to all 0.5 so values stay in range
without NaN.
"""

from __future__ import annotations

import numpy as np

from .datamodel import ScoreMatrix
from .errors import AlreadyNormalized, ValidationError


def _minmax(values: np.ndarray, axis: int) -> np.ndarray:
    lo = values.min(axis=axis, keepdims=True)
    hi = values.max(axis=axis, keepdims=True)
    span = hi - lo
    flat = span == 0.0
    safe = np.where(flat, 1.0, span)
    out = (values - lo) / safe
    return np.where(np.broadcast_to(flat, out.shape), 0.5, out)


def minmax_normalize(scores: ScoreMatrix, axis: str = "per_gallery_column") -> ScoreMatrix:
    """Return a normalized copy of ``scores``; polarity is preserved and
    the normalization field records the axis."""
    if scores.normalization != "none":
        raise AlreadyNormalized(f"scores already normalized ({scores.normalization})")
    if axis == "per_probe_row":
        values = _minmax(scores.values, axis=1)
    elif axis == "per_gallery_column":
        values = _minmax(scores.values, axis=0)
    elif axis == "two_sided":
        values = _minmax(_minmax(scores.values, axis=0), axis=1)
    else:
        raise ValidationError("normalization_axis", f"unknown axis {axis!r}")
    return ScoreMatrix(
        values=values,
        probe_labels=scores.probe_labels,
        gallery_labels=scores.gallery_labels,
        polarity=scores.polarity,
        normalization=axis,
    )
