"""Synthetic cross-view data with known ground truth, plus brute-force
oracles used to verify the production paths.

The generator draws one latent center per identity and renders view A as
``center + noise`` and view B as ``R(center) + noise``, where R is a
seeded random orthogonal transform that rotates a random half of feature
space and leaves the orthogonal complement fixed. The fixed subspace
carries identity through both cameras unchanged, so the cross-view shift
is exactly the kind a learned linear projection can undo: at zero noise
a correctly trained matcher separates every probe (a full random
rotation, by contrast, empirically caps well below that and would hide
regressions behind statistical noise).

``column_bias`` does not touch the generated features; it is the
magnitude of a per-gallery-sample additive score distortion that the
experiment harness injects downstream (see :func:`gallery_score_bias`),
constructed so that per-gallery-column min-max normalization provably
removes it.

The oracles here share no code with the production implementations they
check.
"""

from __future__ import annotations

import numpy as np

from .datamodel import DISTRACTOR_PREFIX, FeatureSet, ScoreMatrix, XqdaModel
from .errors import BadParams, DimMismatch

DEFAULT_IDS = 100
DEFAULT_DIM = 16


def _view_transform(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal map rotating a random dim//2-dim subspace, fixing the rest."""
    k = dim // 2
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    rot, _ = np.linalg.qr(rng.standard_normal((k, k)))
    block = np.eye(dim)
    block[:k, :k] = rot
    return basis @ block @ basis.T


def gen_cross_view(
    n_ids: int,
    dim: int,
    images_per_view: int = 1,
    view_noise: float = 0.0,
    identity_spread: float = 1.0,
    column_bias: float = 0.0,
    seed: int = 0,
) -> tuple[FeatureSet, FeatureSet]:
    """Generate paired camera views ``(view_a, view_b)``.

    Labels are ``id0000..``; columns are grouped by identity. All output
    is a deterministic function of the arguments.
    """
    if n_ids < 2:
        raise BadParams(f"n_ids must be >= 2, got {n_ids}")
    if dim < 2:
        raise BadParams(f"dim must be >= 2, got {dim}")
    if images_per_view < 1:
        raise BadParams(f"images_per_view must be >= 1, got {images_per_view}")
    if view_noise < 0 or identity_spread < 0 or column_bias < 0:
        raise BadParams("view_noise, identity_spread and column_bias must be nonnegative")
    rng = np.random.default_rng(seed)
    centers = identity_spread * rng.standard_normal((dim, n_ids))
    transform = _view_transform(dim, rng)
    m = n_ids * images_per_view
    a = np.repeat(centers, images_per_view, axis=1)
    a = a + view_noise * rng.standard_normal((dim, m))
    b = np.repeat(transform @ centers, images_per_view, axis=1)
    b = b + view_noise * rng.standard_normal((dim, m))
    labels = np.repeat([f"id{k:04d}" for k in range(n_ids)], images_per_view)
    return (
        FeatureSet(view_id="a", dim=dim, vectors=a, labels=labels),
        FeatureSet(view_id="b", dim=dim, vectors=b, labels=labels),
    )


def gen_distractors(
    count: int,
    dim: int,
    identity_spread: float = 1.0,
    view_noise: float = 0.0,
    seed: int = 0,
) -> FeatureSet:
    """Gallery-only padding: images of ``count`` fresh identities rendered
    like view-B samples, labeled in the reserved distractor namespace."""
    if count < 1:
        raise BadParams(f"count must be >= 1, got {count}")
    if dim < 2:
        raise BadParams(f"dim must be >= 2, got {dim}")
    rng = np.random.default_rng(seed)
    centers = identity_spread * rng.standard_normal((dim, count))
    transform = _view_transform(dim, rng)
    vectors = transform @ centers + view_noise * rng.standard_normal((dim, count))
    labels = [f"{DISTRACTOR_PREFIX}{k}" for k in range(count)]
    return FeatureSet(view_id="distractors", dim=dim, vectors=vectors, labels=labels)


def gallery_score_bias(count: int, magnitude: float, seed: int) -> np.ndarray:
    """Per-gallery-sample additive score offsets in ``[0, magnitude)``."""
    rng = np.random.default_rng(seed)
    return magnitude * rng.random(count)


def oracle_pairwise_scores(
    m: np.ndarray, probes: FeatureSet, gallery: FeatureSet
) -> ScoreMatrix:
    """Reference scorer: the simplest possible double loop over pairs.

    Same contract as ``matcher.score_matrix`` applied to already-projected
    features, with no blocking and no parallelism.
    """
    m = np.asarray(m, dtype=np.float64)
    if probes.dim != gallery.dim or m.shape != (probes.dim, probes.dim):
        raise DimMismatch(gallery.dim, probes.dim, context="oracle inputs")
    values = np.empty((probes.m, gallery.m), dtype=np.float64)
    for i in range(probes.m):
        for j in range(gallery.m):
            diff = probes.vectors[:, i] - gallery.vectors[:, j]
            values[i, j] = diff @ m @ diff
    return ScoreMatrix(
        values=values,
        probe_labels=probes.labels,
        gallery_labels=gallery.labels,
        polarity="smaller_better",
        normalization="none",
    )


def oracle_eigen_residual(model: XqdaModel) -> float:
    """Max relative residual of the generalized eigen equation over the
    retained pairs, using the ridge-augmented covariances from the model.

    For the default orientation this is
    ``max_i ||S_s w_i - lambda_i S_d w_i|| / ||S_s w_i||``; for an
    inverted-quotient model the roles of the two covariances swap.
    """
    if model.covariances is None:
        raise BadParams("model carries no covariances (loaded from disk?)")
    a_s = model.covariances.sigma_s_reg
    a_d = model.covariances.sigma_d_reg
    numer, denom = (a_d, a_s) if model.invert_quotient else (a_s, a_d)
    worst = 0.0
    for i in range(model.r):
        w_i = model.w[:, i]
        lhs = numer @ w_i
        scale = np.linalg.norm(lhs)
        if scale == 0.0:
            return float("inf")  # a retained eigenvector collapsed to zero
        residual = np.linalg.norm(lhs - model.eigenvalues[i] * (denom @ w_i))
        worst = max(worst, residual / scale)
    return worst
