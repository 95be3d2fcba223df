"""Core domain types shared by every xrid module.

Pure data: no I/O and no algorithms live here. All types are frozen
dataclasses holding read-only numpy arrays, so instances can be shared
across threads without locking. Feature matrices follow the column-major
convention (one sample per column, ``d x m``); the sklearn-facing wrapper
in :mod:`xrid.estimator` transposes at the boundary.

Constructing any type with a violated invariant raises
:class:`xrid.errors.ValidationError` naming the failed invariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError

POLARITIES = ("smaller_better", "larger_better")
NORMALIZATIONS = ("none", "per_probe_row", "per_gallery_column", "two_sided")

#: Labels in this namespace mark gallery-only padding that can never
#: match a probe (GRID-style distractors).
DISTRACTOR_PREFIX = "__distractor_"

_SYM_RTOL = 1e-10


def _frozen_f64(a, invariant: str, ndim: int = 2) -> np.ndarray:
    """Copy to a read-only float64 array of the expected rank."""
    out = np.array(a, dtype=np.float64, order="C")
    if out.ndim != ndim:
        raise ValidationError(invariant, f"expected a {ndim}-d array, got ndim={out.ndim}")
    out.setflags(write=False)
    return out


def _frozen_labels(labels, invariant: str) -> np.ndarray:
    out = np.asarray(labels).copy()
    if out.ndim != 1:
        raise ValidationError(invariant, "labels must be one-dimensional")
    out.setflags(write=False)
    return out


def _require_finite(a: np.ndarray, invariant: str) -> None:
    if a.size and not np.isfinite(a).all():
        raise ValidationError(invariant, "array contains NaN or Inf")


def _require_symmetric(a: np.ndarray, invariant: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise ValidationError(invariant, f"matrix is {a.shape[0]}x{a.shape[1]}, not square")
    scale = np.abs(a).max() if a.size else 0.0
    tol = _SYM_RTOL * max(scale, 1.0)
    asym = np.abs(a - a.T).max() if a.size else 0.0
    if asym > tol:
        raise ValidationError(invariant, f"asymmetry {asym:.3e} exceeds tolerance {tol:.3e}")


def is_distractor_label(label) -> bool:
    return isinstance(label, str) and label.startswith(DISTRACTOR_PREFIX)


@dataclass(frozen=True)
class FeatureSet:
    """Labeled feature vectors for one camera view.

    ``vectors`` is ``dim x m`` with one sample per column; ``labels[j]``
    is the identity of column ``j``. Labels are opaque (str or int,
    compared by exact equality) and may repeat; every label is nonempty.
    """

    view_id: str
    dim: int
    vectors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vectors", _frozen_f64(self.vectors, "vectors_2d"))
        object.__setattr__(self, "labels", _frozen_labels(self.labels, "labels_1d"))
        if self.dim < 1:
            raise ValidationError("dim_positive", f"dim must be >= 1, got {self.dim}")
        if self.vectors.shape[0] != self.dim:
            raise ValidationError(
                "dim_matches_vectors",
                f"vectors have {self.vectors.shape[0]} rows but dim={self.dim}",
            )
        if self.vectors.shape[1] != len(self.labels):
            raise ValidationError(
                "labels_match_columns",
                f"{self.vectors.shape[1]} columns vs {len(self.labels)} labels",
            )
        _require_finite(self.vectors, "finite_values")
        for j, lab in enumerate(self.labels):
            if isinstance(lab, str):
                if lab == "":
                    raise ValidationError("labels_nonempty", f"label {j} is empty")
            elif not isinstance(lab, (int, np.integer)):
                raise ValidationError(
                    "labels_opaque", f"label {j} has unsupported type {type(lab).__name__}"
                )

    @property
    def m(self) -> int:
        return len(self.labels)

    def restrict(self, keep_labels) -> "FeatureSet":
        """Sub-view containing only columns whose label is in ``keep_labels``."""
        keep = set(keep_labels)
        mask = np.fromiter((lab in keep for lab in self.labels), dtype=bool, count=self.m)
        return FeatureSet(self.view_id, self.dim, self.vectors[:, mask], self.labels[mask])

    def distinct_labels(self) -> list:
        seen: dict = {}
        for lab in self.labels:
            seen.setdefault(lab, None)
        return list(seen)


@dataclass(frozen=True)
class DifferenceSets:
    """Intra-person (xs) and extra-person (xd) cross-view difference columns.

    Each xs column is ``a - b`` for a same-label cross-view pair, each xd
    column for a different-label pair; ``sampling_seed`` records how xd
    was drawn.
    """

    xs: np.ndarray
    xd: np.ndarray
    n_s: int
    n_d: int
    sampling_seed: int

    def __post_init__(self):
        object.__setattr__(self, "xs", _frozen_f64(self.xs, "xs_2d"))
        object.__setattr__(self, "xd", _frozen_f64(self.xd, "xd_2d"))
        if self.xs.shape[0] != self.xd.shape[0]:
            raise ValidationError(
                "same_dimension", f"xs has d={self.xs.shape[0]}, xd has d={self.xd.shape[0]}"
            )
        if self.xs.shape[1] != self.n_s or self.n_s < 1:
            raise ValidationError("n_s_columns", f"n_s={self.n_s} vs {self.xs.shape[1]} columns (need >= 1)")
        if self.xd.shape[1] != self.n_d or self.n_d < 1:
            raise ValidationError("n_d_columns", f"n_d={self.n_d} vs {self.xd.shape[1]} columns (need >= 1)")
        _require_finite(self.xs, "finite_values")
        _require_finite(self.xd, "finite_values")

    @property
    def dim(self) -> int:
        return self.xs.shape[0]


@dataclass(frozen=True)
class CovariancePair:
    """Raw intra/extra covariances plus the ridge added to each diagonal.

    The stored matrices are the unridged covariances; ``sigma_s_reg`` and
    ``sigma_d_reg`` return the ridge-augmented versions, which must both
    be positive definite (checked by Cholesky at construction).
    """

    sigma_s: np.ndarray
    sigma_d: np.ndarray
    ridge: float

    def __post_init__(self):
        object.__setattr__(self, "sigma_s", _frozen_f64(self.sigma_s, "sigma_s_2d"))
        object.__setattr__(self, "sigma_d", _frozen_f64(self.sigma_d, "sigma_d_2d"))
        object.__setattr__(self, "ridge", float(self.ridge))
        if not np.isfinite(self.ridge) or self.ridge < 0:
            raise ValidationError("ridge_nonnegative", f"ridge={self.ridge}")
        _require_symmetric(self.sigma_s, "sigma_s_symmetric")
        _require_symmetric(self.sigma_d, "sigma_d_symmetric")
        if self.sigma_s.shape != self.sigma_d.shape:
            raise ValidationError(
                "same_shape", f"{self.sigma_s.shape} vs {self.sigma_d.shape}"
            )
        _require_finite(self.sigma_s, "finite_values")
        _require_finite(self.sigma_d, "finite_values")
        for name, mat in (("sigma_s", self.sigma_s), ("sigma_d", self.sigma_d)):
            try:
                np.linalg.cholesky(mat + self.ridge * np.eye(mat.shape[0]))
            except np.linalg.LinAlgError:
                raise ValidationError(
                    "positive_definite_after_ridge",
                    f"{name} + {self.ridge}*I has no Cholesky factorization",
                ) from None

    @property
    def dim(self) -> int:
        return self.sigma_s.shape[0]

    @property
    def sigma_s_reg(self) -> np.ndarray:
        return self.sigma_s + self.ridge * np.eye(self.dim)

    @property
    def sigma_d_reg(self) -> np.ndarray:
        return self.sigma_d + self.ridge * np.eye(self.dim)


@dataclass(frozen=True)
class XqdaModel:
    """Learned projection W (d x r), its eigenvalues, and the metric M (r x r).

    ``covariances`` is None for models read back from disk (the file
    format stores only W, eigenvalues, M and the ridge); matching needs
    only W and M. ``r_policy`` records how r was chosen and
    ``invert_quotient`` which quotient orientation was solved.
    """

    w: np.ndarray
    eigenvalues: np.ndarray
    metric: np.ndarray
    r: int
    covariances: Optional[CovariancePair]
    r_policy: str
    ridge: float
    invert_quotient: bool = False

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen_f64(self.w, "w_2d"))
        object.__setattr__(self, "eigenvalues", _frozen_f64(self.eigenvalues, "eigenvalues_1d", ndim=1))
        object.__setattr__(self, "metric", _frozen_f64(self.metric, "metric_2d"))
        d = self.w.shape[0]
        if not (1 <= self.r <= d):
            raise ValidationError("r_range", f"r={self.r} outside [1, d={d}]")
        if self.w.shape[1] != self.r:
            raise ValidationError("w_columns", f"W has {self.w.shape[1]} columns, r={self.r}")
        if len(self.eigenvalues) != self.r:
            raise ValidationError("eigenvalue_count", f"{len(self.eigenvalues)} eigenvalues, r={self.r}")
        # Descending with deterministic tie-breaks; exact ties are legal
        # (e.g. the isotropic case), so non-increasing is enforced.
        if np.any(np.diff(self.eigenvalues) > 0):
            raise ValidationError("eigenvalues_descending", "eigenvalues increase somewhere")
        if np.any(self.eigenvalues <= 0):
            raise ValidationError("eigenvalues_positive", "non-positive eigenvalue retained")
        if self.metric.shape != (self.r, self.r):
            raise ValidationError("metric_shape", f"metric is {self.metric.shape}, expected ({self.r},{self.r})")
        _require_symmetric(self.metric, "metric_symmetric")
        _require_finite(self.w, "finite_values")
        _require_finite(self.metric, "finite_values")
        if not np.isfinite(self.ridge) or self.ridge < 0:
            raise ValidationError("ridge_nonnegative", f"ridge={self.ridge}")

    @property
    def d(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class ScoreMatrix:
    """Probe x gallery score values with polarity and normalization provenance."""

    values: np.ndarray
    probe_labels: np.ndarray
    gallery_labels: np.ndarray
    polarity: str = "smaller_better"
    normalization: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_f64(self.values, "values_2d"))
        object.__setattr__(self, "probe_labels", _frozen_labels(self.probe_labels, "probe_labels_1d"))
        object.__setattr__(self, "gallery_labels", _frozen_labels(self.gallery_labels, "gallery_labels_1d"))
        if self.polarity not in POLARITIES:
            raise ValidationError("polarity_known", f"{self.polarity!r} not in {POLARITIES}")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError("normalization_known", f"{self.normalization!r} not in {NORMALIZATIONS}")
        p, g = self.values.shape
        if p != len(self.probe_labels):
            raise ValidationError("probe_label_count", f"{p} rows vs {len(self.probe_labels)} probe labels")
        if g != len(self.gallery_labels):
            raise ValidationError("gallery_label_count", f"{g} cols vs {len(self.gallery_labels)} gallery labels")
        _require_finite(self.values, "finite_values")
        if self.normalization != "none" and self.values.size:
            if self.values.min() < 0.0 or self.values.max() > 1.0:
                raise ValidationError("normalized_range", "normalized values outside [0, 1]")

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def g(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CmcResult:
    """Rank-r matching rates (means over folds) plus per-fold curves.

    ``ranks[r-1]`` is the fraction of probes whose correct match appears
    within the top r candidates, averaged over folds; ``std`` is the
    population (ddof=0) standard deviation across folds.
    """

    ranks: np.ndarray
    folds: np.ndarray
    std: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "ranks", _frozen_f64(self.ranks, "ranks_1d", ndim=1))
        object.__setattr__(self, "folds", _frozen_f64(self.folds, "folds_2d"))
        if self.std is None:
            object.__setattr__(self, "std", np.std(self.folds, axis=0))
        object.__setattr__(self, "std", _frozen_f64(self.std, "std_1d", ndim=1))
        R = len(self.ranks)
        if self.folds.shape[1] != R or len(self.std) != R:
            raise ValidationError("rank_count", "ranks, folds and std disagree on max rank")
        for name, curve in [("ranks", self.ranks)] + [
            (f"fold_{i}", row) for i, row in enumerate(self.folds)
        ]:
            if curve.size and (curve.min() < 0.0 or curve.max() > 1.0):
                raise ValidationError("rates_in_unit_interval", f"{name} leaves [0, 1]")
            if np.any(np.diff(curve) < 0):
                raise ValidationError("monotone_nondecreasing", f"{name} decreases somewhere")

    @classmethod
    def from_folds(cls, fold_curves) -> "CmcResult":
        folds = np.atleast_2d(np.asarray(fold_curves, dtype=np.float64))
        return cls(ranks=folds.mean(axis=0), folds=folds, std=np.std(folds, axis=0))

    @property
    def max_rank(self) -> int:
        return len(self.ranks)
