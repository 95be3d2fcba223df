"""Scikit-learn facing wrapper around the cross-view metric learner.

The functional core (:mod:`xrid.xqda`, :mod:`xrid.matcher`) speaks the
column-major FeatureSet convention; this estimator speaks sklearn's
rows-are-samples convention so the learner drops into Pipelines,
grid-search and friends via ``get_params``/``set_params``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .datamodel import FeatureSet
from .matcher import score_matrix
from .xqda import EigenvalueThreshold, FixedR, build_difference_sets, solve_xqda


class XqdaMetricLearner(BaseEstimator, TransformerMixin):
    """Cross-view quadratic discriminant metric learner.

    Parameters
    ----------
    n_components : int or "auto"
        Subspace dimension. "auto" keeps eigenvalues above
        ``eigenvalue_threshold`` (at least one).
    eigenvalue_threshold : float
        Retention threshold used when ``n_components="auto"``.
    ridge : float or None
        Diagonal regularization added to both covariances; None picks
        1e-3 times the mean per-dimension variance.
    negatives_per_positive : int
        Dissimilar pairs sampled per similar pair.
    invert_quotient : bool
        Solve the flipped variance quotient (the conventional
        discriminative orientation) instead of the default one.
    random_state : int
        Seed for dissimilar-pair sampling.

    Attributes
    ----------
    model_ : XqdaModel
    w_ : ndarray of shape (n_features, n_components_)
    metric_ : ndarray of shape (n_components_, n_components_)
    eigenvalues_ : ndarray of shape (n_components_,)
    """

    def __init__(
        self,
        n_components="auto",
        eigenvalue_threshold=1.0,
        ridge=None,
        negatives_per_positive=1,
        invert_quotient=False,
        random_state=0,
    ):
        self.n_components = n_components
        self.eigenvalue_threshold = eigenvalue_threshold
        self.ridge = ridge
        self.negatives_per_positive = negatives_per_positive
        self.invert_quotient = invert_quotient
        self.random_state = random_state

    def _policy(self):
        if self.n_components == "auto":
            return EigenvalueThreshold(self.eigenvalue_threshold)
        return FixedR(int(self.n_components))

    def fit(self, X, y, X_other=None, y_other=None):
        """Learn W and M from one camera view per argument pair.

        ``X`` (n_samples, n_features) with labels ``y`` is the first
        view; ``X_other``/``y_other`` the second. When the second view is
        omitted, ``X``/``y`` play both roles (single-camera fallback).
        """
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        if X_other is None:
            X_other, y_other = X, y
        else:
            X_other = check_array(X_other, dtype=np.float64)
            y_other = np.asarray(y_other)
        view_a = FeatureSet(view_id="a", dim=X.shape[1], vectors=X.T, labels=y)
        view_b = FeatureSet(view_id="b", dim=X_other.shape[1], vectors=X_other.T, labels=y_other)
        diffs = build_difference_sets(
            view_a,
            view_b,
            negatives_per_positive=self.negatives_per_positive,
            seed=self.random_state,
        )
        self.model_ = solve_xqda(
            diffs,
            ridge=self.ridge,
            r_policy=self._policy(),
            invert_quotient=self.invert_quotient,
        )
        self.w_ = self.model_.w
        self.metric_ = self.model_.metric
        self.eigenvalues_ = self.model_.eigenvalues
        self.n_components_ = self.model_.r
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("XqdaMetricLearner is not fitted yet; call fit first")

    def transform(self, X):
        """Project rows into the learned subspace."""
        self._check_fitted()
        X = check_array(X, dtype=np.float64)
        return X @ self.w_

    def pair_distance(self, X_probe, X_gallery):
        """Learned-metric distance matrix (n_probe, n_gallery); smaller is
        a better match and values may be negative."""
        self._check_fitted()
        X_probe = check_array(X_probe, dtype=np.float64)
        X_gallery = check_array(X_gallery, dtype=np.float64)
        probes = FeatureSet(
            view_id="probe", dim=X_probe.shape[1], vectors=X_probe.T,
            labels=np.arange(X_probe.shape[0]),
        )
        gallery = FeatureSet(
            view_id="gallery", dim=X_gallery.shape[1], vectors=X_gallery.T,
            labels=np.arange(X_gallery.shape[0]),
        )
        return score_matrix(self.model_, probes, gallery).values
