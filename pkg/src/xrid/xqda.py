"""Cross-view subspace and metric learning.

From two labeled camera views this module builds the intra-person and
extra-person difference sets, their covariances, and solves the
generalized symmetric eigenproblem ``sigma_s w = lambda sigma_d w`` via
the Cholesky reduction (factor ``sigma_d = L L^T``, solve the standard
symmetric problem for ``L^-1 sigma_s L^-T``, map eigenvectors back
through ``L^-T``). The retained eigenvectors form the projection W and
the metric is ``M = sigma_s'^-1 - sigma_d'^-1`` in the projected space.

Notes on orientation: the quotient solved by default puts the
intra-person covariance in the numerator, so the *largest* eigenvalues
mark directions where intra-person variance dominates. Pass
``invert_quotient=True`` to solve the flipped pencil (the conventional
discriminative orientation); the metric formula is unchanged.

Difference columns are not mean-centered: matched-pair differences are
zero-mean by construction symmetry, and centering would hide a constant
cross-view offset from the metric.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .datamodel import CovariancePair, DifferenceSets, FeatureSet, XqdaModel
from .errors import (
    DimMismatch,
    EigenFailure,
    EmptyInput,
    FileMissing,
    FormatError,
    IoError,
    NoSharedIdentities,
    NotPositiveDefinite,
    SingleIdentity,
    ValidationError,
)

MODEL_MAGIC = b"XMDL"
MODEL_VERSION = 1


@dataclass(frozen=True)
class FixedR:
    """Keep exactly the top ``r`` eigenvectors."""

    r: int

    def __str__(self) -> str:
        return f"fixed({self.r})"


@dataclass(frozen=True)
class EigenvalueThreshold:
    """Keep all eigenvectors with eigenvalue > tau (at least one)."""

    tau: float = 1.0

    def __str__(self) -> str:
        return f"threshold({self.tau:g})"


RPolicy = FixedR | EigenvalueThreshold


def parse_r_policy(text: str) -> RPolicy:
    """Parse ``fixed:<r>`` / ``threshold:<tau>`` (also accepts ``threshold``)."""
    head, _, arg = text.strip().partition(":")
    head = head.lower()
    try:
        if head == "fixed":
            return FixedR(int(arg))
        if head == "threshold":
            return EigenvalueThreshold(float(arg) if arg else 1.0)
    except ValueError:
        pass
    raise ValidationError("r_policy_syntax", f"cannot parse r policy {text!r}")


def build_difference_sets(
    view_a: FeatureSet,
    view_b: FeatureSet,
    negatives_per_positive: int = 1,
    seed: int = 0,
) -> DifferenceSets:
    """Build the intra-person and extra-person cross-view difference sets.

    xs holds ``a_i - b_j`` for *every* same-label pair (i in A, j in B);
    xd holds ``negatives_per_positive * n_s`` distinct different-label
    pairs sampled uniformly without replacement with ``seed`` (all of
    them when fewer exist).
    """
    if view_a.dim != view_b.dim:
        raise DimMismatch(view_b.dim, view_a.dim, context="view feature dimensions")
    if negatives_per_positive < 1:
        raise ValidationError("negatives_per_positive", "must be a positive integer")
    for view in (view_a, view_b):
        if len(set(view.labels)) < 2:
            raise SingleIdentity(f"view {view.view_id!r} has fewer than 2 distinct identities")
    same = view_a.labels[:, None] == view_b.labels[None, :]
    si, sj = np.nonzero(same)
    if si.size == 0:
        raise NoSharedIdentities("the two views share no identity labels")
    xs = view_a.vectors[:, si] - view_b.vectors[:, sj]
    di, dj = np.nonzero(~same)
    n_d = min(negatives_per_positive * si.size, di.size)
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(di.size, size=n_d, replace=False))
    xd = view_a.vectors[:, di[pick]] - view_b.vectors[:, dj[pick]]
    return DifferenceSets(xs=xs, xd=xd, n_s=si.size, n_d=n_d, sampling_seed=seed)


def covariance(x: np.ndarray) -> np.ndarray:
    """``(1/n) X X^T`` over the columns of X, symmetrized to kill round-off."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] == 0:
        raise EmptyInput("covariance needs a d x n matrix with n >= 1")
    c = (x @ x.T) / x.shape[1]
    return (c + c.T) / 2.0


def default_ridge(sigma_s: np.ndarray, sigma_d: np.ndarray) -> float:
    """1e-3 times the mean per-dimension variance of the two covariances."""
    d = sigma_s.shape[0]
    return 1e-3 * (np.trace(sigma_s) / d + np.trace(sigma_d) / d) / 2.0


def solve_xqda(
    diffs: DifferenceSets,
    ridge: float | None = None,
    r_policy: RPolicy = EigenvalueThreshold(1.0),
    invert_quotient: bool = False,
) -> XqdaModel:
    """Learn the projection W and metric M from difference sets.

    ``ridge=None`` selects the default :func:`default_ridge`; the value
    actually used is recorded in the returned model.
    """
    sigma_s = covariance(diffs.xs)
    sigma_d = covariance(diffs.xd)
    if ridge is None:
        ridge = default_ridge(sigma_s, sigma_d)
    try:
        cov = CovariancePair(sigma_s=sigma_s, sigma_d=sigma_d, ridge=ridge)
    except ValidationError as exc:
        if exc.invariant == "positive_definite_after_ridge":
            which = "sigma_s" if "sigma_s" in str(exc) else "sigma_d"
            raise NotPositiveDefinite(which) from None
        raise
    a_s = cov.sigma_s_reg
    a_d = cov.sigma_d_reg
    numer, denom = (a_d, a_s) if invert_quotient else (a_s, a_d)

    # Cholesky reduction of the pencil numer w = lambda denom w.
    try:
        lower = np.linalg.cholesky(denom)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("sigma_s" if invert_quotient else "sigma_d") from None
    half = scipy.linalg.solve_triangular(lower, numer, lower=True)
    reduced = scipy.linalg.solve_triangular(lower, half.T, lower=True).T
    reduced = (reduced + reduced.T) / 2.0
    try:
        eigvals, eigvecs = scipy.linalg.eigh(reduced)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigenFailure(f"symmetric eigensolver failed: {exc}") from exc
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    w_full = scipy.linalg.solve_triangular(lower.T, eigvecs, lower=False)

    # Equal eigenvalues are ordered by the index of the eigenvector's
    # largest-magnitude entry, ascending, for reproducible models.
    tie_key = np.argmax(np.abs(w_full), axis=0)
    order = np.lexsort((tie_key, -eigvals))
    eigvals = eigvals[order]
    w_full = w_full[:, order]

    d = diffs.dim
    if isinstance(r_policy, FixedR):
        if not (1 <= r_policy.r <= d):
            raise ValidationError("r_range", f"fixed r={r_policy.r} outside [1, {d}]")
        r = r_policy.r
    elif isinstance(r_policy, EigenvalueThreshold):
        r = max(1, int(np.count_nonzero(eigvals > r_policy.tau)))
    else:
        raise ValidationError("r_policy_type", f"unknown policy {r_policy!r}")

    if eigvals[r - 1] <= 0:
        raise EigenFailure(
            f"retained eigenvalue {r} is {eigvals[r - 1]:.3e}; the ridge-augmented "
            "pencil should be positive definite"
        )
    w = w_full[:, :r] / np.linalg.norm(w_full[:, :r], axis=0)
    # Sign convention: the largest-magnitude entry of each column is positive.
    peak = np.argmax(np.abs(w), axis=0)
    w = w * np.where(w[peak, np.arange(r)] < 0, -1.0, 1.0)

    sigma_s_proj = w.T @ a_s @ w
    sigma_d_proj = w.T @ a_d @ w
    try:
        metric = np.linalg.inv(sigma_s_proj) - np.linalg.inv(sigma_d_proj)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"projected covariance not invertible: {exc}") from exc
    metric = (metric + metric.T) / 2.0

    return XqdaModel(
        w=w,
        eigenvalues=eigvals[:r],
        metric=metric,
        r=r,
        covariances=cov,
        r_policy=str(r_policy),
        ridge=float(ridge),
        invert_quotient=invert_quotient,
    )


def project(model: XqdaModel, fs: FeatureSet) -> FeatureSet:
    """Project a feature set into the learned r-dimensional subspace."""
    if fs.dim != model.d:
        raise DimMismatch(fs.dim, model.d, context="projection input")
    return FeatureSet(
        view_id=fs.view_id, dim=model.r, vectors=model.w.T @ fs.vectors, labels=fs.labels
    )


def save_model(model: XqdaModel, path) -> None:
    """Serialize W, eigenvalues, M and the ridge (row-major, little-endian)."""
    path = Path(path)
    try:
        # layout: magic | u32 version | u32 d | u32 r | f64 ridge | W | eigs | M
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(struct.pack("<III", MODEL_VERSION, model.d, model.r))
            fh.write(struct.pack("<d", model.ridge))
            fh.write(np.ascontiguousarray(model.w).astype("<f8").tobytes())
            fh.write(np.ascontiguousarray(model.eigenvalues).astype("<f8").tobytes())
            fh.write(np.ascontiguousarray(model.metric).astype("<f8").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path) -> XqdaModel:
    """Read a model file back; covariances and the policy record are not
    stored on disk, so the result carries ``covariances=None``."""
    path = Path(path)
    if not path.is_file():
        raise FileMissing(path)
    data = path.read_bytes()
    head = len(MODEL_MAGIC)
    if data[:head] != MODEL_MAGIC:
        raise FormatError("not a model file (bad magic)", offset=0)
    if len(data) < head + 12 + 8:
        raise FormatError("truncated model header", offset=len(data))
    version, d, r = struct.unpack_from("<III", data, head)
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}")
    (ridge,) = struct.unpack_from("<d", data, head + 12)
    off = head + 20
    need = (d * r + r + r * r) * 8
    if len(data) - off != need:
        raise FormatError(
            f"model payload is {len(data) - off} bytes, expected {need}", offset=off
        )
    w = np.frombuffer(data, dtype="<f8", count=d * r, offset=off).reshape(d, r)
    off += d * r * 8
    eigenvalues = np.frombuffer(data, dtype="<f8", count=r, offset=off)
    off += r * 8
    metric = np.frombuffer(data, dtype="<f8", count=r * r, offset=off).reshape(r, r)
    return XqdaModel(
        w=w,
        eigenvalues=eigenvalues,
        metric=metric,
        r=r,
        covariances=None,
        r_policy="loaded",
        ridge=ridge,
    )
