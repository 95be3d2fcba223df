"""Probe-vs-gallery distance matrices under a learned metric.

The scalar form is the difference-based Mahalanobis quadratic
``(u - v)^T M (u - v)``. It may be negative: the learned
``M = sigma_s'^-1 - sigma_d'^-1`` is indefinite, and negative values are
propagated untouched because clamping would distort ranks.

Scoring is row-parallel. Every probe row is computed by the same
per-row expression regardless of worker count, so the output is
bit-identical for any number of threads.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .datamodel import NORMALIZATIONS, POLARITIES, FeatureSet, ScoreMatrix, XqdaModel
from .errors import DimMismatch, FileMissing, FormatError, IoError

DEFAULT_BLOCK_BYTES = 1 << 30
SCORE_MAGIC = b"XSCR"
SCORE_VERSION = 1


def mahalanobis_distance(m: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    """``(u - v)^T M (u - v)`` for a symmetric M."""
    m = np.asarray(m, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise DimMismatch(v.size, u.size, context="vector lengths")
    if m.shape != (u.size, u.size):
        raise DimMismatch(m.shape[0], u.size, context="metric vs vectors")
    diff = u - v
    return float(diff @ (m @ diff))


def _score_rows(out, probes_t, gallery_t, metric, start, stop):
    # One row at a time: identical arithmetic however rows are chunked.
    for i in range(start, stop):
        diff = probes_t[i] - gallery_t
        out[i] = np.einsum("jk,kl,jl->j", diff, metric, diff, optimize=True)


def score_matrix(
    model: XqdaModel,
    probes: FeatureSet,
    gallery: FeatureSet,
    threads: int = 0,
    max_block_bytes: int = DEFAULT_BLOCK_BYTES,
) -> ScoreMatrix:
    """Project both sets through W and score every probe against every
    gallery sample; smaller is better, no normalization applied.

    ``threads=0`` uses one worker per CPU. ``max_block_bytes`` caps the
    intermediate difference buffers handed to each worker.
    """
    if probes.dim != model.d:
        raise DimMismatch(probes.dim, model.d, context="probe features")
    if gallery.dim != model.d:
        raise DimMismatch(gallery.dim, model.d, context="gallery features")
    probes_t = np.ascontiguousarray((model.w.T @ probes.vectors).T)  # p x r
    gallery_t = np.ascontiguousarray((model.w.T @ gallery.vectors).T)  # g x r
    p, g = probes_t.shape[0], gallery_t.shape[0]
    out = np.empty((p, g), dtype=np.float64)
    if p:
        row_bytes = max(1, g * max(model.r, 1) * 8)
        rows_per_task = max(1, min(p, int(max_block_bytes // row_bytes)))
        bounds = list(range(0, p, rows_per_task)) + [p]
        tasks = list(zip(bounds[:-1], bounds[1:]))
        if threads == 1 or len(tasks) == 1:
            for start, stop in tasks:
                _score_rows(out, probes_t, gallery_t, model.metric, start, stop)
        else:
            workers = threads if threads > 0 else None
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(
                    pool.map(
                        lambda span: _score_rows(out, probes_t, gallery_t, model.metric, *span),
                        tasks,
                    )
                )
    return ScoreMatrix(
        values=out,
        probe_labels=probes.labels,
        gallery_labels=gallery.labels,
        polarity="smaller_better",
        normalization="none",
    )


def save_scores_csv(scores: ScoreMatrix, path) -> None:
    """``probe_label,gallery_label,value`` rows, full precision."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("probe_label,gallery_label,value\n")
            for i in range(scores.p):
                for j in range(scores.g):
                    fh.write(
                        f"{scores.probe_labels[i]},{scores.gallery_labels[j]},"
                        f"{scores.values[i, j]:.17g}\n"
                    )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _write_label_block(fh, labels) -> None:
    for lab in labels:
        raw = str(lab).encode("utf-8")
        fh.write(struct.pack("<H", len(raw)))
        fh.write(raw)


def save_scores_binary(scores: ScoreMatrix, path) -> None:
    """Binary dump in the feature-file header style (little-endian):
    magic "XSCR" | u32 version | u32 p | u32 g | u8 polarity |
    u8 normalization | p + g length-prefixed labels | p*g f64 row-major."""
    try:
        with open(path, "wb") as fh:
            fh.write(SCORE_MAGIC)
            fh.write(struct.pack("<III", SCORE_VERSION, scores.p, scores.g))
            fh.write(struct.pack("<BB", POLARITIES.index(scores.polarity),
                                 NORMALIZATIONS.index(scores.normalization)))
            _write_label_block(fh, scores.probe_labels)
            _write_label_block(fh, scores.gallery_labels)
            fh.write(np.ascontiguousarray(scores.values).astype("<f8").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_scores_binary(path) -> ScoreMatrix:
    path = Path(path)
    if not path.is_file():
        raise FileMissing(path)
    data = path.read_bytes()
    off = len(SCORE_MAGIC)
    if data[:off] != SCORE_MAGIC:
        raise FormatError("not a score file (bad magic)", offset=0)
    version, p, g = struct.unpack_from("<III", data, off)
    off += 12
    if version != SCORE_VERSION:
        raise FormatError(f"unsupported score file version {version}")
    pol_idx, norm_idx = struct.unpack_from("<BB", data, off)
    off += 2
    try:
        polarity = POLARITIES[pol_idx]
        normalization = NORMALIZATIONS[norm_idx]
    except IndexError:
        raise FormatError("unknown polarity/normalization code", offset=off - 2) from None

    def read_labels(count: int, off: int):
        labels = []
        for _ in range(count):
            (n,) = struct.unpack_from("<H", data, off)
            off += 2
            labels.append(data[off : off + n].decode("utf-8"))
            off += n
        return labels, off

    probe_labels, off = read_labels(p, off)
    gallery_labels, off = read_labels(g, off)
    if len(data) - off != p * g * 8:
        raise FormatError(f"payload is {len(data) - off} bytes, expected {p * g * 8}", offset=off)
    values = np.frombuffer(data, dtype="<f8", count=p * g, offset=off).reshape(p, g)
    return ScoreMatrix(
        values=values,
        probe_labels=probe_labels,
        gallery_labels=gallery_labels,
        polarity=polarity,
        normalization=normalization,
    )
