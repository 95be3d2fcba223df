"""Shared fixtures and independent reference implementations.

The oracles here (brute-force CMC scan, naive covariance) deliberately
share no code with the production paths they check.
"""

from __future__ import annotations

import numpy as np
import pytest

from xrid.datamodel import FeatureSet, ScoreMatrix


def brute_force_cmc(scores: ScoreMatrix, max_rank: int) -> np.ndarray:
    """Exhaustive per-probe scan: sort candidates one probe at a time with
    explicit (value, index) keys and count matches per rank."""
    p, g = scores.values.shape
    hits_at = np.zeros(g, dtype=np.int64)
    for i in range(p):
        row = scores.values[i]
        if scores.polarity == "smaller_better":
            candidates = sorted(range(g), key=lambda j: (row[j], j))
        else:
            candidates = sorted(range(g), key=lambda j: (-row[j], j))
        for pos, j in enumerate(candidates):
            if scores.gallery_labels[j] == scores.probe_labels[i]:
                hits_at[pos] += 1
                break
    curve = np.empty(max_rank, dtype=np.float64)
    total = 0
    for r in range(max_rank):
        total += hits_at[r]
        curve[r] = total / p
    return curve


def naive_covariance(x: np.ndarray) -> np.ndarray:
    """Two explicit loops over entries; O(d^2 n) on purpose."""
    d, n = x.shape
    out = np.zeros((d, d), dtype=np.float64)
    for a in range(d):
        for b in range(d):
            acc = 0.0
            for k in range(n):
                acc += x[a, k] * x[b, k]
            out[a, b] = acc / n
    return out


def random_feature_set(rng: np.random.Generator, dim: int, m: int, view_id: str = "v") -> FeatureSet:
    labels = [f"p{k:03d}" for k in range(m)]
    return FeatureSet(view_id=view_id, dim=dim, vectors=rng.standard_normal((dim, m)), labels=labels)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
