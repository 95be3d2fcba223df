"""Writer for the xrid binary feature format.

Layout (little-endian): ``magic "XRID" | u32 version=1 | u32 dim |
u32 count | count x (u16 label-length, utf-8 label bytes, dim x f64)``.
This is the published interchange format; files written here load with
``xrid.ingest.load_feature_set`` unchanged.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"XRID"
VERSION = 1


def write_feature_file(path, labels: list[str], vectors: np.ndarray) -> None:
    """``vectors`` is (count, dim) float; one record per row."""
    vectors = np.asarray(vectors, dtype=np.float64)
    count, dim = vectors.shape
    if count != len(labels):
        raise ValueError(f"{count} vectors vs {len(labels)} labels")
    if count == 0:
        raise ValueError("refusing to write an empty feature file")
    if not np.isfinite(vectors).all():
        raise ValueError("non-finite feature values")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, dim, count))
        for label, row in zip(labels, vectors):
            raw = str(label).encode("utf-8")
            if not raw:
                raise ValueError("empty label")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(row.astype("<f8", copy=False).tobytes())
