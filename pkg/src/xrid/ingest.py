"""Feature-file and manifest I/O.

Two on-disk feature formats are supported:

* CSV: one header line ``dim=<d>,count=<m>`` followed by ``m`` rows of
  ``label,v1,...,vd``. Values are written with 17 significant digits, so
  a float64 round-trips exactly.
* Binary (little-endian): ``magic "XRID" | u32 version=1 | u32 dim |
  u32 count | count x (u16 label-length, label bytes (utf-8),
  dim x f64)``. Bit-exact round-trip.

The manifest is a flat key-value text file (``name=``,
``view.<id>=<path>``, ``expected_dim=``, ``distractor=<path>``,
``notes=``), ``#`` starts a comment. Relative paths resolve against the
manifest's directory.

Loading is stateless and reentrant; files may be loaded in parallel.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datamodel import DISTRACTOR_PREFIX, FeatureSet
from .errors import (
    CrossFileDimMismatch,
    DimMismatch,
    FileMissing,
    FormatError,
    IoError,
    NonFiniteValue,
    SchemaError,
    ValidationError,
)

MAGIC = b"XRID"
BINARY_VERSION = 1
_HEADER = struct.Struct("<III")  # version, dim, count
_LABEL_LEN = struct.Struct("<H")


def binary_file_size(dim: int, labels) -> int:
    """Exact byte size of the binary format for the given labels and dim."""
    records = sum(
        _LABEL_LEN.size + len(str(lab).encode("utf-8")) + dim * 8 for lab in labels
    )
    return len(MAGIC) + _HEADER.size + records


def save_feature_set(fs: FeatureSet, path, format: str = "binary") -> None:
    """Write ``fs`` so that :func:`load_feature_set` reproduces it.

    Refuses empty sets (all downstream math needs at least one sample).
    """
    if fs.m == 0:
        raise FormatError("refusing to save an empty feature set (count=0)")
    path = Path(path)
    try:
        if format == "binary":
            _save_binary(fs, path)
        elif format == "csv":
            _save_csv(fs, path)
        else:
            raise FormatError(f"unknown format {format!r}; use 'csv' or 'binary'")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _save_binary(fs: FeatureSet, path: Path) -> None:
    cols = np.ascontiguousarray(fs.vectors.T)  # one record per sample
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(BINARY_VERSION, fs.dim, fs.m))
        for j in range(fs.m):
            lab = str(fs.labels[j]).encode("utf-8")
            fh.write(_LABEL_LEN.pack(len(lab)))
            fh.write(lab)
            fh.write(cols[j].astype("<f8", copy=False).tobytes())


def _save_csv(fs: FeatureSet, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={fs.dim},count={fs.m}\n")
        for j in range(fs.m):
            vals = ",".join(f"{v:.17g}" for v in fs.vectors[:, j])
            fh.write(f"{fs.labels[j]},{vals}\n")


def load_feature_set(path, expected_dim: int | None = None, view_id: str | None = None) -> FeatureSet:
    """Load a feature file in either supported format (sniffed by magic).

    ``expected_dim``, when given, must equal the file's dim
    (:class:`DimMismatch` otherwise). ``view_id`` defaults to the file stem.
    """
    path = Path(path)
    if not path.is_file():
        raise FileMissing(path)
    if view_id is None:
        view_id = path.stem
    try:
        with open(path, "rb") as fh:
            head = fh.read(len(MAGIC))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if head == MAGIC:
        fs = _load_binary(path, view_id)
    else:
        fs = _load_csv(path, view_id)
    if expected_dim is not None and fs.dim != expected_dim:
        raise DimMismatch(fs.dim, expected_dim, context=str(path))
    return fs


def read_feature_header(path) -> tuple[int, int]:
    """Return (dim, count) from either format without loading the payload."""
    path = Path(path)
    if not path.is_file():
        raise FileMissing(path)
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC) + _HEADER.size)
    if head[: len(MAGIC)] == MAGIC:
        if len(head) < len(MAGIC) + _HEADER.size:
            raise FormatError("truncated binary header", offset=len(head))
        version, dim, count = _HEADER.unpack(head[len(MAGIC):])
        if version != BINARY_VERSION:
            raise FormatError(f"unsupported binary version {version}")
        return dim, count
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        return _parse_csv_header(fh.readline())


def _parse_csv_header(line: str) -> tuple[int, int]:
    parts = line.strip().split(",")
    kv = {}
    for part in parts:
        if "=" not in part:
            raise FormatError(f"bad CSV header field {part!r}", line=1)
        k, v = part.split("=", 1)
        kv[k.strip()] = v.strip()
    if set(kv) != {"dim", "count"}:
        raise FormatError("CSV header must be 'dim=<d>,count=<m>'", line=1)
    try:
        dim, count = int(kv["dim"]), int(kv["count"])
    except ValueError:
        raise FormatError("CSV header dim/count must be integers", line=1) from None
    if dim < 1:
        raise FormatError(f"dim must be >= 1, got {dim}", line=1)
    if count < 1:
        raise FormatError("empty feature sets are refused (count must be >= 1)", line=1)
    return dim, count


def _load_csv(path: Path, view_id: str) -> FeatureSet:
    with open(path, "r", encoding="utf-8") as fh:
        dim, count = _parse_csv_header(fh.readline())
        vectors = np.empty((dim, count), dtype=np.float64)
        labels = []
        row = 0
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            if row >= count:
                raise FormatError(f"more data rows than declared count={count}", line=lineno)
            fields = line.split(",")
            if len(fields) != dim + 1:
                raise FormatError(
                    f"expected 1 label + {dim} values, got {len(fields)} fields", line=lineno
                )
            label = fields[0]
            if label == "":
                raise FormatError("empty label", line=lineno)
            try:
                vec = np.array(fields[1:], dtype=np.float64)
            except ValueError:
                raise FormatError("unparseable numeric value", line=lineno) from None
            bad = np.flatnonzero(~np.isfinite(vec))
            if bad.size:
                raise NonFiniteValue(row=int(bad[0]), col=row)
            vectors[:, row] = vec
            labels.append(label)
            row += 1
    if row != count:
        raise FormatError(f"declared count={count} but found {row} data rows")
    return FeatureSet(view_id=view_id, dim=dim, vectors=vectors, labels=labels)


def _load_binary(path: Path, view_id: str) -> FeatureSet:
    data = path.read_bytes()
    off = len(MAGIC)
    if len(data) < off + _HEADER.size:
        raise FormatError("truncated binary header", offset=len(data))
    version, dim, count = _HEADER.unpack_from(data, off)
    off += _HEADER.size
    if version != BINARY_VERSION:
        raise FormatError(f"unsupported binary version {version}", offset=len(MAGIC))
    if dim < 1:
        raise FormatError(f"dim must be >= 1, got {dim}", offset=len(MAGIC))
    if count < 1:
        raise FormatError("empty feature sets are refused (count must be >= 1)")
    vectors = np.empty((dim, count), dtype=np.float64)
    labels = []
    vec_bytes = dim * 8
    for j in range(count):
        if off + _LABEL_LEN.size > len(data):
            raise FormatError(f"truncated at record {j}", offset=off)
        (lab_len,) = _LABEL_LEN.unpack_from(data, off)
        off += _LABEL_LEN.size
        if off + lab_len + vec_bytes > len(data):
            raise FormatError(f"truncated at record {j}", offset=off)
        label = data[off : off + lab_len].decode("utf-8")
        if label == "":
            raise FormatError(f"empty label in record {j}", offset=off)
        off += lab_len
        vec = np.frombuffer(data, dtype="<f8", count=dim, offset=off)
        off += vec_bytes
        bad = np.flatnonzero(~np.isfinite(vec))
        if bad.size:
            raise NonFiniteValue(row=int(bad[0]), col=j)
        vectors[:, j] = vec
        labels.append(label)
    if off != len(data):
        raise FormatError(f"{len(data) - off} trailing bytes after last record", offset=off)
    return FeatureSet(view_id=view_id, dim=dim, vectors=vectors, labels=labels)


def load_distractors(path, expected_dim: int) -> FeatureSet:
    """Load gallery-only padding, relabeling every vector into the reserved
    ``__distractor_<k>`` namespace so it can never match a probe."""
    fs = load_feature_set(path, expected_dim=expected_dim, view_id="distractors")
    labels = [f"{DISTRACTOR_PREFIX}{k}" for k in range(fs.m)]
    return FeatureSet(view_id=fs.view_id, dim=fs.dim, vectors=fs.vectors, labels=labels)


@dataclass(frozen=True)
class DatasetManifest:
    """Names the per-view feature files (and optional distractor padding)
    making up one dataset."""

    name: str
    views: tuple
    expected_dim: int
    distractor_file: Path | None = None
    notes: str = ""

    def __post_init__(self):
        if len(self.views) < 2:
            raise ValidationError(
                "two_views_minimum", "cross-view matching requires at least two views"
            )

    def view_path(self, view_id: str) -> Path:
        for vid, path in self.views:
            if vid == view_id:
                return path
        raise SchemaError(f"manifest has no view {view_id!r} (has {[v for v, _ in self.views]})")

    def load_view(self, view_id: str) -> FeatureSet:
        return load_feature_set(self.view_path(view_id), self.expected_dim, view_id=view_id)

    def load_distractors(self) -> FeatureSet | None:
        if self.distractor_file is None:
            return None
        return load_distractors(self.distractor_file, self.expected_dim)


def parse_kv_file(path) -> dict[str, str]:
    """Parse a flat ``key=value`` file with ``#`` comments and blank lines."""
    path = Path(path)
    if not path.is_file():
        raise FileMissing(path)
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            key, value = key.strip(), value.strip()
            if key in out:
                raise SchemaError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value
    return out


def load_manifest(path) -> DatasetManifest:
    """Load and validate a dataset manifest.

    Every referenced feature file must exist and carry the manifest's
    ``expected_dim`` (:class:`CrossFileDimMismatch` otherwise).
    """
    path = Path(path)
    kv = parse_kv_file(path)
    base = path.parent
    if "expected_dim" not in kv:
        raise SchemaError(f"{path}: missing required key 'expected_dim'")
    try:
        expected_dim = int(kv.pop("expected_dim"))
    except ValueError:
        raise SchemaError(f"{path}: expected_dim must be an integer") from None
    name = kv.pop("name", path.stem)
    notes = kv.pop("notes", "")
    distractor = kv.pop("distractor", None)
    views = []
    for key in list(kv):
        if key.startswith("view."):
            views.append((key[len("view."):], base / kv.pop(key)))
    if kv:
        raise SchemaError(f"{path}: unknown keys {sorted(kv)}")
    views.sort(key=lambda item: item[0])
    manifest = DatasetManifest(
        name=name,
        views=tuple(views),
        expected_dim=expected_dim,
        distractor_file=(base / distractor) if distractor else None,
        notes=notes,
    )
    check_paths = [p for _, p in manifest.views]
    if manifest.distractor_file is not None:
        check_paths.append(manifest.distractor_file)
    for p in check_paths:
        if not Path(p).is_file():
            raise FileMissing(p)
        dim, _count = read_feature_header(p)
        if dim != expected_dim:
            raise CrossFileDimMismatch(p, dim, expected_dim)
    return manifest


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write a manifest; view/distractor paths are stored relative to it
    when possible."""
    path = Path(path)
    base = path.parent

    def rel(p: Path) -> str:
        try:
            return str(Path(p).relative_to(base))
        except ValueError:
            return str(p)

    lines = [f"name={manifest.name}", f"expected_dim={manifest.expected_dim}"]
    for vid, vpath in manifest.views:
        lines.append(f"view.{vid}={rel(vpath)}")
    if manifest.distractor_file is not None:
        lines.append(f"distractor={rel(manifest.distractor_file)}")
    if manifest.notes:
        lines.append(f"notes={manifest.notes}")
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
