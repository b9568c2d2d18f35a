"""Feature and model file formats.

Two on-disk families live here:

* feature files, either binary or CSV.  The binary layout is magic ``FVC1``,
  then the feature count T and dimensionality D as little-endian uint32, then
  T*D float32 values row-major.  The CSV layout is one feature per line,
  comma-separated decimal values.
* model files (dictionaries, mixtures, projections, coders, classifiers): a
  single container with magic ``FVCM``, a format-version byte, a model-type
  tag byte, little-endian uint32 dimensions, then a float64 little-endian
  payload row-major.  Model round-trips are bit-exact.

Format errors always name the first offending byte offset (binary) or line
number (CSV).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, FormatError
from .validation import as_matrix

FEATURE_MAGIC = b"FVC1"
MODEL_MAGIC = b"FVCM"
MODEL_VERSION = 1

TAG_DICTIONARY = 1
TAG_GMM = 2
TAG_PCA = 3
TAG_SUP_CODER = 4
TAG_LINEAR = 5
TAG_HYBRID_DICTIONARY = 6

_TAG_NAMES = {
    TAG_DICTIONARY: "dictionary",
    TAG_GMM: "gmm",
    TAG_PCA: "pca",
    TAG_SUP_CODER: "supervised coder",
    TAG_LINEAR: "linear classifier",
    TAG_HYBRID_DICTIONARY: "hybrid dictionary pair",
}


@dataclass(frozen=True)
class FeatureSet:
    """A bag of T local features of dimensionality D for one image.

    ``features`` is a read-only (T, D) float64 array; T >= 1, D >= 1, all
    entries finite.  ``label`` is an optional integer class id.
    """

    features: np.ndarray
    image_id: str = ""
    label: int | None = None

    def __post_init__(self):
        arr = as_matrix(self.features, "features")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ArgumentError(
                f"features must be non-empty, got shape {arr.shape}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "features", arr)
        if self.label is not None and not isinstance(self.label, (int, np.integer)):
            raise ArgumentError(f"label must be an int or None, got {self.label!r}")

    @property
    def t(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def write_feature_set(path, fs: FeatureSet, fmt: str = "binary") -> None:
    """Write ``fs`` to ``path`` in the given format ("binary" or "csv").

    The binary payload is float32, so values are rounded to single precision;
    a write-then-read round trip reproduces the stored float32 values exactly.
    """
    if fmt == "binary":
        payload = fs.features.astype("<f4")
        with open(path, "wb") as fh:
            fh.write(FEATURE_MAGIC)
            fh.write(struct.pack("<II", fs.t, fs.d))
            fh.write(payload.tobytes(order="C"))
    elif fmt == "csv":
        with open(path, "w", encoding="ascii") as fh:
            for row in fs.features:
                fh.write(",".join(format(v, ".17g") for v in row))
                fh.write("\n")
    else:
        raise ArgumentError(f"unknown feature format {fmt!r}")


def read_feature_set(path, fmt: str = "binary", image_id: str | None = None,
                     label: int | None = None) -> FeatureSet:
    """Read a feature file written by :func:`write_feature_set`."""
    if fmt == "binary":
        features = _read_binary_features(path)
    elif fmt == "csv":
        features = _read_csv_features(path)
    else:
        raise ArgumentError(f"unknown feature format {fmt!r}")
    if image_id is None:
        image_id = str(path)
    return FeatureSet(features=features, image_id=image_id, label=label)


def _read_binary_features(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise FormatError(f"{path}: truncated magic at byte 0 (file has {len(blob)} bytes)")
    if blob[:4] != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r} at byte 0, expected {FEATURE_MAGIC!r}")
    if len(blob) < 12:
        raise FormatError(f"{path}: truncated header at byte 4 (file has {len(blob)} bytes)")
    t, d = struct.unpack_from("<II", blob, 4)
    if t < 1:
        raise FormatError(f"{path}: feature count {t} at byte 4 must be >= 1")
    if d < 1:
        raise FormatError(f"{path}: dimensionality {d} at byte 8 must be >= 1")
    expected = 12 + 4 * t * d
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload at byte 12 has {len(blob) - 12} bytes, "
            f"expected {4 * t * d} for {t}x{d} float32"
        )
    values = np.frombuffer(blob, dtype="<f4", count=t * d, offset=12)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise FormatError(f"{path}: non-finite value at byte {12 + 4 * i}")
    return values.astype(np.float64).reshape(t, d)


def _read_csv_features(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: byte {exc.start}: not ascii text") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            raise FormatError(f"{path}: empty line {lineno}")
        parts = line.split(",")
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"{path}: unparseable value on line {lineno}") from None
        if not all(np.isfinite(row)):
            raise FormatError(f"{path}: non-finite value on line {lineno}")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FormatError(
                f"{path}: line {lineno} has {len(row)} values, expected {width}"
            )
        rows.append(row)
    if not rows:
        raise FormatError(f"{path}: empty file, expected at least one feature on line 1")
    return np.asarray(rows, dtype=np.float64)


def write_model_file(path, tag: int, dims: tuple[int, ...], arrays) -> None:
    """Write a model container: header, uint32 dims, concatenated f64 payload."""
    if tag not in _TAG_NAMES:
        raise ArgumentError(f"unknown model tag {tag}")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<BB", MODEL_VERSION, tag))
        for value in dims:
            if value < 0 or value > 0xFFFFFFFF:
                raise ArgumentError(f"model dimension {value} out of uint32 range")
            fh.write(struct.pack("<I", int(value)))
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes(order="C"))


def read_model_file(path, tag: int, n_dims: int, payload_len) -> tuple[tuple[int, ...], np.ndarray]:
    """Read a model container, checking magic, version, and type tag.

    ``payload_len`` maps the dims tuple to the expected float64 count.
    Returns the dims and the flat float64 payload.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise FormatError(f"{path}: truncated magic at byte 0 (file has {len(blob)} bytes)")
    if blob[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r} at byte 0, expected {MODEL_MAGIC!r}")
    if len(blob) < 6:
        raise FormatError(f"{path}: truncated header at byte 4")
    version, found_tag = blob[4], blob[5]
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported format version {version} at byte 4")
    if found_tag != tag:
        want = _TAG_NAMES.get(tag, str(tag))
        got = _TAG_NAMES.get(found_tag, str(found_tag))
        raise FormatError(f"{path}: model type {got!r} at byte 5, expected {want!r}")
    dims_end = 6 + 4 * n_dims
    if len(blob) < dims_end:
        raise FormatError(f"{path}: truncated dimensions at byte 6")
    dims = struct.unpack_from(f"<{n_dims}I", blob, 6)
    expected = int(payload_len(dims))
    actual = len(blob) - dims_end
    if actual != 8 * expected:
        raise FormatError(
            f"{path}: payload at byte {dims_end} has {actual} bytes, "
            f"expected {8 * expected} for {expected} float64 values"
        )
    payload = np.frombuffer(blob, dtype="<f8", count=expected, offset=dims_end)
    bad = np.flatnonzero(~np.isfinite(payload))
    if bad.size:
        i = int(bad[0])
        raise FormatError(f"{path}: non-finite value at byte {dims_end + 8 * i}")
    return dims, payload.astype(np.float64)


@dataclass
class LabeledFiles:
    """A labels manifest: relative file names paired with integer labels."""

    names: list = field(default_factory=list)
    labels: list = field(default_factory=list)


def write_labels(path, names, labels) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("file,label\n")
        for name, label in zip(names, labels):
            fh.write(f"{name},{int(label)}\n")


def read_labels(path) -> LabeledFiles:
    out = LabeledFiles()
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "file,label":
            raise FormatError(f"{path}: line 1 must be the header 'file,label', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise FormatError(f"{path}: line {lineno} must be 'file,label'")
            try:
                label = int(parts[1])
            except ValueError:
                raise FormatError(f"{path}: bad label on line {lineno}") from None
            out.names.append(parts[0])
            out.labels.append(label)
    if not out.names:
        raise FormatError(f"{path}: no entries after the header on line 1")
    return out
