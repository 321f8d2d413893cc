"""Data-matrix file formats: CSV and a little-endian binary layout.

Convention everywhere in this package: a data matrix is I x N with one
column per sample (x(n) is column n).

CSV layout: a header row naming the I features, then one row per
sample (N rows of I values each). Readers transpose back to I x N.

Binary layout (all little-endian):
    bytes 0..7   magic b"GSFAMAT1"
    byte  8      dtype code: 1 = float64, 2 = float32
    bytes 9..16  uint64 I (rows / features)
    bytes 17..24 uint64 N (columns / samples)
    payload      I * N values, row-major
"""

import csv
import struct

import numpy as np

from .errors import DimensionError, FormatError

MAGIC = b"GSFAMAT1"
_DTYPES = {1: "<f8", 2: "<f4"}
_CODES = {np.dtype("float64"): 1, np.dtype("float32"): 2}


def save_matrix_csv(data, path, feature_names=None):
    """Write an I x N matrix as CSV (header = feature names, rows = samples)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n_feat = data.shape[0]
    if feature_names is None:
        feature_names = [f"x_{i}" for i in range(n_feat)]
    if len(feature_names) != n_feat:
        raise DimensionError("need one name per feature row")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(feature_names)
        for col in data.T:
            writer.writerow([repr(float(x)) for x in col])


def load_matrix_csv(path):
    """Read a matrix CSV; returns (I x N array, feature names)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            names = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty CSV") from None
        rows = [[float(x) for x in row] for row in reader if row]
    if not rows:
        raise FormatError(f"{path}: CSV has a header but no data rows")
    data = np.asarray(rows, dtype=float).T
    if data.shape[0] != len(names):
        raise FormatError(f"{path}: row width does not match header")
    return data, names


def save_matrix_binary(data, path, dtype="float64"):
    data = np.atleast_2d(np.asarray(data))
    code = _CODES[np.dtype(dtype)]
    payload = np.ascontiguousarray(data, dtype=_DTYPES[code])
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", code))
        fh.write(struct.pack("<QQ", data.shape[0], data.shape[1]))
        fh.write(payload.tobytes())


def load_matrix_binary(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:8]!r}")
    code = blob[8]
    if code not in _DTYPES:
        raise FormatError(f"{path}: unknown dtype code {code}")
    n_rows, n_cols = struct.unpack("<QQ", blob[9:25])
    expect = 25 + n_rows * n_cols * np.dtype(_DTYPES[code]).itemsize
    if len(blob) != expect:
        raise FormatError(f"{path}: payload size mismatch "
                          f"({len(blob)} bytes, expected {expect})")
    data = np.frombuffer(blob[25:], dtype=_DTYPES[code]).reshape(n_rows, n_cols)
    return np.asarray(data, dtype=float)


def load_matrix(path):
    """Dispatch on extension: .csv -> CSV reader, anything else binary."""
    path = str(path)
    if path.endswith(".csv"):
        return load_matrix_csv(path)[0]
    return load_matrix_binary(path)
