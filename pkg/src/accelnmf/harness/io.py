"""Matrix loaders and the CSV / key=value formats written by experiments.

Supported input formats:

``mm`` (``matrix-market``)
    MatrixMarket ``coordinate`` (real, integer or pattern; general or
    symmetric) loads as CSR with duplicates summed; ``array`` loads dense.
    A file without the ``%%MatrixMarket`` banner is read as
    ``coordinate real general``.
``csv`` (``dense-csv``)
    Comma separated rows of numbers, all of the same length.
``raw`` (``raw-f64``)
    Two little-endian uint64 values ``rows, cols`` followed by
    ``rows * cols`` little-endian float64 values in row-major order.

Negative entries are rejected everywhere.
"""
import csv
import math
import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sp

FORMAT_ALIASES = {
    "mm": "mm", "matrix-market": "mm", "mtx": "mm",
    "csv": "csv", "dense-csv": "csv",
    "raw": "raw", "raw-f64": "raw",
}

TRACE_COLUMNS = ("outer_iter", "elapsed_s", "error", "w_inner", "h_inner")
CURVE_COLUMNS = ("t", "mean_E", "min_E", "max_E")


class MatrixFormatError(ValueError):
    """A matrix file could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, path, message, line=None):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def load_matrix(path, fmt="mm"):
    try:
        kind = FORMAT_ALIASES[fmt]
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}; use one of {sorted(FORMAT_ALIASES)}")
    path = Path(path)
    if kind == "mm":
        return _load_matrix_market(path)
    if kind == "csv":
        return _load_csv(path)
    return _load_raw(path)


def _parse_number(tok, field, path, lineno):
    try:
        value = float(tok)
    except ValueError:
        raise MatrixFormatError(path, f"cannot parse {field} {tok!r}", lineno)
    if not math.isfinite(value):
        raise MatrixFormatError(path, f"non-finite {field} {tok!r}", lineno)
    return value


def _load_matrix_market(path):
    layout, field, symmetry = "coordinate", "real", "general"
    header = None
    rows, cols, vals = [], [], []
    expected = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if lineno == 1 and text.lower().startswith("%%matrixmarket"):
                parts = text.lower().split()
                if len(parts) != 5 or parts[1] != "matrix":
                    raise MatrixFormatError(path, "malformed MatrixMarket banner", lineno)
                layout, field, symmetry = parts[2], parts[3], parts[4]
                if layout not in ("coordinate", "array"):
                    raise MatrixFormatError(path, f"unsupported layout {layout!r}", lineno)
                if field not in ("real", "integer", "pattern", "double"):
                    raise MatrixFormatError(path, f"unsupported field {field!r}", lineno)
                if symmetry not in ("general", "symmetric"):
                    raise MatrixFormatError(path, f"unsupported symmetry {symmetry!r}", lineno)
                continue
            if not text or text.startswith("%"):
                continue
            toks = text.split()
            if header is None:
                want = 3 if layout == "coordinate" else 2
                if len(toks) != want:
                    raise MatrixFormatError(
                        path, f"size line needs {want} integers, got {text!r}", lineno)
                try:
                    header = [int(t) for t in toks]
                except ValueError:
                    raise MatrixFormatError(path, f"bad size line {text!r}", lineno)
                if min(header) < 0:
                    raise MatrixFormatError(path, "negative size in header", lineno)
                expected = header[2] if layout == "coordinate" else header[0] * header[1]
                continue
            if layout == "array":
                if len(toks) != 1:
                    raise MatrixFormatError(path, f"expected one value, got {text!r}", lineno)
                value = _parse_number(toks[0], "value", path, lineno)
                k = len(vals)
                if k >= expected:
                    raise MatrixFormatError(path, "more entries than the size line declares", lineno)
                # array layout is column-major
                i, j = k % header[0], k // header[0]
                if value < 0:
                    raise MatrixFormatError(
                        path, f"negative entry {value!r} at ({i + 1}, {j + 1})", lineno)
                vals.append(value)
                continue
            want = 2 if field == "pattern" else 3
            if len(toks) != want:
                raise MatrixFormatError(path, f"expected {want} fields, got {text!r}", lineno)
            try:
                i, j = int(toks[0]), int(toks[1])
            except ValueError:
                raise MatrixFormatError(path, f"bad indices in {text!r}", lineno)
            if not (1 <= i <= header[0] and 1 <= j <= header[1]):
                raise MatrixFormatError(
                    path, f"index ({i}, {j}) outside {header[0]}x{header[1]}", lineno)
            value = 1.0 if field == "pattern" else _parse_number(toks[2], "value", path, lineno)
            if value < 0:
                raise MatrixFormatError(
                    path, f"negative entry {value!r} at ({i}, {j})", lineno)
            if len(vals) >= expected:
                raise MatrixFormatError(path, "more entries than the size line declares", lineno)
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(value)
    if header is None:
        raise MatrixFormatError(path, "missing size line")
    if len(vals) != expected:
        raise MatrixFormatError(
            path, f"size line declares {expected} entries, found {len(vals)}")
    if layout == "array":
        M = np.array(vals, dtype=np.float64).reshape(header[1], header[0]).T
        if symmetry == "symmetric":
            raise MatrixFormatError(path, "symmetric array layout is not supported")
        return np.ascontiguousarray(M)
    rows, cols, vals = np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals)
    if symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    M = sp.coo_matrix((vals, (rows, cols)), shape=(header[0], header[1])).tocsr()
    M.sum_duplicates()
    M.sort_indices()
    return M


def _load_csv(path):
    data = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            values = [_parse_number(c.strip(), "value", path, lineno) for c in row]
            if data and len(values) != len(data[0]):
                raise MatrixFormatError(
                    path, f"row has {len(values)} columns, expected {len(data[0])}", lineno)
            for j, v in enumerate(values):
                if v < 0:
                    raise MatrixFormatError(
                        path, f"negative entry {v!r} at ({len(data) + 1}, {j + 1})", lineno)
            data.append(values)
    if not data:
        raise MatrixFormatError(path, "no data rows")
    return np.array(data, dtype=np.float64)


def _load_raw(path):
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise MatrixFormatError(path, "file too short for the 16-byte header")
    rows, cols = struct.unpack("<QQ", blob[:16])
    body = blob[16:]
    if len(body) != 8 * rows * cols:
        raise MatrixFormatError(
            path, f"header declares {rows}x{cols} but payload holds {len(body) // 8} values")
    M = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(rows, cols)
    if M.size and M.min() < 0:
        i, j = np.unravel_index(np.argmin(M), M.shape)
        raise MatrixFormatError(path, f"negative entry {M[i, j]!r} at ({i + 1}, {j + 1})")
    if not np.all(np.isfinite(M)):
        raise MatrixFormatError(path, "non-finite values")
    return M


def save_raw(path, M):
    M = np.ascontiguousarray(M, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", *M.shape))
        fh.write(M.tobytes())


def save_matrix_market(path, M):
    M = sp.coo_matrix(M)
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{M.shape[0]} {M.shape[1]} {M.nnz}\n")
        for i, j, v in zip(M.row, M.col, M.data):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for k, t, e, wi, hi in trace.rows():
            w.writerow([k, repr(float(t)), repr(float(e)), wi, hi])


def read_trace_csv(path):
    """Return a dict mapping each trace column to a list of values."""
    out = {c: [] for c in TRACE_COLUMNS}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            out["outer_iter"].append(int(row["outer_iter"]))
            out["elapsed_s"].append(float(row["elapsed_s"]))
            out["error"].append(float(row["error"]))
            out["w_inner"].append(int(row["w_inner"]))
            out["h_inner"].append(int(row["h_inner"]))
    return out


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS)
        for row in zip(curve.t, curve.mean, curve.min, curve.max):
            w.writerow([repr(float(x)) for x in row])


def read_curve_csv(path):
    out = {c: [] for c in CURVE_COLUMNS}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            for c in CURVE_COLUMNS:
                out[c].append(float(row[c]))
    return out


def write_summary(path, items):
    with open(path, "w") as fh:
        for key, value in items:
            fh.write(f"{key}={value}\n")


def read_summary(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line and not line.startswith("#"):
                key, _, value = line.partition("=")
                out[key.strip()] = value.strip()
    return out
