"""On-disk formats.

Cube file (``.gcsc``)::

    b"GCSC" | u32 version | u32 rows | u32 cols | u32 bands | float64 data

``data`` is band-sequential: ``bands`` planes, each a row-major
``rows x cols`` plane, little-endian.  Ground-truth labels live in a sibling
file (``<stem>.labels``) holding ``rows * cols`` little-endian int32 values
in row-major order with no header.

Matrix file (``.gcsm``)::

    b"GCSM" | u32 n_rows | u32 n_cols | float64 row-major data
"""

import csv
import io
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from gcsc.errors import DataError, FormatError

CUBE_MAGIC = b"GCSC"
CUBE_VERSION = 1
MATRIX_MAGIC = b"GCSM"

_CUBE_HEADER = struct.Struct("<4sIIII")
_MATRIX_HEADER = struct.Struct("<4sII")


def atomic_write_bytes(path, payload):
    """Write ``payload`` to ``path`` through a temp file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def labels_path_for(cube_path):
    cube_path = Path(cube_path)
    return cube_path.with_suffix(".labels")


# -- cube -------------------------------------------------------------------

def encode_cube(data):
    data = np.asarray(data, dtype="<f8")
    if data.ndim != 3:
        raise FormatError(f"cube data must be 3-D, got shape {data.shape}")
    rows, cols, bands = data.shape
    header = _CUBE_HEADER.pack(CUBE_MAGIC, CUBE_VERSION, rows, cols, bands)
    planes = np.ascontiguousarray(np.moveaxis(data, 2, 0))
    return header + planes.tobytes()


def decode_cube(payload):
    if len(payload) < _CUBE_HEADER.size:
        raise FormatError("cube file truncated: header incomplete")
    magic, version, rows, cols, bands = _CUBE_HEADER.unpack_from(payload)
    if magic != CUBE_MAGIC:
        raise FormatError(f"bad cube magic {magic!r}, expected {CUBE_MAGIC!r}")
    if version != CUBE_VERSION:
        raise FormatError(f"unsupported cube version {version}")
    if rows == 0 or cols == 0 or bands == 0:
        raise FormatError(f"cube header has a zero dimension ({rows}, {cols}, {bands})")
    expected = _CUBE_HEADER.size + rows * cols * bands * 8
    if len(payload) != expected:
        raise FormatError(
            f"cube payload size {len(payload)} does not match header "
            f"({rows}x{cols}x{bands} needs {expected} bytes)"
        )
    planes = np.frombuffer(payload, dtype="<f8", offset=_CUBE_HEADER.size)
    planes = planes.reshape(bands, rows, cols)
    return np.ascontiguousarray(np.moveaxis(planes, 0, 2)).astype(np.float64)


def encode_labels(labels):
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise FormatError(f"label map must be 2-D, got shape {labels.shape}")
    return np.ascontiguousarray(labels, dtype="<i4").tobytes()


def decode_labels(payload, rows, cols):
    if len(payload) != rows * cols * 4:
        raise FormatError(
            f"label file has {len(payload)} bytes, expected {rows * cols * 4} for {rows}x{cols}"
        )
    return np.frombuffer(payload, dtype="<i4").reshape(rows, cols).astype(np.int64)


def write_cube(path, data, labels=None):
    atomic_write_bytes(path, encode_cube(data))
    if labels is not None:
        atomic_write_bytes(labels_path_for(path), encode_labels(labels))


def read_cube(path):
    """Return ``(data, labels_or_None)`` read from a ``.gcsc`` cube file."""
    path = Path(path)
    data = decode_cube(path.read_bytes())
    lpath = labels_path_for(path)
    labels = None
    if lpath.exists():
        labels = decode_labels(lpath.read_bytes(), data.shape[0], data.shape[1])
    return data, labels


# -- matrix -----------------------------------------------------------------

def encode_matrix(values):
    values = np.asarray(values, dtype="<f8")
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2:
        raise FormatError(f"matrix must be 2-D, got shape {values.shape}")
    n, m = values.shape
    return _MATRIX_HEADER.pack(MATRIX_MAGIC, n, m) + np.ascontiguousarray(values).tobytes()


def decode_matrix(payload):
    if len(payload) < _MATRIX_HEADER.size:
        raise FormatError("matrix file truncated: header incomplete")
    magic, n, m = _MATRIX_HEADER.unpack_from(payload)
    if magic != MATRIX_MAGIC:
        raise FormatError(f"bad matrix magic {magic!r}, expected {MATRIX_MAGIC!r}")
    expected = _MATRIX_HEADER.size + n * m * 8
    if len(payload) != expected:
        raise FormatError(f"matrix payload size {len(payload)} does not match header {n}x{m}")
    out = np.frombuffer(payload, dtype="<f8", offset=_MATRIX_HEADER.size)
    return out.reshape(n, m).astype(np.float64)


def write_matrix(path, values):
    atomic_write_bytes(path, encode_matrix(values))


def read_matrix(path):
    return decode_matrix(Path(path).read_bytes())


# -- label vectors / CSV -----------------------------------------------------

def write_label_vector(path, labels, coords=None):
    """Write per-sample labels as CSV (``index,label`` or ``row,col,label``)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    labels = np.asarray(labels)
    if coords is None:
        writer.writerow(["index", "label"])
        for i, lab in enumerate(labels):
            writer.writerow([i, int(lab)])
    else:
        writer.writerow(["row", "col", "label"])
        for (r, c), lab in zip(np.asarray(coords), labels):
            writer.writerow([int(r), int(c), int(lab)])
    atomic_write_text(path, buf.getvalue())


def read_label_vector(path):
    """Read a label CSV written by :func:`write_label_vector`.

    Headerless single-column files are accepted too.  Returns
    ``(labels, coords_or_None)``.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: no labels found")
    header = [cell.strip().lower() for cell in rows[0]]
    has_header = not _is_int(header[-1])
    body = rows[1:] if has_header else rows
    labels, coords = [], []
    for i, row in enumerate(body):
        try:
            labels.append(int(float(row[-1])))
            if len(row) >= 3:
                coords.append((int(row[0]), int(row[1])))
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: malformed label row {i}: {row!r}") from exc
    coords_arr = np.array(coords, dtype=np.int64) if len(coords) == len(labels) and coords else None
    return np.array(labels, dtype=np.int64), coords_arr


def _is_int(text):
    try:
        int(float(text))
    except ValueError:
        return False
    return True
