"""Reading hyperspectral cubes, cropping sub-scenes and pairing pixels with labels."""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gcsc import formats
from gcsc.errors import ArgumentError, DataError, FormatError, StateError

FORMATS = ("raw-bin", "csv-stack", "mat-v5")


def _frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def _check_finite(values, what):
    bad = ~np.isfinite(values)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DataError(f"{what} has a non-finite value at index {idx}")


@dataclass(frozen=True)
class HsiCube:
    """A hyperspectral cube of shape (rows, cols, bands).

    ``labels`` is an optional (rows, cols) integer map where 0 marks
    unlabeled background.  Arrays are copied and made read-only.
    """

    data: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise DataError(f"cube data must be rows x cols x bands with bands >= 1, got {data.shape}")
        _check_finite(data, "cube")
        object.__setattr__(self, "data", _frozen(data))
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != data.shape[:2]:
                raise DataError(f"label map shape {labels.shape} does not match cube {data.shape[:2]}")
            if labels.size and (not np.all(np.equal(np.mod(labels, 1), 0)) or labels.min() < 0):
                raise DataError("labels must be nonnegative integers")
            object.__setattr__(self, "labels", _frozen(labels.astype(np.int64)))

    @property
    def shape(self):
        return self.data.shape

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def bands(self):
        return self.data.shape[2]

    @property
    def n_labeled(self):
        return 0 if self.labels is None else int(np.count_nonzero(self.labels))

    @property
    def n_classes(self):
        if self.labels is None:
            return 0
        return int(np.unique(self.labels[self.labels > 0]).size)


@dataclass(frozen=True)
class LabeledSamples:
    """Samples-major feature matrix with per-sample labels.

    ``coords`` holds the (row, col) of each sample in the source scene and
    ``shape`` the scene's (rows, cols); both are ``None`` for data that did
    not come from an image.
    """

    features: np.ndarray
    labels: np.ndarray
    coords: np.ndarray | None = None
    shape: tuple | None = None
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise DataError(f"features must be 2-D (N x m), got {features.shape}")
        labels = np.asarray(self.labels).astype(np.int64).ravel()
        if labels.shape[0] != features.shape[0]:
            raise DataError(f"{labels.shape[0]} labels for {features.shape[0]} samples")
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", _frozen(labels))
        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=np.int64).reshape(-1, 2)
            if coords.shape[0] != features.shape[0]:
                raise DataError(f"{coords.shape[0]} coords for {features.shape[0]} samples")
            object.__setattr__(self, "coords", _frozen(coords))
        if self.shape is not None:
            object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return int(np.unique(self.labels).size)


# -- loading ------------------------------------------------------------------

def load_cube(path, format="raw-bin", labels_path=None, key=None, label_key=None, name=None):
    """Load a hyperspectral cube.

    Parameters
    ----------
    path : str or Path
        ``raw-bin``: a ``.gcsc`` file (labels read from the sibling
        ``.labels`` file when present).  ``csv-stack``: either a directory of
        per-band CSV grids or a long-form ``row,col,band,value`` CSV file.
        ``mat-v5``: a MATLAB v5 file holding a 3-D numeric array.
    format : {"raw-bin", "csv-stack", "mat-v5"}
    labels_path : str or Path, optional
        Ground truth.  A ``row,col,label`` CSV, a ``.mat`` file with a 2-D
        array, or a raw int32 ``.labels`` file.
    key, label_key : str, optional
        Variable names inside MAT files; inferred when there is exactly one
        candidate array.
    """
    path = Path(path)
    if format not in FORMATS:
        raise ArgumentError(f"unknown cube format {format!r}; expected one of {FORMATS}")
    if not path.exists():
        raise FileNotFoundError(path)
    name = name if name is not None else path.stem

    if format == "raw-bin":
        data, labels = formats.read_cube(path)
    elif format == "csv-stack":
        data, labels = _read_csv_stack(path)
    else:
        data = _read_mat_array(path, key, ndim=3)
        labels = None

    if labels_path is not None:
        labels = _read_label_map(Path(labels_path), data.shape[:2], label_key)
    return HsiCube(data, labels, name)


def save_cube(cube, path):
    """Write ``cube`` in the raw-bin format (labels to the sibling file)."""
    formats.write_cube(path, cube.data, cube.labels)


def _parse_float(text, where):
    try:
        return float(text)
    except ValueError as exc:
        raise DataError(f"{where}: cannot parse {text!r} as a number") from exc


def _read_grid_csv(path):
    grid = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            grid.append([_parse_float(v, f"{path.name} row {i}") for v in row])
    widths = {len(r) for r in grid}
    if len(widths) != 1:
        for i, r in enumerate(grid):
            if len(r) != len(grid[0]):
                raise DataError(f"{path.name} row {i}: expected {len(grid[0])} values, got {len(r)}")
    return np.array(grid, dtype=np.float64)


def _read_csv_stack(path):
    if path.is_dir():
        band_files = sorted(p for p in path.glob("*.csv") if p.name != "labels.csv")
        if not band_files:
            raise FormatError(f"{path}: no band CSV files")
        planes = [_read_grid_csv(p) for p in band_files]
        shapes = {p.shape for p in planes}
        if len(shapes) != 1:
            raise FormatError(f"{path}: band grids have differing shapes {sorted(shapes)}")
        data = np.stack(planes, axis=2)
        labels = None
        lfile = path / "labels.csv"
        if lfile.exists():
            labels = _read_label_csv(lfile, data.shape[:2])
        return data, labels
    return _read_long_csv(path), None


def _read_long_csv(path):
    entries = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["row", "col", "band", "value"]:
            raise FormatError(f"{path}: expected header 'row,col,band,value', got {header!r}")
        for i, row in enumerate(reader):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path.name}: malformed row {i}: expected 4 fields, got {len(row)}")
            where = f"{path.name} row {i}"
            try:
                r, c, b = (int(row[0]), int(row[1]), int(row[2]))
            except ValueError as exc:
                raise DataError(f"{where}: bad index in {row!r}") from exc
            if min(r, c, b) < 0:
                raise DataError(f"{where}: negative index in {row!r}")
            entries.append((r, c, b, _parse_float(row[3], where)))
    if not entries:
        raise FormatError(f"{path}: no data rows")
    idx = np.array([e[:3] for e in entries], dtype=np.int64)
    vals = np.array([e[3] for e in entries], dtype=np.float64)
    shape = tuple(idx.max(axis=0) + 1)
    data = np.full(shape, np.nan)
    data[idx[:, 0], idx[:, 1], idx[:, 2]] = vals
    _check_finite(data, f"{path.name} (missing or non-finite entries)")
    return data


def _read_label_csv(path, shape):
    labels = np.zeros(shape, dtype=np.int64)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["row", "col", "label"]:
            raise FormatError(f"{path}: expected header 'row,col,label', got {header!r}")
        for i, row in enumerate(reader):
            if not row:
                continue
            try:
                r, c, lab = (int(v) for v in row)
            except ValueError as exc:
                raise DataError(f"{path.name}: malformed row {i}: {row!r}") from exc
            if not (0 <= r < shape[0] and 0 <= c < shape[1]):
                raise DataError(f"{path.name} row {i}: pixel ({r}, {c}) outside {shape}")
            labels[r, c] = lab
    return labels


def _read_mat_array(path, key, ndim):
    from scipy import io as sio

    try:
        contents = sio.loadmat(path)
    except Exception as exc:  # scipy raises several unrelated types here
        raise FormatError(f"{path}: not a readable MAT-v5 file ({exc})") from exc
    arrays = {
        k: v for k, v in contents.items()
        if not k.startswith("__") and isinstance(v, np.ndarray) and v.dtype.kind in "iuf"
    }
    if key is not None:
        if key not in arrays:
            raise FormatError(f"{path}: no numeric variable {key!r} (have {sorted(arrays)})")
        arr = arrays[key]
    else:
        cands = [v for v in arrays.values() if v.ndim == ndim]
        if len(cands) != 1:
            raise FormatError(f"{path}: cannot infer the {ndim}-D variable; pass key= (have {sorted(arrays)})")
        arr = cands[0]
    if arr.ndim != ndim:
        raise FormatError(f"{path}: variable has {arr.ndim} dims, expected {ndim}")
    return np.asarray(arr, dtype=np.float64 if ndim == 3 else np.int64)


def _read_label_map(path, shape, label_key=None):
    if not path.exists():
        raise FileNotFoundError(path)
    if path.suffix.lower() == ".mat":
        labels = _read_mat_array(path, label_key, ndim=2)
    elif path.suffix.lower() == ".csv":
        labels = _read_label_csv(path, shape)
    else:
        labels = formats.decode_labels(path.read_bytes(), *shape)
    if labels.shape != tuple(shape):
        raise DataError(f"label map {labels.shape} does not match cube {tuple(shape)}")
    return labels


# -- cropping / sampling ---------------------------------------------------------

def crop_subscene(cube, row_range, col_range):
    """Crop ``cube`` to rows ``row_range`` and columns ``col_range``.

    Ranges are 0-based and inclusive at both ends, so ``(591, 676)`` keeps 86
    rows.  Labels are cropped identically.
    """
    (r0, r1), (c0, c1) = (tuple(int(v) for v in row_range), tuple(int(v) for v in col_range))
    if not (0 <= r0 <= r1 < cube.rows):
        raise ArgumentError(f"row range [{r0}, {r1}] outside 0..{cube.rows - 1}")
    if not (0 <= c0 <= c1 < cube.cols):
        raise ArgumentError(f"col range [{c0}, {c1}] outside 0..{cube.cols - 1}")
    labels = None if cube.labels is None else cube.labels[r0:r1 + 1, c0:c1 + 1]
    return HsiCube(cube.data[r0:r1 + 1, c0:c1 + 1, :], labels, cube.name)


def parse_crop(text, one_based=True):
    """Parse ``"r0:r1,c0:c1"`` into 0-based inclusive ranges.

    The command line takes 1-based pixel numbers, so ``"591:676,158:240"``
    becomes ``((590, 675), (157, 239))``.
    """
    try:
        rows, cols = text.split(",")
        r0, r1 = (int(v) for v in rows.split(":"))
        c0, c1 = (int(v) for v in cols.split(":"))
    except ValueError as exc:
        raise ArgumentError(f"crop must look like 'r0:r1,c0:c1', got {text!r}") from exc
    off = 1 if one_based else 0
    return (r0 - off, r1 - off), (c0 - off, c1 - off)


def to_labeled_samples(cube):
    """Flatten the labeled pixels of ``cube`` into samples, row-major by (row, col)."""
    if cube.labels is None:
        raise StateError(f"cube {cube.name!r} has no labels")
    rr, cc = np.nonzero(cube.labels > 0)
    if rr.size == 0:
        raise StateError(f"cube {cube.name!r} has no labeled pixels (all background)")
    coords = np.stack([rr, cc], axis=1)
    return LabeledSamples(
        cube.data[rr, cc, :], cube.labels[rr, cc], coords, (cube.rows, cube.cols), cube.name
    )
