"""Spectral PCA, spectral-spatial patches and [0, 1] scaling."""

from dataclasses import dataclass

import numpy as np

from gcsc.errors import ArgumentError, DataError, DegenerateDataError, StateError
from gcsc.ingest import HsiCube, LabeledSamples


def check_samples(values, min_rows=2):
    """Validate a samples-major matrix and return it as float64."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise DataError(f"sample matrix must be 2-D (N x m), got shape {values.shape}")
    if values.shape[0] < min_rows or values.shape[1] < 1:
        raise DataError(f"sample matrix needs N >= {min_rows} and m >= 1, got {values.shape}")
    if not np.all(np.isfinite(values)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
        raise DataError(f"sample matrix has a non-finite value at {idx}")
    return values


@dataclass(frozen=True)
class PcaModel:
    """Principal directions as columns of ``components`` (bands x d)."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def n_components(self):
        return self.components.shape[1]

    @property
    def n_features(self):
        return self.components.shape[0]


def _fix_signs(vectors):
    # largest-magnitude entry of each column made positive; first index wins ties
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def fit_pca(samples, n_components=None, variance=None):
    """Fit PCA from the eigendecomposition of the feature covariance.

    Exactly one of ``n_components`` (keep the top d directions) or
    ``variance`` (keep the smallest d whose cumulative explained-variance
    ratio reaches the threshold) must be given.
    """
    x = check_samples(samples)
    n, b = x.shape
    if (n_components is None) == (variance is None):
        raise ArgumentError("pass exactly one of n_components or variance")
    if n_components is not None:
        d = int(n_components)
        if not 1 <= d <= min(n, b):
            raise ArgumentError(f"n_components={d} must lie in [1, min(N, bands)={min(n, b)}]")
    elif not 0.0 < variance <= 1.0:
        raise ArgumentError(f"variance threshold {variance} must lie in (0, 1]")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / max(n - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = _fix_signs(evecs[:, order])
    total = evals.sum()

    if variance is not None:
        if total <= 0.0:
            raise DegenerateDataError("all features have zero variance; cannot pick components by variance")
        ratio_all = evals / total
        cum = np.cumsum(ratio_all)
        d = int(np.searchsorted(cum, variance - 1e-12) + 1)
        d = min(d, min(n, b))
    ratio = evals[:d] / total if total > 0 else np.zeros(d)
    return PcaModel(mean, evecs[:, :d], evals[:d], ratio)


def transform_pca(model, data):
    """Project samples (N x bands), a raw cube array, or an :class:`HsiCube`.

    The output keeps the input's layout with ``model.n_components`` features.
    """
    if isinstance(data, HsiCube):
        reduced = transform_pca(model, data.data)
        return HsiCube(reduced, data.labels, data.name)
    arr = np.asarray(data, dtype=np.float64)
    if arr.shape[-1] != model.n_features:
        raise ArgumentError(f"input has {arr.shape[-1]} features, model expects {model.n_features}")
    return (arr - model.mean) @ model.components


def inverse_transform_pca(model, scores):
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[-1] != model.n_components:
        raise ArgumentError(f"scores have {scores.shape[-1]} columns, model has {model.n_components}")
    return scores @ model.components.T + model.mean


def extract_patches(cube, window):
    """Represent each labeled pixel by its ``window x window`` neighbourhood.

    Features are flattened in (row offset, col offset, band) order, giving
    ``window**2 * bands`` values per pixel.  Borders use mirror padding
    (reflection without repeating the edge pixel).  Sample order matches
    :func:`gcsc.ingest.to_labeled_samples`.
    """
    if window < 1 or window % 2 == 0:
        raise ArgumentError(f"window must be a positive odd integer, got {window}")
    if window > 2 * min(cube.rows, cube.cols):
        raise ArgumentError(f"window {window} too large for a {cube.rows}x{cube.cols} scene")
    if cube.labels is None:
        raise StateError(f"cube {cube.name!r} has no labels")
    half = window // 2
    padded = np.pad(cube.data, ((half, half), (half, half), (0, 0)), mode="reflect")
    views = np.lib.stride_tricks.sliding_window_view(padded, (window, window), axis=(0, 1))
    # views: rows x cols x bands x window x window
    rr, cc = np.nonzero(cube.labels > 0)
    if rr.size == 0:
        raise StateError(f"cube {cube.name!r} has no labeled pixels (all background)")
    patches = views[rr, cc].transpose(0, 2, 3, 1).reshape(rr.size, -1)
    coords = np.stack([rr, cc], axis=1)
    return LabeledSamples(patches, cube.labels[rr, cc], coords, (cube.rows, cube.cols), cube.name)


def minmax_scale(samples):
    """Map each feature column affinely onto [0, 1]; constant columns become 0."""
    if isinstance(samples, LabeledSamples):
        return LabeledSamples(
            minmax_scale(samples.features), samples.labels, samples.coords, samples.shape, samples.name
        )
    x = check_samples(samples, min_rows=1)
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    out = np.zeros_like(x)
    ok = span > 0
    out[:, ok] = (x[:, ok] - lo[ok]) / span[ok]
    return out
