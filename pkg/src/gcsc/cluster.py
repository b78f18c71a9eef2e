"""Affinity construction from ``Z`` and normalized spectral clustering."""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph

from gcsc.errors import ArgumentError, DataError, DegenerateDataError, NumericalError, StateError

log = logging.getLogger(__name__)

AFFINITY_MODES = ("symmetrize", "edsc")

# tab20 followed by a few extra distinct colours; index 0 is the background
PALETTE = np.array(
    [
        (0, 0, 0),
        (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40), (148, 103, 189),
        (140, 86, 75), (227, 119, 194), (127, 127, 127), (188, 189, 34), (23, 190, 207),
        (174, 199, 232), (255, 187, 120), (152, 223, 138), (255, 152, 150), (197, 176, 213),
        (196, 156, 148), (247, 182, 210), (199, 199, 199), (219, 219, 141), (158, 218, 229),
        (255, 255, 0), (0, 255, 255), (255, 0, 255), (128, 0, 0), (0, 128, 0),
    ],
    dtype=np.uint8,
)


@dataclass(frozen=True)
class AffinityMatrix:
    C: np.ndarray
    mode: str
    rank: int | None = None
    notes: tuple = field(default=())


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    n_clusters: int
    seed: int
    inertia: float = float("nan")


# -- affinity -------------------------------------------------------------------

def _components(z):
    """Connected components of the support of ``|Z| + |Z|^T``."""
    n = z.shape[0]
    support = z != 0
    if np.count_nonzero(support) == n * n:
        return 1, np.zeros(n, dtype=np.int64)
    graph = sparse.csr_matrix(support | support.T)
    return csgraph.connected_components(graph, directed=False)


def _leading_left_singular(z, r):
    """Top-``r`` left singular pairs ``(U_r, s_r)`` of ``z``, largest first.

    Uses the eigendecomposition of ``Z Z^T``; singular values are then
    recomputed as ``||Z^T u||`` which stays accurate near zero.
    """
    n = z.shape[0]
    r = min(r, n)
    gram = z @ z.T
    gram = 0.5 * (gram + gram.T)
    if r == n:
        evals, evecs = linalg.eigh(gram)
    else:
        evals, evecs = linalg.eigh(gram, subset_by_index=[n - r, n - 1])
    evecs = evecs[:, ::-1]
    svals = np.linalg.norm(z.T @ evecs, axis=0)
    return evecs, svals


def _edsc_embedding(z, r):
    n_comp, comp = _components(z)
    if n_comp == 1:
        return _leading_left_singular(z, r)
    # block-diagonal Z: decompose block by block, then keep the global top r
    n = z.shape[0]
    cols, vals = [], []
    for c in range(n_comp):
        idx = np.flatnonzero(comp == c)
        u, s = _leading_left_singular(z[np.ix_(idx, idx)], min(r, idx.size))
        for j in range(u.shape[1]):
            full = np.zeros(n)
            full[idx] = u[:, j]
            cols.append(full)
            vals.append(s[j])
    vals = np.array(vals)
    order = np.argsort(-vals, kind="stable")[:r]
    return np.stack([cols[i] for i in order], axis=1), vals[order]


def build_affinity(Z, n_clusters, mode="edsc", d_per_cluster=10, power=8.0):
    """Turn self-representation coefficients into a symmetric affinity.

    ``symmetrize`` gives ``(|Z| + |Z|^T) / 2``.  ``edsc`` enhances block
    structure: keep the leading ``r = d_per_cluster * n_clusters + 1`` left
    singular vectors, weight them by ``sqrt(sigma)``, normalize rows to unit
    length, raise ``|<L_i, L_j>|`` to ``power`` and rescale so the largest entry
    is 1.
    """
    z = np.asarray(getattr(Z, "Z", Z), dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise DataError(f"Z must be square, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise DataError("Z has non-finite entries")
    if int(n_clusters) < 2:
        raise ArgumentError(f"n_clusters must be >= 2, got {n_clusters}")
    if mode not in AFFINITY_MODES:
        raise ArgumentError(f"unknown affinity mode {mode!r}; expected one of {AFFINITY_MODES}")
    if not np.any(z):
        raise DegenerateDataError("Z is identically zero; no affinity can be built")

    if mode == "symmetrize":
        a = np.abs(z)
        return AffinityMatrix(0.5 * (a + a.T), mode)

    n = z.shape[0]
    notes = []
    r = int(d_per_cluster) * int(n_clusters) + 1
    if r > n:
        msg = f"requested rank {r} exceeds N={n}; clamped to {n}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        log.warning(msg)
        notes.append(msg)
        r = n
    u, s = _edsc_embedding(z, r)
    emb = u * np.sqrt(s)[None, :]
    norms = np.linalg.norm(emb, axis=1)
    norms[norms == 0] = 1.0
    emb = emb / norms[:, None]
    c = np.abs(emb @ emb.T) ** float(power)
    c = 0.5 * (c + c.T)
    peak = c.max()
    if not peak > 0:
        raise DegenerateDataError("enhanced affinity is identically zero")
    return AffinityMatrix(c / peak, mode, r, tuple(notes))


# -- k-means -------------------------------------------------------------------

def _sq_dist(x, centers):
    d = (
        np.einsum("ij,ij->i", x, x)[:, None]
        + np.einsum("ij,ij->i", centers, centers)[None, :]
        - 2.0 * x @ centers.T
    )
    return np.maximum(d, 0.0)


def _kmeans_pp(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dist(x, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[j] = x[idx]
        closest = np.minimum(closest, _sq_dist(x, centers[j:j + 1])[:, 0])
    return centers


def kmeans(x, k, seed=0, restarts=50, max_iter=300, tol=1e-6):
    """Lloyd's k-means with k-means++ seeding; the lowest-inertia restart wins.

    Each restart draws from its own child of ``SeedSequence(seed)`` so results
    depend only on the inputs.  Distance ties go to the lower center index;
    an emptied cluster is re-seeded with the point farthest from its center.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ArgumentError(f"k={k} must lie in [1, N={n}]")
    best = None
    for child in np.random.SeedSequence(seed).spawn(max(1, int(restarts))):
        rng = np.random.default_rng(child)
        centers = _kmeans_pp(x, k, rng)
        for _ in range(max_iter):
            d = _sq_dist(x, centers)
            labels = np.argmin(d, axis=1)
            new = centers.copy()
            counts = np.bincount(labels, minlength=k)
            for j in range(k):
                if counts[j]:
                    new[j] = x[labels == j].mean(axis=0)
                else:
                    far = int(np.argmax(d[np.arange(n), labels]))
                    new[j] = x[far]
                    labels[far] = j
            shift = float(np.max(np.linalg.norm(new - centers, axis=1)))
            centers = new
            if shift <= tol:
                break
        d = _sq_dist(x, centers)
        labels = np.argmin(d, axis=1)
        inertia = float(d[np.arange(n), labels].sum())
        if best is None or inertia < best[0]:
            best = (inertia, labels)
    return best[1], best[0]


# -- spectral clustering ---------------------------------------------------------

def spectral_embedding(C, n_clusters):
    """Row-normalized eigenvectors of the ``n_clusters`` smallest eigenvalues of L_sym."""
    c = np.array(getattr(C, "C", C), dtype=np.float64)
    n = c.shape[0]
    deg = c.sum(axis=1)
    isolated = deg <= 0
    if isolated.any():
        c[isolated, isolated] = 1.0
        deg = c.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    sim = inv_sqrt[:, None] * c * inv_sqrt[None, :]
    sim = 0.5 * (sim + sim.T)
    # smallest eigenvalues of I - sim are the largest of sim
    try:
        if n_clusters == n:
            _, vecs = linalg.eigh(sim)
        else:
            _, vecs = linalg.eigh(sim, subset_by_index=[n - n_clusters, n - 1])
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed on the normalized affinity: {exc}") from exc
    vecs = vecs[:, ::-1]
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    norms = np.linalg.norm(vecs, axis=1)
    norms[norms == 0] = 1.0
    return vecs / norms[:, None]


def spectral_cluster(C, n_clusters, seed=0, restarts=50):
    """Normalized spectral clustering of a symmetric nonnegative affinity."""
    c = np.asarray(getattr(C, "C", C), dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DataError(f"affinity must be square, got shape {c.shape}")
    n = c.shape[0]
    k = int(n_clusters)
    if not 1 <= k <= n:
        raise ArgumentError(f"n_clusters={k} must lie in [1, N={n}]")
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise DataError("affinity must be finite and nonnegative")
    if np.max(np.abs(c - c.T)) > 1e-10 * max(1.0, float(np.max(c))):
        raise DataError("affinity must be symmetric")
    emb = spectral_embedding(c, k)
    labels, inertia = kmeans(emb, k, seed=seed, restarts=restarts)
    return ClusterAssignment(labels.astype(np.int64), k, int(seed), inertia)


# -- maps --------------------------------------------------------------------------

def _color(values):
    values = np.asarray(values, dtype=np.int64)
    extra = len(PALETTE) - 1
    idx = np.where(values > 0, (values - 1) % extra + 1, 0)
    return PALETTE[idx]


def render_label_map(values, coords, shape, path=None):
    """Paint per-sample class values (>= 1) into an RGB image; background black."""
    if coords is None or shape is None:
        raise StateError("rendering a map needs sample coordinates and the scene shape")
    coords = np.asarray(coords, dtype=np.int64)
    img = np.zeros((int(shape[0]), int(shape[1]), 3), dtype=np.uint8)
    img[coords[:, 0], coords[:, 1]] = _color(values)
    if path is not None:
        _save_png(img, path)
    return img


def render_cluster_map(assignment, coords, shape, truth=None, path=None):
    """Render a cluster assignment as an RGB image (and PNG when ``path`` is set).

    With ``truth`` the predicted clusters are first relabeled to their
    optimally matched ground-truth classes, so a perfect clustering renders
    exactly like :func:`render_label_map` of the ground truth.
    """
    labels = np.asarray(getattr(assignment, "labels", assignment), dtype=np.int64)
    if truth is None:
        values = labels + 1
    else:
        from gcsc.metrics import overall_accuracy

        _, matching = overall_accuracy(labels, truth)
        spare = int(np.max(truth)) + 1
        lut = {}
        for p in np.unique(labels):
            if int(p) in matching:
                lut[int(p)] = matching[int(p)]
            else:
                lut[int(p)] = spare
                spare += 1
        values = np.array([lut[int(p)] for p in labels], dtype=np.int64)
    return render_label_map(values, coords, shape, path)


def _save_png(img, path):
    import io

    from PIL import Image

    from gcsc.formats import atomic_write_bytes

    buf = io.BytesIO()
    Image.fromarray(img, mode="RGB").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())
