"""kNN graphs and the renormalized adjacency used for graph convolution."""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from gcsc.errors import ArgumentError, DataError
from gcsc.preprocess import check_samples

SYMMETRIZATIONS = ("or", "and", "none")


@dataclass(frozen=True)
class KnnGraph:
    """Directed kNN relation plus the normalized propagation matrix.

    Attributes
    ----------
    neighbors : (N, k) int array
        Row i lists the neighbours of sample i, nearest first.
    adjacency : scipy.sparse.csr_matrix
        Directed binary A with ``A[i, j] = 1`` iff j is among i's neighbours.
    normalized : (N, N) ndarray
        ``D^-1/2 (I + A_sym) D^-1/2`` where ``A_sym`` depends on ``sym``.
    """

    neighbors: np.ndarray
    adjacency: sparse.csr_matrix
    normalized: np.ndarray
    k: int
    sym: str

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    def symmetric_adjacency(self):
        return symmetrize(self.adjacency, self.sym)

    def edges(self):
        """Directed edge list as an (E, 2) array ordered by source then rank."""
        n, k = self.neighbors.shape
        return np.stack([np.repeat(np.arange(n), k), self.neighbors.ravel()], axis=1)


def _sq_norms(x):
    return np.einsum("ij,ij->i", x, x)


def nearest_neighbors(samples, k):
    """Indices of the ``k`` nearest samples to each sample, self excluded.

    Candidates are screened with the expanded ``|x|^2 + |y|^2 - 2 x.y`` form
    and then ranked on exactly recomputed squared distances, ties going to
    the lower index.
    """
    x = check_samples(samples)
    n = x.shape[0]
    k = int(k)
    if not 1 <= k <= n - 1:
        raise ArgumentError(f"k={k} must lie in [1, N-1={n - 1}]")
    x = x - x.mean(axis=0)
    sq = _sq_norms(x)
    scale = max(float(sq.max()), 1e-300)
    out = np.empty((n, k), dtype=np.int64)
    block = max(1, min(n, 2 ** 22 // max(n, 1)))
    for start in range(0, n, block):
        stop = min(n, start + block)
        approx = sq[start:stop, None] + sq[None, :] - 2.0 * (x[start:stop] @ x.T)
        rows = np.arange(stop - start)
        approx[rows, rows + start] = np.inf
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
        # slack covers round-off of the expanded form
        slack = 1e-9 * scale + 1e-12 * np.abs(kth)
        for r in range(stop - start):
            i = start + r
            cand = np.flatnonzero(approx[r] <= kth[r] + slack[r])
            cand = cand[cand != i]
            diff = x[cand] - x[i]
            exact = _sq_norms(diff)
            order = np.lexsort((cand, exact))
            out[i] = cand[order[:k]]
    return out


def knn_adjacency(neighbors, n):
    k = neighbors.shape[1]
    rows = np.repeat(np.arange(n), k)
    data = np.ones(rows.size, dtype=np.float64)
    adj = sparse.csr_matrix((data, (rows, neighbors.ravel())), shape=(n, n))
    adj.sort_indices()
    return adj


def symmetrize(adjacency, sym="or"):
    if sym not in SYMMETRIZATIONS:
        raise ArgumentError(f"unknown symmetrization {sym!r}; expected one of {SYMMETRIZATIONS}")
    a = sparse.csr_matrix(adjacency)
    if sym == "or":
        a = a.maximum(a.T)
    elif sym == "and":
        a = a.minimum(a.T)
    return sparse.csr_matrix(a)


def normalize_adjacency(adjacency):
    """Renormalize a binary adjacency: ``D^-1/2 (I + A) D^-1/2``.

    ``D`` holds the row sums of ``I + A``.  The input is used as given; pass a
    symmetric matrix to get a symmetric result.  Accepts dense or sparse input
    and returns a dense array.
    """
    a = adjacency.toarray() if sparse.issparse(adjacency) else np.array(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ArgumentError(f"adjacency must be square, got shape {a.shape}")
    if np.any(np.diag(a) != 0):
        raise ArgumentError("adjacency must have a zero diagonal (self-loops are added here)")
    if not np.all((a == 0) | (a == 1)):
        raise ArgumentError("adjacency must be binary")
    a = a.astype(np.float64)
    a[np.diag_indices_from(a)] = 1.0
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def build_knn(samples, k, metric="euclidean", sym="or"):
    """Build the Euclidean kNN graph and its renormalized adjacency.

    Parameters
    ----------
    samples : (N, m) array
    k : int
        Neighbours per sample, ``1 <= k <= N - 1``.
    sym : {"or", "and", "none"}
        How the directed relation is symmetrized before normalization.
    """
    if metric != "euclidean":
        raise ArgumentError(f"unsupported metric {metric!r}")
    if sym not in SYMMETRIZATIONS:
        raise ArgumentError(f"unknown symmetrization {sym!r}; expected one of {SYMMETRIZATIONS}")
    x = check_samples(samples)
    if k >= x.shape[0]:
        raise ArgumentError(f"k={k} must be smaller than N={x.shape[0]}")
    nbrs = nearest_neighbors(x, k)
    adj = knn_adjacency(nbrs, x.shape[0])
    abar = normalize_adjacency(symmetrize(adj, sym))
    return KnnGraph(nbrs, adj, abar, int(k), sym)


def graph_embed(samples, abar):
    """Graph-smoothed samples.

    The column-major product ``X Abar`` becomes ``Abar.T @ samples`` for the
    samples-major layout used here.
    """
    x = np.asarray(samples, dtype=np.float64)
    abar = abar.toarray() if sparse.issparse(abar) else np.asarray(abar, dtype=np.float64)
    if abar.ndim != 2 or abar.shape != (x.shape[0], x.shape[0]):
        raise DataError(f"Abar shape {abar.shape} does not match {x.shape[0]} samples")
    return abar.T @ x
