"""Closed-form graph convolutional self-representation (EGCSC / EKGCSC).

Samples are stored samples-major (N x m), so the column-major data matrix
``X`` of the model is ``samples.T`` and its Gram matrix ``X^T X`` is
``samples @ samples.T``.  Both models reduce to the same SPD system

    (Abar^T K Abar + lam I) Z = Abar^T K

with ``K`` the linear Gram matrix (EGCSC) or a kernel matrix (EKGCSC).
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from gcsc.errors import ArgumentError, DataError, NumericalError
from gcsc.preprocess import check_samples

MODELS = ("egcsc", "ekgcsc")
KERNELS = ("gaussian", "linear", "polynomial")

RESIDUAL_TOL = 1e-8
SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class KernelDescriptor:
    kind: str = "gaussian"
    gamma: float | None = None
    degree: int = 2
    coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ArgumentError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if self.kind == "gaussian" and (self.gamma is None or not self.gamma > 0):
            raise ArgumentError(f"gaussian kernel needs gamma > 0, got {self.gamma}")
        if self.kind == "polynomial" and int(self.degree) < 1:
            raise ArgumentError(f"polynomial degree must be >= 1, got {self.degree}")

    @classmethod
    def gaussian(cls, gamma):
        return cls("gaussian", gamma=float(gamma))

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def polynomial(cls, degree, coef0=1.0):
        return cls("polynomial", degree=int(degree), coef0=float(coef0))

    def to_dict(self):
        if self.kind == "gaussian":
            return {"kind": "gaussian", "gamma": self.gamma}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "degree": self.degree, "coef0": self.coef0}
        return {"kind": "linear"}


@dataclass(frozen=True)
class CoefficientMatrix:
    """Self-representation coefficients ``Z`` with their solve certificate."""

    Z: np.ndarray
    lam: float
    model: str
    kernel: KernelDescriptor | None
    residual: float
    seconds: float

    def sidecar(self):
        return {
            "model": self.model,
            "lambda": self.lam,
            "kernel": None if self.kernel is None else self.kernel.to_dict(),
            "residual_certificate": self.residual,
            "residual_tolerance": RESIDUAL_TOL,
            "n": int(self.Z.shape[0]),
            "seconds": self.seconds,
        }


def compute_kernel(samples, desc):
    """Kernel matrix ``K[i, j] = kappa(x_i, x_j)`` over the rows of ``samples``."""
    x = check_samples(samples, min_rows=1)
    lin = x @ x.T
    if desc.kind == "linear":
        k = lin
    elif desc.kind == "polynomial":
        k = (lin + desc.coef0) ** desc.degree
    else:
        sq = np.diag(lin).copy()
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * lin, 0.0)
        np.fill_diagonal(d2, 0.0)
        k = np.exp(-desc.gamma * d2)
    k = 0.5 * (k + k.T)
    if not np.all(np.isfinite(k)):
        raise NumericalError(f"{desc.kind} kernel produced non-finite entries")
    return k


def _as_operator(abar, n):
    """Return Abar in the cheapest form for products (CSR when sparse enough)."""
    if sparse.issparse(abar):
        a = sparse.csr_matrix(abar, dtype=np.float64)
    else:
        a = np.asarray(abar, dtype=np.float64)
        if a.ndim == 2 and a.shape == (n, n) and n >= 200 and np.count_nonzero(a) < 0.1 * n * n:
            a = sparse.csr_matrix(a)
    if a.shape != (n, n):
        raise DataError(f"Abar shape {a.shape} does not match N={n}")
    return a


def _system(gram, abar):
    """(M, R) = (Abar^T K Abar, Abar^T K)."""
    n = gram.shape[0]
    a = _as_operator(abar, n)
    rhs = np.asarray(a.T @ gram)
    lhs = np.asarray(a.T @ rhs.T).T if sparse.issparse(a) else rhs @ a
    lhs = 0.5 * (lhs + lhs.T)
    return lhs, rhs


def _relative_residual(lhs, rhs, z, lam):
    res = lhs @ z + lam * z - rhs
    return float(np.linalg.norm(res) / max(1.0, np.linalg.norm(rhs)))


def _solve(gram, abar, lam, model, kernel):
    lam = float(lam)
    if not lam > 0 or not np.isfinite(lam):
        raise ArgumentError(f"lambda must be a positive finite number, got {lam}")
    t0 = time.perf_counter()
    lhs, rhs = _system(gram, abar)
    system = lhs + lam * np.eye(lhs.shape[0])
    try:
        factor = linalg.cho_factor(system, lower=True, check_finite=True)
        z = linalg.cho_solve(factor, rhs, check_finite=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"Cholesky solve failed ({exc}); condition estimate {_condition(system):.3e}"
        ) from exc
    if not np.all(np.isfinite(z)):
        raise NumericalError(f"solution is non-finite; condition estimate {_condition(system):.3e}")
    residual = _relative_residual(lhs, rhs, z, lam)
    return CoefficientMatrix(z, lam, model, kernel, residual, time.perf_counter() - t0)


def _condition(system):
    try:
        ev = linalg.eigvalsh(system)
    except (linalg.LinAlgError, ValueError):
        return float("inf")
    lo = ev.min()
    return float("inf") if lo <= 0 else float(ev.max() / lo)


def egcsc_solve(samples, abar, lam):
    """Closed-form EGCSC coefficients for samples-major ``samples`` (N x m).

    Solves ``(Abar^T G Abar + lam I) Z = Abar^T G`` with ``G = X^T X`` by a
    Cholesky factorization.  No zero-diagonal constraint is imposed.
    """
    x = check_samples(samples)
    return _solve(x @ x.T, abar, lam, "egcsc", None)


def ekgcsc_solve(K, abar, lam, kernel=None):
    """Closed-form EKGCSC coefficients from a precomputed kernel matrix.

    ``K`` must be symmetric (to 1e-8 relative) and positive semidefinite.
    """
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ArgumentError(f"kernel matrix must be square, got shape {K.shape}")
    asym = np.max(np.abs(K - K.T)) if K.size else 0.0
    if asym > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(K)))):
        raise ArgumentError(f"kernel matrix is not symmetric (max |K - K^T| = {asym:.3e})")
    return _solve(0.5 * (K + K.T), abar, lam, "ekgcsc", kernel)


def _gram_for(model, data):
    if model == "egcsc":
        x = check_samples(data)
        return x @ x.T
    if model == "ekgcsc":
        return np.asarray(data, dtype=np.float64)
    raise ArgumentError(f"unknown model {model!r}; expected one of {MODELS}")


def _check_shapes(gram, abar, z):
    n = gram.shape[0]
    if np.shape(abar) != (n, n) or np.shape(z) != (n, n):
        raise DataError(f"shape mismatch: Gram {gram.shape}, Abar {np.shape(abar)}, Z {np.shape(z)}")


def objective_value(model, data, abar, Z, lam):
    """Objective at ``Z``.

    ``egcsc``: ``0.5 ||X Abar Z - X||_F^2 + lam/2 ||Z||_F^2`` with ``data`` the
    samples.  ``ekgcsc``: the trace form
    ``0.5 tr(Z^T Abar^T K Abar Z - 2 K Abar Z + K + lam Z^T Z)`` with ``data``
    the kernel matrix.
    """
    lam = float(lam)
    z = np.asarray(Z, dtype=np.float64)
    a = abar.toarray() if sparse.issparse(abar) else np.asarray(abar, dtype=np.float64)
    if model == "egcsc":
        x = check_samples(data).T
        _check_shapes(np.empty((x.shape[1], x.shape[1])), a, z)
        resid = x @ a @ z - x
        return 0.5 * float(np.sum(resid * resid)) + 0.5 * lam * float(np.sum(z * z))
    k = _gram_for(model, data)
    _check_shapes(k, a, z)
    az = a @ z
    quad = np.sum(az * (k @ az))
    cross = np.trace(k @ az)
    return 0.5 * float(quad - 2.0 * cross + np.trace(k) + lam * np.sum(z * z))


def gradient(model, data, abar, Z, lam):
    """Analytic gradient ``Abar^T K Abar Z - Abar^T K + lam Z``."""
    k = _gram_for(model, data)
    a = abar.toarray() if sparse.issparse(abar) else np.asarray(abar, dtype=np.float64)
    z = np.asarray(Z, dtype=np.float64)
    _check_shapes(k, a, z)
    return a.T @ k @ (a @ z) - a.T @ k + float(lam) * z


def gradient_residual(model, data, abar, Z, lam, relative=False):
    """Frobenius norm of the gradient at ``Z``.

    With ``relative=True`` the norm is divided by ``max(1, ||Abar^T K||_F)``,
    the scale used by the solve certificate.
    """
    g = float(np.linalg.norm(gradient(model, data, abar, Z, lam)))
    if not relative:
        return g
    k = _gram_for(model, data)
    a = abar.toarray() if sparse.issparse(abar) else np.asarray(abar, dtype=np.float64)
    return g / max(1.0, float(np.linalg.norm(a.T @ k)))
