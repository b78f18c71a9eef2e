"""Union-of-subspaces data for desk-scale checks."""

from dataclasses import asdict, dataclass

import numpy as np

from gcsc.errors import ArgumentError
from gcsc.ingest import LabeledSamples


@dataclass(frozen=True)
class SyntheticSpec:
    n_subspaces: int = 3
    ambient_dim: int = 30
    subspace_dim: int = 4
    points_per_subspace: int = 100
    noise_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.n_subspaces < 1 or self.points_per_subspace < 1:
            raise ArgumentError("need at least one subspace and one point per subspace")
        if not 1 <= self.subspace_dim < self.ambient_dim:
            raise ArgumentError(
                f"subspace_dim={self.subspace_dim} must be in [1, ambient_dim={self.ambient_dim})"
            )
        if self.noise_sigma < 0:
            raise ArgumentError(f"noise_sigma must be >= 0, got {self.noise_sigma}")

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ArgumentError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**known)

    def to_dict(self):
        return asdict(self)


def gen_synthetic(spec):
    """Draw points from random linear subspaces.

    Each subspace gets an orthonormal basis (QR of a Gaussian matrix); points
    are basis combinations with coefficients uniform on [-1, 1] plus isotropic
    Gaussian noise.  Labels are the subspace index starting at 1.  The bases
    are kept in ``meta["bases"]``.
    """
    rng = np.random.default_rng(spec.seed)
    feats, labels, bases = [], [], []
    for s in range(spec.n_subspaces):
        q, _ = np.linalg.qr(rng.standard_normal((spec.ambient_dim, spec.subspace_dim)))
        coef = rng.uniform(-1.0, 1.0, size=(spec.points_per_subspace, spec.subspace_dim))
        feats.append(coef @ q.T)
        labels.append(np.full(spec.points_per_subspace, s + 1))
        bases.append(q)
    x = np.vstack(feats)
    if spec.noise_sigma > 0:
        x = x + spec.noise_sigma * rng.standard_normal(x.shape)
    return LabeledSamples(
        x, np.concatenate(labels), name="synthetic", meta={"bases": bases, "spec": spec.to_dict()}
    )


def projection_residual_labels(samples, bases):
    """Assign each sample to the basis with the smallest projection residual."""
    x = np.asarray(getattr(samples, "features", samples), dtype=np.float64)
    res = np.stack([np.linalg.norm(x - (x @ q) @ q.T, axis=1) for q in bases], axis=1)
    return np.argmin(res, axis=1) + 1
