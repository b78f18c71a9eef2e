import warnings

import numpy as np
import pytest
from scipy.linalg import block_diag

from gcsc.cluster import (
    PALETTE,
    build_affinity,
    kmeans,
    render_cluster_map,
    render_label_map,
    spectral_cluster,
)
from gcsc.errors import ArgumentError, DegenerateDataError, StateError
from gcsc.metrics import overall_accuracy

from oracles import edsc_affinity_full_svd


def test_symmetrize_identity():
    np.testing.assert_array_equal(build_affinity(np.eye(5), 2, mode="symmetrize").C, np.eye(5))


def test_symmetrize_formula(rng):
    z = rng.standard_normal((6, 6))
    np.testing.assert_array_equal(build_affinity(z, 2, "symmetrize").C, 0.5 * (np.abs(z) + np.abs(z).T))


def test_edsc_block_diagonal_is_exact(rng):
    z = block_diag(rng.random((4, 4)) + 0.1, rng.random((5, 5)) + 0.1)
    c = build_affinity(z, 2, "edsc", d_per_cluster=2, power=4).C
    assert np.all(c[:4, 4:] == 0) and np.all(c[4:, :4] == 0)
    assert np.all(c[:4, :4] > 0) and np.all(c[4:, 4:] > 0)


def test_edsc_matches_full_svd_oracle(rng):
    z = rng.standard_normal((30, 6)) @ rng.standard_normal((6, 30))
    c = build_affinity(z, 3, "edsc", d_per_cluster=2, power=8).C
    np.testing.assert_allclose(c, edsc_affinity_full_svd(z, 3, 2, 8), atol=1e-8)


def test_edsc_exactly_symmetric_and_scaled(rng):
    c = build_affinity(rng.standard_normal((20, 20)), 2, "edsc", d_per_cluster=3).C
    np.testing.assert_array_equal(c, c.T)
    assert c.max() == 1.0 and c.min() >= 0


def test_edsc_invariant_to_singular_vector_signs(rng):
    z = rng.standard_normal((15, 15))
    u, s, vt = np.linalg.svd(z)
    flips = np.where(rng.random(15) < 0.5, -1.0, 1.0)
    z2 = (u * flips) @ np.diag(s) @ (vt * flips[:, None])
    np.testing.assert_allclose(build_affinity(z, 2, d_per_cluster=3).C,
                               build_affinity(z2, 2, d_per_cluster=3).C, atol=1e-10)


def test_rank_clamp_warns(rng):
    z = rng.standard_normal((8, 8))
    with pytest.warns(RuntimeWarning):
        aff = build_affinity(z, 2, d_per_cluster=10)
    assert aff.rank == 8 and aff.notes


def test_affinity_errors():
    with pytest.raises(DegenerateDataError):
        build_affinity(np.zeros((4, 4)), 2)
    with pytest.raises(ArgumentError):
        build_affinity(np.eye(4), 1)


def test_two_blocks_of_ones():
    c = block_diag(np.ones((3, 3)), np.ones((3, 3)))
    labels = spectral_cluster(c, 2, seed=0, restarts=5).labels
    assert len(set(labels[:3])) == 1 and len(set(labels[3:])) == 1 and labels[0] != labels[3]


def test_identity_each_point_own_cluster():
    labels = spectral_cluster(np.eye(6), 6, seed=1, restarts=3).labels
    assert sorted(labels) == list(range(6))


def test_gaussian_blobs(rng):
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    truth = np.repeat([1, 2, 3], 20)
    x = centers[truth - 1] + rng.standard_normal((60, 2))
    # oracle: nearest true centre (blobs are >= 10 sigma apart)
    oracle = np.argmin(((x[:, None, :] - centers[None]) ** 2).sum(-1), axis=1) + 1
    assert overall_accuracy(oracle, truth)[0] == 1.0
    d2 = ((x[:, None, :] - x[None]) ** 2).sum(-1)
    c = np.exp(-d2 / 2.0)
    labels = spectral_cluster(c, 3, seed=0, restarts=10).labels
    assert overall_accuracy(labels, truth)[0] == 1.0


def test_scale_invariance_and_determinism(rng):
    x = np.vstack([rng.standard_normal((15, 2)), rng.standard_normal((15, 2)) + 4])
    c = np.exp(-((x[:, None] - x[None]) ** 2).sum(-1))
    a = spectral_cluster(c, 2, seed=3, restarts=5).labels
    np.testing.assert_array_equal(a, spectral_cluster(3.7 * c, 2, seed=3, restarts=5).labels)
    np.testing.assert_array_equal(a, spectral_cluster(c, 2, seed=3, restarts=5).labels)


def test_zero_degree_rows_are_handled():
    c = block_diag(np.ones((3, 3)), np.zeros((1, 1)), np.ones((2, 2)))
    labels = spectral_cluster(c, 3, seed=0, restarts=5).labels
    assert len(set(labels)) == 3


def test_cluster_errors():
    with pytest.raises(ArgumentError):
        spectral_cluster(np.eye(3), 4)


def test_kmeans_ties_and_restarts():
    x = np.array([[0.0], [0.1], [5.0], [5.1]])
    labels, inertia = kmeans(x, 2, seed=0, restarts=4)
    assert labels[0] == labels[1] != labels[2] == labels[3]
    assert inertia == pytest.approx(0.01)


def test_checkerboard_map():
    coords = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    img = render_cluster_map(np.array([0, 1, 1, 0]), coords, (2, 2))
    assert (img[0, 0] == img[1, 1]).all() and (img[0, 1] == img[1, 0]).all()
    assert not (img[0, 0] == img[0, 1]).all()
    assert len({tuple(p) for p in img.reshape(-1, 3)}) == 2


def test_matched_map_equals_truth_map(tmp_path, rng):
    coords = np.array([(r, c) for r in range(4) for c in range(5) if (r + c) % 3])
    truth = rng.integers(1, 4, len(coords))
    perm = {1: 2, 2: 0, 3: 1}
    pred = np.array([perm[t] for t in truth])
    a = render_cluster_map(pred, coords, (4, 5), truth=truth, path=tmp_path / "m.png")
    b = render_label_map(truth, coords, (4, 5))
    np.testing.assert_array_equal(a, b)
    assert (a[0, 0] == PALETTE[0]).all()  # background stays black
    from PIL import Image

    np.testing.assert_array_equal(np.asarray(Image.open(tmp_path / "m.png")), a)


def test_map_needs_coords():
    with pytest.raises(StateError):
        render_cluster_map(np.zeros(3, dtype=int), None, (1, 3))
