import os
from pathlib import Path

import numpy as np
import pytest

from gcsc.graph import build_knn


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(rng, n, m, k, sym="or"):
    """Samples (N x m) in [0, 1) and their renormalized kNN adjacency."""
    x = rng.random((n, m))
    return x, build_knn(x, k, sym=sym).normalized


@pytest.fixture
def data_dir():
    env = os.environ.get("GCSC_DATA_DIR")
    base = Path(env) if env else Path(__file__).resolve().parents[1] / "data"
    return base


def make_scene(rng, rows=12, cols=14, bands=20, noise=0.02):
    """Two spectrally distinct regions (left / right) with a background column."""
    from gcsc.ingest import HsiCube

    sig = rng.random((2, bands))
    labels = np.ones((rows, cols), dtype=np.int32)
    labels[:, cols // 2:] = 2
    labels[:, cols // 2 - 1] = 0
    data = sig[np.clip(labels, 1, 2) - 1] + noise * rng.standard_normal((rows, cols, bands))
    return HsiCube(data, labels, "toy")


def write_scene_config(tmp_path, rng, **overrides):
    """Save a toy scene and an experiment TOML pointing at it."""
    from gcsc.ingest import save_cube

    save_cube(make_scene(rng), tmp_path / "toy.gcsc")
    settings = {"pcs": 2, "window": 3, "k": 5, "model": '"egcsc"', "lam": 100.0,
                "clusters": 2, "svd_d": 3, "power": 4, "restarts": 5}
    settings.update(overrides)
    text = f"""name = "toy"

[dataset]
kind = "cube"
path = "toy.gcsc"
labels = "toy.labels"
format = "raw-bin"

[preprocess]
pcs = {settings['pcs']}
window = {settings['window']}
scale = true

[graph]
k = {settings['k']}

[model]
name = {settings['model']}
lambda = {settings['lam']}
gamma = 1.0

[cluster]
clusters = {settings['clusters']}
svd_d = {settings['svd_d']}
power = {settings['power']}
seed = 0
restarts = {settings['restarts']}

[output]
dir = "out"
"""
    path = tmp_path / "toy.toml"
    path.write_text(text)
    return path


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
