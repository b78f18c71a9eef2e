import json

import numpy as np
import pytest

from gcsc.config import (
    ExperimentConfig,
    DatasetConfig,
    apply_overrides,
    config_from_dict,
    load_config,
    shipped_configs,
)
from gcsc.errors import ArgumentError, StageError
from gcsc.harness import StageCache, parse_values, run_pipeline, strip_runtime, sweep
from gcsc.metrics import overall_accuracy
from gcsc.synthetic import SyntheticSpec, gen_synthetic, projection_residual_labels

from conftest import write_scene_config


@pytest.fixture
def synth_cfg():
    return load_config("synthetic_egcsc.toml")


def test_shipped_configs_parse(monkeypatch, tmp_path):
    monkeypatch.setenv("GCSC_DATA_DIR", str(tmp_path))
    names = {p.stem for p in shipped_configs()}
    assert {"salinasA_egcsc", "salinasA_ekgcsc", "indianpines_egcsc", "indianpines_ekgcsc",
            "paviaU_egcsc", "paviaU_ekgcsc", "synthetic_egcsc"} <= names
    for p in shipped_configs():
        cfg = load_config(p)
        assert cfg.window == 9 or cfg.dataset.kind == "synthetic"
        if cfg.dataset.kind == "cube":
            assert cfg.dataset.path.startswith(str(tmp_path))
            assert cfg.pcs == 4 and cfg.scale


def test_shipped_crops_and_hyperparameters(monkeypatch, tmp_path):
    monkeypatch.setenv("GCSC_DATA_DIR", str(tmp_path))
    ip = load_config("indianpines_ekgcsc.toml")
    assert ip.dataset.crop_rows == (30, 115) and ip.dataset.crop_cols == (24, 94)
    assert (ip.lam, ip.k, ip.gamma, ip.clusters) == (1e5, 30, 6.0, 4)
    pu = load_config("paviaU_egcsc.toml")
    assert pu.dataset.crop_rows == (150, 350) and (pu.lam, pu.k, pu.clusters) == (1000.0, 20, 8)
    sa = load_config("salinasA_ekgcsc.toml")
    assert (sa.lam, sa.k, sa.gamma, sa.clusters) == (100.0, 30, 0.2, 6)


def test_validation_errors(synth_cfg, tmp_path):
    with pytest.raises(ArgumentError):
        synth_cfg.replace(lam=0.0).validate()
    with pytest.raises(ArgumentError):
        synth_cfg.replace(model="nope").validate()
    with pytest.raises(ArgumentError):
        synth_cfg.replace(clusters=1).validate()
    missing = ExperimentConfig(DatasetConfig(path=str(tmp_path / "x.gcsc"), labels=str(tmp_path / "x.labels")))
    with pytest.raises(FileNotFoundError):
        missing.validate()
    with pytest.raises(ArgumentError):
        config_from_dict({"dataset": {"kind": "cube", "bogus": 1}})


def test_overrides(synth_cfg):
    cfg = apply_overrides(synth_cfg, ["lambda=1000", "k=20", "scale=true"])
    assert (cfg.lam, cfg.k, cfg.scale) == (1000.0, 20, True)
    assert apply_overrides(synth_cfg, ["variance=0.99"]).pcs is None
    with pytest.raises(ArgumentError):
        apply_overrides(synth_cfg, ["nope=1"])
    with pytest.raises(ArgumentError):
        apply_overrides(synth_cfg, ["lambda"])


def test_parse_values():
    assert parse_values("1e-3:1e3:log7") == pytest.approx([1e-3, 1e-2, 0.1, 1, 10, 100, 1000])
    assert parse_values("5:40:5") == [5, 10, 15, 20, 25, 30, 35, 40]
    assert parse_values("1,2,4") == [1, 2, 4]
    with pytest.raises(ArgumentError):
        parse_values("a:b:c")


def test_synthetic_generator():
    spec = SyntheticSpec(n_subspaces=2, ambient_dim=6, subspace_dim=1, points_per_subspace=10,
                         noise_sigma=0.0, seed=3)
    a, b = gen_synthetic(spec), gen_synthetic(spec)
    np.testing.assert_array_equal(a.features, b.features)
    for c in (1, 2):
        assert np.linalg.matrix_rank(a.features[a.labels == c], tol=1e-10) == 1
    with pytest.raises(ArgumentError):
        SyntheticSpec(subspace_dim=30, ambient_dim=30)


def test_synthetic_pipeline_recovers_subspaces(synth_cfg):
    data = gen_synthetic(synth_cfg.dataset.synthetic)
    oracle = projection_residual_labels(data, data.meta["bases"])
    assert overall_accuracy(oracle, data.labels)[0] == 1.0
    res = run_pipeline(synth_cfg, write=False)
    assert res.report["oa"] >= 0.99
    assert res.report["residual_certificate"] <= 1e-8


def test_report_deterministic_and_cache_equivalent(synth_cfg):
    cache = StageCache()
    a = run_pipeline(synth_cfg, write=False, cache=cache)
    b = run_pipeline(synth_cfg, write=False, cache=cache)
    c = run_pipeline(synth_cfg, write=False)
    assert cache.hits >= 3
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_array_equal(a.labels, c.labels)
    dump = lambda r: json.dumps(strip_runtime(r), sort_keys=True, default=str)
    assert dump(a.report) == dump(c.report)


def test_timings_cover_stages(synth_cfg):
    t = run_pipeline(synth_cfg, write=False).timings
    for stage in ("ingest", "preprocess", "graph", "solve", "affinity", "cluster", "metrics"):
        assert t[stage] >= 0
    stages = sum(v for k, v in t.items() if k != "total")
    assert t["total"] >= 0.99 * stages


def test_cube_pipeline_artifacts(tmp_path, rng):
    cfg = load_config(write_scene_config(tmp_path, rng))
    res = run_pipeline(cfg)
    out = tmp_path / "out"
    for name in ("z.gcsm", "c.gcsm", "z.json", "labels.csv", "truth.csv", "map.png",
                 "truth_map.png", "report.json"):
        assert (out / name).exists(), name
    rep = json.loads((out / "report.json").read_text())
    assert rep["n_samples"] == 12 * 13 and rep["n_features"] == 9 * 2
    assert rep["oa"] == 1.0
    assert set(rep) >= {"oa", "nmi", "kappa", "confusion", "matching", "runtime_seconds"}
    assert res.artifacts["report"] == out / "report.json"


def test_cube_ekgcsc_pipeline(tmp_path, rng):
    cfg = load_config(write_scene_config(tmp_path, rng, model='"ekgcsc"', lam=100.0))
    assert run_pipeline(cfg, write=False).report["oa"] == 1.0


def test_k_sweep_table(synth_cfg, tmp_path):
    rows = sweep(synth_cfg, "k", parse_values("5:40:5"), out_dir=tmp_path)
    assert [r["value"] for r in rows] == [5, 10, 15, 20, 25, 30, 35, 40]
    assert all(r["error"] == "" for r in rows)
    assert (tmp_path / "sweep_k.csv").read_text().count("\n") == 9
    assert (tmp_path / "sweep_k.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_pcs_sweep_changes_feature_length(tmp_path, rng):
    cfg = load_config(write_scene_config(tmp_path, rng))
    rows = sweep(cfg, "pcs", [1, 2, 3])
    assert [r["n_features"] for r in rows] == [9, 18, 27]


def test_sweep_records_failures(synth_cfg):
    rows = sweep(synth_cfg, "lambda", [1.0, -1.0])
    assert rows[0]["error"] == "" and rows[1]["error"]
    with pytest.raises(ArgumentError):
        sweep(synth_cfg, "window", [3])


def test_stage_errors_name_the_stage(tmp_path, rng):
    cfg = load_config(write_scene_config(tmp_path, rng, pcs=50))
    with pytest.raises(StageError) as info:
        run_pipeline(cfg, write=False)
    assert info.value.stage == "preprocess"
