"""End-to-end runs: ingest -> preprocess -> graph -> solve -> cluster -> metrics."""

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from gcsc import formats
from gcsc.cluster import build_affinity, render_cluster_map, render_label_map, spectral_cluster
from gcsc.errors import ArgumentError, GcscError, StageError
from gcsc.graph import build_knn
from gcsc.ingest import LabeledSamples, crop_subscene, load_cube, to_labeled_samples
from gcsc.metrics import evaluate
from gcsc.preprocess import extract_patches, fit_pca, minmax_scale, transform_pca
from gcsc.solver import KernelDescriptor, compute_kernel, egcsc_solve, ekgcsc_solve
from gcsc.synthetic import gen_synthetic

log = logging.getLogger(__name__)

SWEEP_PARAMS = {"lambda": "lam", "k": "k", "gamma": "gamma", "pcs": "pcs"}
RUNTIME_KEYS = ("runtime_seconds", "timings")


@dataclass
class PipelineResult:
    report: dict
    labels: np.ndarray
    samples: LabeledSamples
    Z: np.ndarray
    C: np.ndarray
    timings: dict
    artifacts: dict = field(default_factory=dict)


class StageCache:
    """In-memory memo of stage outputs keyed by the config fields they depend on."""

    def __init__(self):
        self._store = {}
        self.hits = 0

    def get(self, key, compute):
        if key in self._store:
            self.hits += 1
            return self._store[key]
        value = compute()
        self._store[key] = value
        return value


def _key(*parts):
    return json.dumps(parts, sort_keys=True, default=str)


class _Stages:
    def __init__(self):
        self.timings = {}

    def run(self, name, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0
        return out


def _ingest(cfg):
    ds = cfg.dataset
    if ds.kind == "synthetic":
        return gen_synthetic(ds.synthetic)
    if ds.kind == "samples":
        x = formats.read_matrix(ds.path)
        labels, coords = formats.read_label_vector(ds.labels)
        return LabeledSamples(x, labels, coords, name=ds.name or Path(ds.path).stem)
    cube = load_cube(ds.path, ds.format, ds.labels, ds.key, ds.label_key, name=ds.name or None)
    if ds.crop_rows is not None or ds.crop_cols is not None:
        rows = [v - 1 for v in ds.crop_rows] if ds.crop_rows else (0, cube.rows - 1)
        cols = [v - 1 for v in ds.crop_cols] if ds.crop_cols else (0, cube.cols - 1)
        cube = crop_subscene(cube, rows, cols)
    return cube


def _preprocess(cfg, raw):
    if cfg.dataset.kind != "cube":
        return minmax_scale(raw) if cfg.scale else raw
    labeled = to_labeled_samples(raw)
    pca = fit_pca(labeled.features, n_components=cfg.pcs, variance=cfg.variance)
    reduced = transform_pca(pca, raw)
    samples = extract_patches(reduced, cfg.window)
    samples = LabeledSamples(
        samples.features, samples.labels, samples.coords, samples.shape, samples.name,
        meta={"pcs": pca.n_components, "explained_variance": float(pca.explained_variance_ratio.sum())},
    )
    return minmax_scale(samples) if cfg.scale else samples


def _graph(cfg, samples):
    if cfg.identity_graph:
        return np.eye(samples.n_samples)
    return build_knn(samples.features, cfg.k, sym=cfg.sym).normalized


def _kernel_desc(cfg):
    if cfg.kernel == "gaussian":
        return KernelDescriptor.gaussian(cfg.gamma)
    if cfg.kernel == "polynomial":
        return KernelDescriptor.polynomial(cfg.degree, cfg.coef0)
    return KernelDescriptor.linear()


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def strip_runtime(report):
    """Copy of a report without the wall-clock fields."""
    return {k: v for k, v in report.items() if k not in RUNTIME_KEYS}


def run_pipeline(cfg, out_dir=None, cache=None, write=True):
    """Run one experiment and persist its artifacts.

    Parameters
    ----------
    cfg : ExperimentConfig
    out_dir : path, optional
        Defaults to ``cfg.output_dir``; nothing is written when both are
        unset or ``write`` is false.
    cache : StageCache, optional
        Shares ingest / preprocessing / graph / kernel results between runs.

    Returns
    -------
    PipelineResult
        ``report`` holds oa / nmi / kappa / confusion / matching plus stage
        timings; the same dict is written to ``report.json``.
    """
    cfg.validate()
    cache = cache if cache is not None else StageCache()
    st = _Stages()
    t_start = time.perf_counter()

    ds_key = asdict(cfg.dataset)
    raw = st.run("ingest", lambda: cache.get(_key("ingest", ds_key), lambda: _ingest(cfg)))
    pre_key = (ds_key, cfg.pcs, cfg.variance, cfg.window, cfg.scale)
    samples = st.run("preprocess", lambda: cache.get(_key("pre", pre_key), lambda: _preprocess(cfg, raw)))
    graph_key = pre_key + (cfg.identity_graph, cfg.k if not cfg.identity_graph else None, cfg.sym)
    abar = st.run("graph", lambda: cache.get(_key("graph", graph_key), lambda: _graph(cfg, samples)))

    if cfg.model == "ekgcsc":
        desc = _kernel_desc(cfg)
        kern = st.run(
            "kernel",
            lambda: cache.get(_key("kernel", pre_key, desc.to_dict()), lambda: compute_kernel(samples.features, desc)),
        )
        coef = st.run("solve", lambda: ekgcsc_solve(kern, abar, cfg.lam, kernel=desc))
    else:
        coef = st.run("solve", lambda: egcsc_solve(samples.features, abar, cfg.lam))

    aff = st.run(
        "affinity",
        lambda: build_affinity(coef.Z, cfg.clusters, mode=cfg.affinity, d_per_cluster=cfg.svd_d, power=cfg.power),
    )
    assign = st.run("cluster", lambda: spectral_cluster(aff.C, cfg.clusters, seed=cfg.seed, restarts=cfg.restarts))
    total = time.perf_counter() - t_start
    rep = st.run("metrics", lambda: evaluate(assign.labels, samples.labels, runtime_seconds=total))
    total = time.perf_counter() - t_start

    report = rep.to_dict()
    report.update(
        {
            "name": cfg.name,
            "n_samples": samples.n_samples,
            "n_features": samples.n_features,
            "residual_certificate": coef.residual,
            "affinity_rank": aff.rank,
            "affinity_notes": list(aff.notes),
            "config": cfg.to_dict(),
            "runtime_seconds": total,
            "timings": dict(st.timings, total=total),
        }
    )
    if "pcs" in samples.meta:
        report["pcs_used"] = samples.meta["pcs"]
        report["explained_variance"] = samples.meta["explained_variance"]

    result = PipelineResult(report, assign.labels, samples, coef.Z, aff.C, report["timings"])
    out_dir = out_dir if out_dir is not None else cfg.output_dir
    if write and out_dir is not None:
        result.artifacts = _write_artifacts(Path(out_dir), cfg, result, coef)
    log.info("%s: OA=%.4f NMI=%.4f Kappa=%.4f (%.1fs)", cfg.name, rep.oa, rep.nmi, rep.kappa, total)
    return result


def _write_artifacts(out, cfg, result, coef):
    out.mkdir(parents=True, exist_ok=True)
    art = {}
    s = result.samples
    if cfg.save_matrices:
        formats.write_matrix(out / "z.gcsm", result.Z)
        formats.write_matrix(out / "c.gcsm", result.C)
        formats.atomic_write_text(out / "z.json", _dumps(coef.sidecar()))
        art.update(z=out / "z.gcsm", c=out / "c.gcsm", z_meta=out / "z.json")
    formats.write_label_vector(out / "labels.csv", result.labels, s.coords)
    formats.write_label_vector(out / "truth.csv", s.labels, s.coords)
    art.update(labels=out / "labels.csv", truth=out / "truth.csv")
    if s.coords is not None and s.shape is not None:
        render_cluster_map(result.labels, s.coords, s.shape, truth=s.labels, path=out / "map.png")
        render_label_map(s.labels, s.coords, s.shape, path=out / "truth_map.png")
        art.update(map=out / "map.png", truth_map=out / "truth_map.png")
    formats.atomic_write_text(out / "report.json", _dumps(result.report))
    art["report"] = out / "report.json"
    return art


# -- sweeps --------------------------------------------------------------------------

def parse_values(text):
    """Parse a sweep grid.

    ``"1e-3:1e3:log7"`` gives 7 log-spaced values, ``"5:40:5"`` a linear range
    with step 5 (end inclusive), and ``"1,2,4"`` an explicit list.
    """
    text = text.strip()
    try:
        if ":" in text:
            lo, hi, step = text.split(":")
            lo, hi = float(lo), float(hi)
            if step.startswith("log"):
                n = int(step[3:])
                return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), n)]
            step = float(step)
            if step <= 0:
                raise ValueError("step must be positive")
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return [lo + i * step for i in range(n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ArgumentError(f"cannot parse sweep values {text!r}: {exc}") from exc


def sweep(cfg, param, values, out_dir=None, cache=None, write_runs=False):
    """Run the pipeline once per value of ``param``; returns a list of row dicts.

    Failures are recorded in the row's ``error`` field and the sweep moves on.
    Preprocessing (and the graph / kernel where the parameter allows) is
    computed once and shared.  With ``out_dir`` a CSV table and a plot are
    written there.
    """
    if param not in SWEEP_PARAMS:
        raise ArgumentError(f"cannot sweep {param!r}; choose from {sorted(SWEEP_PARAMS)}")
    values = list(values)
    if not values:
        raise ArgumentError("sweep needs at least one value")
    field_name = SWEEP_PARAMS[param]
    cache = cache if cache is not None else StageCache()
    rows = []
    for v in values:
        conv = int(round(v)) if field_name in ("k", "pcs") else float(v)
        changes = {field_name: conv}
        if field_name == "pcs":
            changes["variance"] = None
        run_cfg = cfg.replace(**changes)
        run_dir = None
        if write_runs and out_dir is not None:
            run_dir = Path(out_dir) / f"{param}_{conv:g}"
        try:
            res = run_pipeline(run_cfg, out_dir=run_dir, cache=cache, write=run_dir is not None)
            r = res.report
            rows.append({"value": conv, "oa": r["oa"], "nmi": r["nmi"], "kappa": r["kappa"],
                         "n_features": r["n_features"], "seconds": r["runtime_seconds"], "error": ""})
        except GcscError as exc:
            log.warning("sweep %s=%s failed: %s", param, conv, exc)
            rows.append({"value": conv, "oa": float("nan"), "nmi": float("nan"), "kappa": float("nan"),
                         "n_features": 0, "seconds": float("nan"), "error": str(exc)})
    if out_dir is not None:
        write_sweep(rows, param, Path(out_dir))
    return rows


def write_sweep(rows, param, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    cols = ["value", "oa", "nmi", "kappa", "n_features", "seconds", "error"]
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    csv_path = out_dir / f"sweep_{param}.csv"
    formats.atomic_write_text(csv_path, buf.getvalue())
    _plot_sweep(rows, param, out_dir / f"sweep_{param}.png")
    return csv_path


def _plot_sweep(rows, param, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [r["value"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for metric in ("oa", "nmi", "kappa"):
        ax.plot(xs, [r[metric] for r in rows], marker="o", label=metric.upper())
    if param in ("lambda", "gamma") and min(xs) > 0:
        ax.set_xscale("log")
    ax.set_xlabel(param)
    ax.set_ylim(0, 1.02)
    ax.legend()
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=100)
    plt.close(fig)
    formats.atomic_write_bytes(path, buf.getvalue())
