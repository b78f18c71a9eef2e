"""Experiment configuration loaded from TOML or JSON."""

import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from gcsc.errors import ArgumentError
from gcsc.synthetic import SyntheticSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SHIPPED_CONFIGS = Path(__file__).with_name("configs")
DATA_DIR_ENV = "GCSC_DATA_DIR"


@dataclass(frozen=True)
class DatasetConfig:
    """Where the data comes from.

    ``kind="cube"`` reads a hyperspectral scene (``crop_rows`` / ``crop_cols``
    are 1-based inclusive pixel numbers), ``kind="samples"`` a GCSM matrix
    plus a label CSV, ``kind="synthetic"`` draws from ``synthetic``.
    """

    kind: str = "cube"
    name: str = ""
    path: str | None = None
    format: str = "raw-bin"
    labels: str | None = None
    key: str | None = None
    label_key: str | None = None
    crop_rows: tuple | None = None
    crop_cols: tuple | None = None
    synthetic: SyntheticSpec | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    name: str = "experiment"
    pcs: int | None = 4
    variance: float | None = None
    window: int = 9
    scale: bool = True
    model: str = "ekgcsc"
    lam: float = 100.0
    k: int = 30
    sym: str = "or"
    identity_graph: bool = False
    kernel: str = "gaussian"
    gamma: float | None = 0.2
    degree: int = 2
    coef0: float = 1.0
    clusters: int = 2
    affinity: str = "edsc"
    svd_d: int = 10
    power: float = 8.0
    seed: int = 42
    restarts: int = 50
    output_dir: str | None = None
    save_matrices: bool = True
    extra: dict = field(default_factory=dict, compare=False)

    def validate(self):
        from gcsc.cluster import AFFINITY_MODES
        from gcsc.graph import SYMMETRIZATIONS
        from gcsc.solver import KERNELS, MODELS

        ds = self.dataset
        if ds.kind not in ("cube", "samples", "synthetic"):
            raise ArgumentError(f"unknown dataset kind {ds.kind!r}")
        if ds.kind == "synthetic":
            if ds.synthetic is None:
                raise ArgumentError("synthetic dataset needs a [dataset.synthetic] table")
        else:
            for p in (ds.path, ds.labels):
                if p is None:
                    raise ArgumentError(f"dataset kind {ds.kind!r} needs both path and labels")
                if not Path(p).exists():
                    raise FileNotFoundError(f"dataset file not found: {p}")
        if not self.lam > 0:
            raise ArgumentError(f"lambda must be > 0, got {self.lam}")
        if not self.identity_graph and self.k < 1:
            raise ArgumentError(f"k must be >= 1, got {self.k}")
        if ds.kind == "cube" and (self.window < 1 or self.window % 2 == 0):
            raise ArgumentError(f"window must be a positive odd integer, got {self.window}")
        if ds.kind == "cube" and (self.pcs is None) == (self.variance is None):
            raise ArgumentError("set exactly one of pcs or variance")
        if self.model not in MODELS:
            raise ArgumentError(f"unknown model {self.model!r}")
        if self.model == "ekgcsc" and self.kernel not in KERNELS:
            raise ArgumentError(f"unknown kernel {self.kernel!r}")
        if self.sym not in SYMMETRIZATIONS:
            raise ArgumentError(f"unknown symmetrization {self.sym!r}")
        if self.affinity not in AFFINITY_MODES:
            raise ArgumentError(f"unknown affinity {self.affinity!r}")
        if self.clusters < 2:
            raise ArgumentError(f"clusters must be >= 2, got {self.clusters}")
        return self

    def replace(self, **changes):
        dataset_changes = {k[len("dataset."):]: changes.pop(k) for k in list(changes) if k.startswith("dataset.")}
        cfg = dataclasses.replace(self, **changes)
        if dataset_changes:
            cfg = dataclasses.replace(cfg, dataset=dataclasses.replace(cfg.dataset, **dataset_changes))
        return cfg

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("extra")
        return d


# flat override names accepted on the command line / in sweeps
OVERRIDE_FIELDS = {
    "lambda": ("lam", float),
    "lam": ("lam", float),
    "k": ("k", int),
    "gamma": ("gamma", float),
    "pcs": ("pcs", int),
    "variance": ("variance", float),
    "window": ("window", int),
    "seed": ("seed", int),
    "restarts": ("restarts", int),
    "clusters": ("clusters", int),
    "model": ("model", str),
    "kernel": ("kernel", str),
    "sym": ("sym", str),
    "knn_sym": ("sym", str),
    "affinity": ("affinity", str),
    "svd_d": ("svd_d", int),
    "power": ("power", float),
    "output_dir": ("output_dir", str),
    "scale": ("scale", lambda v: str(v).lower() in ("1", "true", "yes")),
    "identity_graph": ("identity_graph", lambda v: str(v).lower() in ("1", "true", "yes")),
}


def apply_overrides(cfg, pairs):
    """Apply ``["lambda=1000", "k=20"]``-style overrides."""
    changes = {}
    for pair in pairs:
        if "=" not in pair:
            raise ArgumentError(f"override must be key=value, got {pair!r}")
        key, value = (s.strip() for s in pair.split("=", 1))
        if key not in OVERRIDE_FIELDS:
            raise ArgumentError(f"unknown override {key!r}; choose from {sorted(OVERRIDE_FIELDS)}")
        name, conv = OVERRIDE_FIELDS[key]
        changes[name] = conv(value)
    if "pcs" in changes:
        changes.setdefault("variance", None)
    elif "variance" in changes:
        changes["pcs"] = None
    return cfg.replace(**changes)


def _resolve(path, base):
    if path is None:
        return None
    p = Path(os.path.expanduser(str(path)))
    return str(p if p.is_absolute() else (base / p))


def config_from_dict(d, base_dir="."):
    """Build an :class:`ExperimentConfig` from the nested TOML layout.

    Dataset paths resolve against ``data_dir`` (config key), then the
    ``GCSC_DATA_DIR`` environment variable, then ``base_dir``.  The output
    directory resolves against ``base_dir``.
    """
    d = dict(d)
    base_dir = Path(base_dir)
    data_dir = d.get("data_dir") or os.environ.get(DATA_DIR_ENV)
    data_base = Path(data_dir) if data_dir else base_dir
    ds = dict(d.get("dataset", {}))
    synth = ds.pop("synthetic", None)
    for key in ("crop_rows", "crop_cols"):
        if ds.get(key) is not None:
            ds[key] = tuple(int(v) for v in ds[key])
    for key in ("path", "labels"):
        ds[key] = _resolve(ds.get(key), data_base)
    unknown = set(ds) - set(DatasetConfig.__dataclass_fields__)
    if unknown:
        raise ArgumentError(f"unknown [dataset] keys: {sorted(unknown)}")
    dataset = DatasetConfig(**ds, synthetic=SyntheticSpec.from_dict(synth) if synth else None)

    pre = d.get("preprocess", {})
    graph = d.get("graph", {})
    model = d.get("model", {})
    clus = d.get("cluster", {})
    out = d.get("output", {})
    kw = {}
    if "variance" in pre:
        kw["variance"], kw["pcs"] = float(pre["variance"]), None
    elif "pcs" in pre:
        kw["pcs"] = int(pre["pcs"])
    for src, dst, conv in (
        (pre, "window", int), (pre, "scale", bool),
        (graph, "k", int), (graph, "sym", str), (graph, "identity", bool),
        (model, "name", str), (model, "lambda", float), (model, "kernel", str),
        (model, "gamma", float), (model, "degree", int), (model, "coef0", float),
        (clus, "clusters", int), (clus, "affinity", str), (clus, "svd_d", int),
        (clus, "power", float), (clus, "seed", int), (clus, "restarts", int),
        (out, "save_matrices", bool),
    ):
        if dst in src:
            name = {"identity": "identity_graph", "name": "model", "lambda": "lam"}.get(dst, dst)
            kw[name] = conv(src[dst])
    if "dir" in out:
        kw["output_dir"] = _resolve(out["dir"], base_dir)
    if dataset.kind != "cube" and "scale" not in pre:
        kw["scale"] = False
    return ExperimentConfig(dataset=dataset, name=d.get("name", dataset.name or "experiment"), **kw)


def load_config(path):
    """Read a TOML or JSON experiment file.

    A bare name such as ``salinasA_ekgcsc.toml`` that does not exist locally is
    looked up among the configs shipped with the package.
    """
    path = Path(path)
    if not path.exists() and (SHIPPED_CONFIGS / path.name).exists():
        path = SHIPPED_CONFIGS / path.name
    text = path.read_text()
    if path.suffix.lower() == ".json":
        raw = json.loads(text)
    else:
        raw = tomllib.loads(text)
    return config_from_dict(raw, base_dir=path.parent if path.parent != SHIPPED_CONFIGS else Path.cwd())


def shipped_configs():
    return sorted(SHIPPED_CONFIGS.glob("*.toml"))
