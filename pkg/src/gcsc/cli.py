"""Command line entry point: ``gcsc <command> ...``."""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from gcsc import formats
from gcsc.errors import GcscError


def _add_ingest(sub):
    p = sub.add_parser("ingest", help="read a cube, crop it and store it in raw-bin form")
    p.add_argument("--input", required=True)
    p.add_argument("--format", default="raw-bin", choices=["raw-bin", "csv-stack", "mat-v5"])
    p.add_argument("--labels", help="ground-truth file (.mat, row,col,label .csv, or raw .labels)")
    p.add_argument("--key", help="variable name of the cube inside a MAT file")
    p.add_argument("--label-key", help="variable name of the labels inside a MAT file")
    p.add_argument("--crop", help="1-based inclusive 'r0:r1,c0:c1'")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)


def cmd_ingest(args):
    from gcsc.ingest import crop_subscene, load_cube, parse_crop, save_cube

    cube = load_cube(args.input, args.format, args.labels, args.key, args.label_key)
    if args.crop:
        rows, cols = parse_crop(args.crop, one_based=True)
        cube = crop_subscene(cube, rows, cols)
    out = Path(args.out)
    save_cube(cube, out / "cube.gcsc")
    summary = {"rows": cube.rows, "cols": cube.cols, "bands": cube.bands,
               "labeled": cube.n_labeled, "classes": cube.n_classes}
    print(json.dumps(summary))


def _add_preprocess(sub):
    p = sub.add_parser("preprocess", help="PCA, spectral-spatial patches and [0,1] scaling")
    p.add_argument("--input", required=True, help="cube.gcsc written by 'ingest'")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--pcs", type=int)
    g.add_argument("--variance", type=float)
    p.add_argument("--window", type=int, default=9)
    p.add_argument("--scale", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)


def cmd_preprocess(args):
    from gcsc.ingest import load_cube, to_labeled_samples
    from gcsc.preprocess import extract_patches, fit_pca, minmax_scale, transform_pca

    cube = load_cube(args.input, "raw-bin")
    pcs = args.pcs if args.pcs is not None or args.variance is not None else 4
    pca = fit_pca(to_labeled_samples(cube).features, n_components=pcs if args.variance is None else None,
                  variance=args.variance)
    samples = extract_patches(transform_pca(pca, cube), args.window)
    if args.scale:
        samples = minmax_scale(samples)
    out = Path(args.out)
    formats.write_matrix(out / "samples.gcsm", samples.features)
    formats.write_label_vector(out / "truth.csv", samples.labels, samples.coords)
    meta = {"n_samples": samples.n_samples, "n_features": samples.n_features,
            "pcs": pca.n_components, "explained_variance": float(pca.explained_variance_ratio.sum()),
            "shape": list(samples.shape)}
    formats.atomic_write_text(out / "samples.json", json.dumps(meta, indent=2) + "\n")
    print(json.dumps(meta))


def _add_graph(sub):
    p = sub.add_parser("graph", help="kNN graph and renormalized adjacency")
    p.add_argument("--input", required=True, help="samples.gcsm")
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--knn-sym", "--sym", dest="sym", default="or", choices=["or", "and", "none"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_graph)


def cmd_graph(args):
    from gcsc.graph import build_knn

    x = formats.read_matrix(args.input)
    g = build_knn(x, args.k, sym=args.sym)
    out = Path(args.out)
    lines = ["source,target"] + [f"{s},{t}" for s, t in g.edges()]
    formats.atomic_write_text(out / "edges.csv", "\n".join(lines) + "\n")
    formats.write_matrix(out / "abar.gcsm", g.normalized)
    print(json.dumps({"n": g.n_nodes, "k": g.k, "sym": g.sym, "edges": int(g.adjacency.nnz)}))


def _add_solve(sub):
    p = sub.add_parser("solve", help="closed-form EGCSC / EKGCSC coefficients")
    p.add_argument("--samples", required=True, help="samples.gcsm")
    p.add_argument("--graph", help="abar.gcsm (identity when omitted)")
    p.add_argument("--model", default="ekgcsc", choices=["egcsc", "ekgcsc"])
    p.add_argument("--lambda", dest="lam", type=float, default=100.0)
    p.add_argument("--kernel", default="gaussian", choices=["gaussian", "linear", "polynomial"])
    p.add_argument("--gamma", type=float, default=0.2)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--coef0", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)


def cmd_solve(args):
    from gcsc.solver import KernelDescriptor, compute_kernel, egcsc_solve, ekgcsc_solve

    x = formats.read_matrix(args.samples)
    abar = formats.read_matrix(args.graph) if args.graph else np.eye(x.shape[0])
    if args.model == "egcsc":
        coef = egcsc_solve(x, abar, args.lam)
    else:
        desc = {"gaussian": lambda: KernelDescriptor.gaussian(args.gamma),
                "linear": KernelDescriptor.linear,
                "polynomial": lambda: KernelDescriptor.polynomial(args.degree, args.coef0)}[args.kernel]()
        coef = ekgcsc_solve(compute_kernel(x, desc), abar, args.lam, kernel=desc)
    out = Path(args.out)
    formats.write_matrix(out / "z.gcsm", coef.Z)
    formats.atomic_write_text(out / "z.json", json.dumps(coef.sidecar(), indent=2) + "\n")
    print(json.dumps(coef.sidecar()))


def _add_cluster(sub):
    p = sub.add_parser("cluster", help="affinity from Z and spectral clustering")
    p.add_argument("--z", required=True, help="z.gcsm")
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--affinity", default="edsc", choices=["edsc", "symmetrize"])
    p.add_argument("--svd-d", type=int, default=10)
    p.add_argument("--power", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--truth", help="truth.csv (row,col,label) for matching and map coordinates")
    p.add_argument("--shape", help="scene 'rows,cols' for the map (read from samples.json otherwise)")
    p.add_argument("--map", help="PNG path for the cluster map")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)


def cmd_cluster(args):
    from gcsc.cluster import build_affinity, render_cluster_map, spectral_cluster

    z = formats.read_matrix(args.z)
    aff = build_affinity(z, args.clusters, mode=args.affinity, d_per_cluster=args.svd_d, power=args.power)
    assign = spectral_cluster(aff.C, args.clusters, seed=args.seed, restarts=args.restarts)
    out = Path(args.out)
    truth, coords = (None, None)
    if args.truth:
        truth, coords = formats.read_label_vector(args.truth)
    formats.write_label_vector(out / "labels.csv", assign.labels, coords)
    formats.write_matrix(out / "c.gcsm", aff.C)
    if args.map:
        shape = None
        if args.shape:
            shape = tuple(int(v) for v in args.shape.split(","))
        elif args.truth and (Path(args.truth).parent / "samples.json").exists():
            shape = tuple(json.loads((Path(args.truth).parent / "samples.json").read_text())["shape"])
        render_cluster_map(assign.labels, coords, shape, truth=truth, path=args.map)
    print(json.dumps({"n": int(assign.labels.size), "clusters": assign.n_clusters,
                      "inertia": assign.inertia, "rank": aff.rank}))


def _add_eval(sub):
    p = sub.add_parser("eval", help="score predicted labels against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--report", help="report JSON path")
    p.set_defaults(func=cmd_eval)


def cmd_eval(args):
    from gcsc.metrics import evaluate

    pred, _ = formats.read_label_vector(args.pred)
    truth, _ = formats.read_label_vector(args.truth)
    rep = evaluate(pred, truth).to_dict()
    text = json.dumps(rep, indent=2, sort_keys=True) + "\n"
    if args.report:
        formats.atomic_write_text(args.report, text)
    print(f"OA={rep['oa']:.4f} NMI={rep['nmi']:.4f} Kappa={rep['kappa']:.4f}")


def _add_run(sub):
    p = sub.add_parser("run", help="run a full experiment from a config file")
    p.add_argument("--config", required=True, help="TOML/JSON file or the name of a shipped config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a setting")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.set_defaults(func=cmd_run)


def _load(args):
    from gcsc.config import apply_overrides, load_config

    cfg = apply_overrides(load_config(args.config), args.set)
    if getattr(args, "out", None):
        cfg = cfg.replace(output_dir=args.out)
    return cfg


def cmd_run(args):
    from gcsc.harness import run_pipeline

    res = run_pipeline(_load(args))
    r = res.report
    print(f"{r['name']}: OA={r['oa']:.4f} NMI={r['nmi']:.4f} Kappa={r['kappa']:.4f} "
          f"N={r['n_samples']} time={r['runtime_seconds']:.1f}s")


def _add_sweep(sub):
    p = sub.add_parser("sweep", help="sweep one hyperparameter")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, choices=["lambda", "k", "gamma", "pcs"])
    p.add_argument("--values", required=True, help="'1e-3:1e3:log7', '5:40:5' or '1,2,4'")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", help="output directory")
    p.add_argument("--save-runs", action="store_true", help="also keep per-value run artifacts")
    p.set_defaults(func=cmd_sweep)


def cmd_sweep(args):
    from gcsc.harness import parse_values, sweep

    cfg = _load(args)
    out = args.out or cfg.output_dir or "."
    rows = sweep(cfg, args.param, parse_values(args.values), out_dir=out, write_runs=args.save_runs)
    for r in rows:
        status = r["error"] or f"OA={r['oa']:.4f} NMI={r['nmi']:.4f} Kappa={r['kappa']:.4f}"
        print(f"{args.param}={r['value']:g}: {status}")


def _add_synth(sub):
    p = sub.add_parser("synth", help="generate union-of-subspaces samples")
    p.add_argument("--spec", required=True, help="TOML/JSON with SyntheticSpec fields")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)


def cmd_synth(args):
    from gcsc.config import tomllib
    from gcsc.synthetic import SyntheticSpec, gen_synthetic

    path = Path(args.spec)
    raw = json.loads(path.read_text()) if path.suffix == ".json" else tomllib.loads(path.read_text())
    raw = raw.get("synthetic", raw)
    samples = gen_synthetic(SyntheticSpec.from_dict(raw))
    out = Path(args.out)
    formats.write_matrix(out / "samples.gcsm", samples.features)
    formats.write_label_vector(out / "truth.csv", samples.labels)
    print(json.dumps({"n_samples": samples.n_samples, "n_features": samples.n_features}))


def build_parser():
    parser = argparse.ArgumentParser(prog="gcsc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_ingest, _add_preprocess, _add_graph, _add_solve, _add_cluster,
                _add_eval, _add_run, _add_sweep, _add_synth):
        add(sub)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (GcscError, FileNotFoundError) as exc:
        print(f"gcsc: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
