"""Command-line entry point: ``scgc <command> [options]``."""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .config import PRESETS, TrainConfig, preset
from .core import make_rng
from .dataio import FEATURES, LABELS, Dataset, load_dataset, read_features, read_labels, save_dataset
from .graph import influence_for_variant, sbm_generate
from .inference import ClusterModel, evaluate, write_embeddings
from .model import load_checkpoint, save_checkpoint
from .pipeline import TrainingDivergedError, pretrain, run, train

log = logging.getLogger("scgc")

# flag -> TrainConfig field
OVERRIDES = {
    "seed": "seed",
    "variant": "variant",
    "alpha": "alpha",
    "beta": "beta",
    "tau": "tau",
    "hops": "hops",
    "epochs": "train_epochs",
    "pretrain_epochs": "pretrain_epochs",
    "batch_size": "batch_size",
    "full_batch": "full_batch",
    "clusters": "cluster_count",
    "lr_pretrain": "lr_pretrain",
    "lr_train": "lr_train",
    "ae_dims": "ae_dims",
}


def _config_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration (flags override --config, which overrides --preset)")
    g.add_argument("--config", type=Path, help="JSON config file")
    g.add_argument("--preset", choices=PRESETS, help="published per-dataset hyper-parameters")
    g.add_argument("--seed", type=int)
    g.add_argument("--variant", choices=["scgc", "scgc-star"])
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--tau", type=float)
    g.add_argument("--hops", "--K", dest="hops", type=int)
    g.add_argument("--epochs", type=int, help="joint training epochs")
    g.add_argument("--pretrain-epochs", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--full-batch", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--clusters", type=int, help="cluster count (default: dataset class count)")
    g.add_argument("--lr-pretrain", type=float)
    g.add_argument("--lr-train", type=float)
    g.add_argument("--ae-dims", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma-separated widths, last one is the embedding size")
    return p


def _data_flags(need_graph: bool = True) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--data", type=Path, required=True, help="dataset directory")
    if need_graph:
        p.add_argument("--knn-k", type=int, help="build a KNN graph instead of reading edges.txt")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scgc", description="Graph clustering with contrastive structure loss.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    cfg = _config_flags()

    p = sub.add_parser("pretrain", parents=[cfg, _data_flags(False)],
                       help="train the autoencoder and initialise centroids")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", parents=[cfg, _data_flags()], help="joint training from a pretrained checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--export-embeddings", type=Path)

    p = sub.add_parser("eval", parents=[_data_flags(False)], help="cluster and score with a checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path)
    p.add_argument("--export-embeddings", type=Path)

    p = sub.add_parser("influence", parents=[cfg, _data_flags()], help="influence matrix statistics")

    p = sub.add_parser("synth", help="write a stochastic block model dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--blocks", type=lambda s: [int(v) for v in s.split(",")], default=[100, 100, 100])
    p.add_argument("--p-in", type=float, default=0.1)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="sbm")

    p = sub.add_parser("sweep", parents=[_data_flags()], help="repeat full runs over a config grid")
    p.add_argument("--grid", type=Path, required=True,
                   help='JSON: {"base": {...}, "grid": {"tau": [..], ...}, "seeds": [..]}')
    p.add_argument("--out", type=Path, required=True)
    return parser


def resolve_config(args, dataset_classes: int | None = None) -> TrainConfig:
    doc: dict = {}
    if getattr(args, "preset", None):
        variant = args.variant or "scgc-star"
        doc.update(preset(args.preset, variant).to_dict())
    if getattr(args, "config", None):
        doc.update(json.loads(Path(args.config).read_text()))
    if "cluster_count" not in doc and dataset_classes is not None:
        doc["cluster_count"] = dataset_classes
    for flag, name in OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            doc[name] = value
    return TrainConfig.from_dict(doc)


def _load(args) -> Dataset:
    return load_dataset(args.data, getattr(args, "knn_k", None))


def _features_and_labels(directory: Path):
    x = read_features(directory / FEATURES)
    labels = read_labels(directory / LABELS, x.shape[0]) if (directory / LABELS).is_file() else None
    return x, labels


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_pretrain(args) -> int:
    x, labels = _features_and_labels(args.data)
    classes = int(labels.max()) + 1 if labels is not None else None
    meta = args.data / "meta.json"
    if meta.is_file():
        classes = json.loads(meta.read_text()).get("class_count", classes)
    cfg = resolve_config(args, classes)
    args.out.mkdir(parents=True, exist_ok=True)
    cfg.save(args.out / "config.json")
    res = pretrain(x, cfg)
    save_checkpoint(args.out / "pretrained.json", res.params, res.centroids,
                    {"stage": "pretrained", "config": cfg.to_dict(), "losses": res.losses})
    summary = {"recon_loss": res.losses[-1] if res.losses else None, "kmeans_inertia": res.kmeans.inertia}
    if labels is not None:
        summary["kmeans_report"] = json.loads(evaluate(
            ClusterModel(res.params, res.centroids, cfg.eta), x, labels).report.to_json())
    _write_json(args.out / "pretrain_summary.json", summary)
    print(args.out / "pretrained.json")
    return 0


def _trained_artifacts(out: Path, cfg: TrainConfig, model: ClusterModel, history, x, labels,
                       export: Path | None) -> dict | None:
    history.write_jsonl(out / "history.jsonl")
    save_checkpoint(out / "model.json", model.params, model.centroids,
                    {"stage": "trained", "config": cfg.to_dict()})
    result = evaluate(model, x, labels)
    write_embeddings(out / "embeddings.tsv", result.embeddings, result.labels)
    if export:
        write_embeddings(export, result.embeddings, result.labels)
    if result.report is not None:
        (out / "report.json").write_text(result.report.to_json() + "\n")
        return json.loads(result.report.to_json())
    return None


def cmd_train(args) -> int:
    ds = _load(args)
    params, centroids, extra = load_checkpoint(args.checkpoint)
    if centroids is None:
        raise ValueError(f"{args.checkpoint} carries no centroids; run `pretrain` first")
    base = extra.get("config", {})
    doc = dict(base)
    if args.config:
        doc.update(json.loads(args.config.read_text()))
        args.config = None
    if args.preset:
        doc.update(preset(args.preset, args.variant or doc.get("variant", "scgc-star")).to_dict())
        args.preset = None
    for flag, name in OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            doc[name] = value
    doc.setdefault("cluster_count", centroids.shape[0])
    cfg = TrainConfig.from_dict(doc)
    if cfg.cluster_count != centroids.shape[0]:
        raise ValueError(f"config asks for {cfg.cluster_count} clusters, checkpoint has {centroids.shape[0]}")
    args.out.mkdir(parents=True, exist_ok=True)
    cfg.save(args.out / "config.json")
    t0 = time.perf_counter()
    model, history = train(ds.features, ds.graph, cfg, params, centroids, ds.labels)
    report = _trained_artifacts(args.out, cfg, model, history, ds.features, ds.labels, args.export_embeddings)
    log.info("trained in %.1fs", time.perf_counter() - t0)
    print(json.dumps(report) if report else args.out / "model.json")
    return 0


def cmd_eval(args) -> int:
    params, centroids, extra = load_checkpoint(args.checkpoint)
    if centroids is None:
        raise ValueError(f"{args.checkpoint} carries no centroids")
    x, labels = _features_and_labels(args.data)
    eta = extra.get("config", {}).get("eta", 1.0)
    result = evaluate(ClusterModel(params, centroids, eta), x, labels)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        write_embeddings(args.out / "embeddings.tsv", result.embeddings, result.labels)
        if result.report is not None:
            (args.out / "report.json").write_text(result.report.to_json() + "\n")
    if args.export_embeddings:
        write_embeddings(args.export_embeddings, result.embeddings, result.labels)
    print(result.report.to_json() if result.report else f"{len(result.labels)} nodes clustered")
    return 0


def cmd_influence(args) -> int:
    ds = _load(args)
    cfg = resolve_config(args, ds.class_count or 2)
    t0 = time.perf_counter()
    inf = influence_for_variant(ds.graph, cfg.variant, cfg.hops)
    g = inf.gamma
    off = g[~np.eye(inf.n, dtype=bool)]
    stats = {
        "n": inf.n,
        "edges": ds.graph.num_edges,
        "hops": inf.hops,
        "mode": inf.mode,
        "nonzero_offdiag_fraction": float(np.count_nonzero(off) / max(off.size, 1)),
        "min": float(g.min()),
        "max": float(g.max()),
        "mean": float(g.mean()),
        "row_sum_min": float(g.sum(1).min()),
        "row_sum_max": float(g.sum(1).max()),
        "seconds": time.perf_counter() - t0,
    }
    print(json.dumps(stats, indent=2))
    return 0


def cmd_synth(args) -> int:
    g, x, y = sbm_generate(args.blocks, args.p_in, args.p_out, args.feature_dim, args.noise,
                           make_rng(args.seed, "synth"))
    save_dataset(Dataset(args.name, x, g, y, len(args.blocks)), args.out)
    print(args.out)
    return 0


def cmd_sweep(args) -> int:
    spec = json.loads(args.grid.read_text())
    base = spec.get("base", {})
    grid = spec.get("grid", {})
    seeds = spec.get("seeds", [base.get("seed", 0)])
    ds = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    keys = sorted(grid)
    summary = []
    for k, combo in enumerate(itertools.product(*(grid[key] for key in keys))):
        for seed in seeds:
            doc = {"cluster_count": ds.class_count, **base, **dict(zip(keys, combo)), "seed": seed}
            cfg = TrainConfig.from_dict(doc)
            run_dir = args.out / f"run{k:03d}_seed{seed}"
            run_dir.mkdir(exist_ok=True)
            cfg.save(run_dir / "config.json")
            res = run(ds.features, ds.graph, cfg, ds.labels)
            report = _trained_artifacts(run_dir, cfg, res.model, res.history, ds.features, ds.labels, None)
            row = {"run": run_dir.name, **dict(zip(keys, combo)), "seed": seed, "report": report}
            summary.append(row)
            log.info("%s %s", run_dir.name, report)
    with open(args.out / "summary.jsonl", "w") as fh:
        for row in summary:
            fh.write(json.dumps(row) + "\n")
    print(args.out / "summary.jsonl")
    return 0


COMMANDS = {
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "influence": cmd_influence,
    "synth": cmd_synth,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, KeyError, FileNotFoundError, TrainingDivergedError, json.JSONDecodeError) as exc:
        print(f"scgc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
