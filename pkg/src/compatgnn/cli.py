"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Every command is deterministic under a fixed --seed; artifacts
land under --out as JSON/CSV/SVG next to a human-readable summary on
stdout.
"""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .errors import ConfigError, DataError, NumericalError, TrainingDiverged
from .bench import (degree_report, random_search, run_bench, timing_report,
                    write_json_atomic, write_text_atomic)
from .graph import (generate_splits, load_dataset, load_splits, save_dataset,
                    save_splits)
from .heatmap import cm_to_csv, cm_to_svg
from .metrics import edge_homophily, node_homophily, observed_cm
from .model import estimate_cm
from .sparse import csr_to_graph_structure, knn_feature_graph
from .synth import PATTERNS, generate_graph, make_synth_spec, verify_graph
from .training import RunConfig, train_model


def _add_global_flags(p):
    p.add_argument("--seed", type=int, default=0, help="base random seed")
    p.add_argument("--config", type=str, default=None,
                   help="JSON file of run-config fields (CLI flags override)")
    p.add_argument("--out", type=str, default=None, help="artifact directory")
    p.add_argument("--threads", type=int, default=1, help="worker pool size")


def _add_hyper_flags(p):
    p.add_argument("--model", type=str, default=None,
                   help="compatgnn, a preset name, or a model-spec JSON path")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--lambda", dest="lambda_", type=float, default=None,
                   help="discrimination loss weight")
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--nhidden", type=int, default=None)
    p.add_argument("--relu-variant", type=int, choices=(0, 1), default=None)
    p.add_argument("--structure-info", type=int, choices=(0, 1), default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--max-hop", type=int, default=None)


def _parse_split_ids(text):
    ids = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            try:
                ids.extend(range(int(lo), int(hi) + 1))
            except ValueError:
                raise ConfigError(f"bad split range {part!r}") from None
        else:
            try:
                ids.append(int(part))
            except ValueError:
                raise ConfigError(f"bad split id {part!r}") from None
    if not ids:
        raise ConfigError(f"no split ids in {text!r}")
    return ids


def _build_config(args):
    d = {}
    if args.config:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file {args.config} not found")
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
        d.update(loaded)
    for key in ("model", "lr", "weight_decay", "patience", "dropout", "layers",
                "nhidden", "max_epochs", "max_hop"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    if getattr(args, "lambda_", None) is not None:
        d["lambda"] = args.lambda_
    for key in ("relu_variant", "structure_info"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = bool(v)
    if getattr(args, "data", None):
        d["dataset"] = args.data
    if getattr(args, "splits", None):
        d["split_ids"] = _parse_split_ids(args.splits)
    elif getattr(args, "split", None) is not None:
        d["split_ids"] = [args.split]
    d.setdefault("seed", args.seed)
    if args.seed != 0:
        d["seed"] = args.seed
    return RunConfig.from_dict(d)


def _load_graph_and_splits(config):
    if not config.dataset:
        raise ConfigError("no dataset given (--data or config 'dataset')")
    g = load_dataset(config.dataset)
    try:
        splits = load_splits(config.dataset)
    except DataError:
        n_needed = max(config.split_ids) + 1
        splits = generate_splits(g, n_needed, config.seed)
    return g, splits


# ---------------------------------------------------------------------------
# commands

def cmd_dataset_inspect(args):
    g = load_dataset(args.path)
    deg = g.degrees
    info = {
        "name": g.name,
        "n_nodes": g.n_nodes,
        "n_edges": g.n_edges,
        "n_classes": g.n_classes,
        "d_f": g.d_f,
        "directed": g.directed,
        "degree_min": int(deg.min()),
        "degree_mean": float(deg.mean()),
        "degree_max": int(deg.max()),
        "isolated_nodes": int(np.sum(deg == 0)),
    }
    if np.all(g.labels >= 0) and len(g.indices):
        info["edge_homophily"] = edge_homophily(g)
        info["edge_homophily_basis"] = ("directed-entries" if g.directed
                                        else "undirected-edges")
        info["node_homophily"] = node_homophily(g)
    for k, v in info.items():
        print(f"{k:24s} {v}")
    if args.out:
        write_json_atomic(os.path.join(args.out, "inspect.json"), info)
    return 0


def cmd_dataset_split(args):
    g = load_dataset(args.path)
    splits = generate_splits(g, args.n_splits, args.seed)
    out = args.out or os.path.join(args.path, "splits")
    save_splits(splits, out)
    s = splits[0]
    print(f"wrote {len(splits)} splits to {out} "
          f"(train/valid/test = {len(s.train)}/{len(s.valid)}/{len(s.test)})")
    return 0


def cmd_synth_gen(args):
    if not args.out:
        raise ConfigError("synth gen needs --out")
    spec = make_synth_spec(args.nodes, args.classes, args.homophily,
                           args.pattern, args.degree, args.seed,
                           d_f=args.feature_dim,
                           mean_separation=args.mean_separation)
    g = generate_graph(spec)
    save_dataset(g, args.out)
    splits = generate_splits(g, args.n_splits, args.seed)
    save_splits(splits, os.path.join(args.out, "splits"))
    report = verify_graph(g, spec)
    write_json_atomic(os.path.join(args.out, "verify.json"), report)
    print(f"generated {g.n_nodes} nodes, {g.n_edges} edges "
          f"(mean degree {report['mean_degree']:.2f})")
    print(f"edge homophily {report['edge_homophily']:.3f} "
          f"(target {report['target_homophily']:.3f}); "
          f"max row TV {report['max_row_tv']:.3f}")
    return 0


def cmd_train(args):
    config = _build_config(args)
    g, splits = _load_graph_and_splits(config)
    sid = config.split_ids[0]
    if sid >= len(splits):
        raise ConfigError(f"split id {sid} outside [0, {len(splits)})")
    try:
        result = train_model(g, splits[sid], config, config.seed, split_id=sid)
    except TrainingDiverged as exc:
        if args.out and exc.partial_result is not None:
            write_json_atomic(os.path.join(args.out, "run.json"),
                              dataclasses.asdict(exc.partial_result))
        raise
    print(f"best epoch {result.best_epoch}  "
          f"val {100 * max(result.val_curve):.2f}  "
          f"test {100 * result.test_accuracy:.2f}")
    if args.out:
        write_json_atomic(os.path.join(args.out, "run.json"),
                          dataclasses.asdict(result))
    return 0


def cmd_bench(args):
    config = _build_config(args)
    g, splits = _load_graph_and_splits(config)
    report = run_bench(g, splits, config, threads=args.threads,
                       out_dir=args.out)
    sys.stdout.write(report.text_table())
    if report.excluded_splits and not report.accuracies:
        raise NumericalError("every split diverged")
    return 0


def cmd_degree_report(args):
    from .training import RunResult
    runs = []
    if os.path.isdir(args.runs):
        names = sorted(n for n in os.listdir(args.runs)
                       if n.startswith("run_split") and n.endswith(".json"))
        if not names:
            raise DataError(f"no run_split*.json under {args.runs}")
        for n in names:
            with open(os.path.join(args.runs, n), "r", encoding="utf-8") as fh:
                runs.append(RunResult(**json.load(fh)))
    else:
        with open(args.runs, "r", encoding="utf-8") as fh:
            runs.append(RunResult(**json.load(fh)))
    runs = [r for r in runs if not r.diverged]
    report = degree_report(runs, n_buckets=args.buckets)
    print("degree buckets (low -> high degree):")
    for i, (acc, size) in enumerate(zip(report["mean_accuracy"], report["sizes"])):
        print(f"  bucket {i}  size {size:5d}  acc {100 * acc:6.2f}")
    if args.out:
        write_json_atomic(os.path.join(args.out, "degree_report.json"), report)
    return 0


def cmd_search(args):
    config = _build_config(args)
    g, splits = _load_graph_and_splits(config)
    out_path = os.path.join(args.out, "leaderboard.jsonl") if args.out else None
    best, records = random_search(g, splits, config, args.budget, config.seed,
                                  threads=args.threads, out_path=out_path)
    scores = [r["mean_val_accuracy"] for r in records]
    print(f"{args.budget} trials; best mean val accuracy "
          f"{100 * max(scores):.2f}")
    print(json.dumps(best.to_dict(), indent=2))
    if args.out:
        write_json_atomic(os.path.join(args.out, "best_config.json"),
                          best.to_dict())
    return 0


def cmd_cm(args):
    if not args.out:
        raise ConfigError("cm needs --out for its CSV/SVG artifacts")
    g = load_dataset(args.data)

    def emit(name, matrix, title):
        write_text_atomic(os.path.join(args.out, f"{name}.csv"),
                          cm_to_csv(matrix))
        write_text_atomic(os.path.join(args.out, f"{name}.svg"),
                          cm_to_svg(matrix, title=title))

    if args.mode == "observed":
        m = observed_cm(g).m
        emit("cm_observed", m, f"{g.name}: observed compatibility")
        print(f"wrote cm_observed.csv/.svg (K={m.shape[0]})")
    elif args.mode == "knn":
        knn = knn_feature_graph(g, args.knn_k)
        indptr, indices = csr_to_graph_structure(knn)
        g2 = g.with_structure(indptr, indices, directed=True)
        m = observed_cm(g2).m
        emit("cm_knn", m, f"{g.name}: feature-kNN (k={args.knn_k}) compatibility")
        print(f"wrote cm_knn.csv/.svg (K={m.shape[0]})")
    else:  # estimated
        if not args.run:
            raise ConfigError("cm --mode estimated needs --run <run.json>")
        with open(args.run, "r", encoding="utf-8") as fh:
            run = json.load(fh)
        est = np.asarray(run.get("metadata", {}).get("cm_estimate"))
        if est.ndim != 2:
            raise DataError(f"{args.run} has no estimated compatibility matrix")
        obs = observed_cm(g).m
        emit("cm_estimated", est, f"{g.name}: estimated compatibility")
        emit("cm_observed", obs, f"{g.name}: observed compatibility")
        diff = float(np.abs(est - obs).max())
        write_json_atomic(os.path.join(args.out, "cm_compare.json"),
                          {"max_abs_diff": diff})
        print(f"max |estimated - observed| = {diff:.4f}")
    return 0


def cmd_timing(args):
    config = _build_config(args)
    g, splits = _load_graph_and_splits(config)
    sid = config.split_ids[0]
    report = timing_report(g, splits[sid], config,
                           scaling_check=not args.no_scaling_check)
    print(f"ms/epoch {report['ms_per_epoch']:.2f}  "
          f"refreshes {report['refresh_count']}")
    if "doubling_ratio" in report:
        print(f"hidden-width doubling ratio {report['doubling_ratio']:.2f} "
              f"(expected band {report['expected_doubling_ratio']})")
    if args.out:
        write_json_atomic(os.path.join(args.out, "timing.json"), report)
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    top = argparse.ArgumentParser(
        prog="compatgnn",
        description="compatibility-matrix-aware graph learning toolkit")
    sub = top.add_subparsers(dest="command", required=True)

    p_ds = sub.add_parser("dataset", help="inspect or split dataset directories")
    ds_sub = p_ds.add_subparsers(dest="subcommand", required=True)
    p = ds_sub.add_parser("inspect", help="summary statistics of a dataset")
    p.add_argument("path")
    _add_global_flags(p)
    p.set_defaults(func=cmd_dataset_inspect)
    p = ds_sub.add_parser("split", help="generate 48/32/20 node splits")
    p.add_argument("path")
    p.add_argument("--n-splits", type=int, default=10)
    _add_global_flags(p)
    p.set_defaults(func=cmd_dataset_split)

    p_syn = sub.add_parser("synth", help="synthetic graph generation")
    syn_sub = p_syn.add_subparsers(dest="subcommand", required=True)
    p = syn_sub.add_parser("gen", help="generate a dataset directory")
    p.add_argument("--nodes", type=int, default=1000)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--homophily", type=float, default=0.5)
    p.add_argument("--pattern", choices=PATTERNS, default="hard")
    p.add_argument("--degree", type=float, default=18)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--mean-separation", type=float, default=1.9)
    p.add_argument("--n-splits", type=int, default=10)
    _add_global_flags(p)
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("train", help="single training run")
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--split", type=int, default=None)
    _add_hyper_flags(p)
    _add_global_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="multi-split benchmark")
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--splits", type=str, default=None,
                   help="split ids, e.g. '0-9' or '0,2,5'")
    _add_hyper_flags(p)
    _add_global_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("degree-report", help="accuracy by degree bucket")
    p.add_argument("--runs", type=str, required=True,
                   help="bench output directory or a single run.json")
    p.add_argument("--buckets", type=int, default=5)
    _add_global_flags(p)
    p.set_defaults(func=cmd_degree_report)

    p = sub.add_parser("search", help="random hyperparameter search")
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--splits", type=str, default=None)
    p.add_argument("--budget", type=int, required=True)
    _add_hyper_flags(p)
    _add_global_flags(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("cm", help="compatibility matrix artifacts (CSV + SVG)")
    p.add_argument("--data", type=str, required=True)
    p.add_argument("--mode", choices=("observed", "estimated", "knn"),
                   default="observed")
    p.add_argument("--run", type=str, default=None,
                   help="run.json with an estimated matrix (estimated mode)")
    p.add_argument("--knn-k", type=int, default=5)
    _add_global_flags(p)
    p.set_defaults(func=cmd_cm)

    p = sub.add_parser("timing", help="per-epoch wall-clock report")
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--split", type=int, default=None)
    p.add_argument("--no-scaling-check", action="store_true")
    _add_hyper_flags(p)
    _add_global_flags(p)
    p.set_defaults(func=cmd_timing)
    return top


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
