"""Command-line entry point: ingest, train, evaluate, diagnose.

Exit codes are stable: 0 success, 2 input error, 3 numerical divergence,
4 integrity mismatch. Every command writes one manifest.json into its
output directory, and re-running with identical inputs and seed rewrites
byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .config import (
    canonical_json,
    config_to_objects,
    load_bundle,
    load_config,
    resolve_config,
    save_bundle,
    sha256_of,
    write_manifest,
)
from .data import dataset_stats, enrich_with_side_info, ingest, normalize_adjacency, split
from .diagnostics import (
    TIMING_VARIANTS,
    snr_curve,
    snr_curves_csv,
    svd_export,
    svd_export_csv,
    timing_csv,
    timing_harness,
)
from .diffusion import make_schedule
from .errors import (
    ConfigError,
    DiffGTError,
    DivergenceError,
    EmptyDatasetError,
    IntegrityError,
    ParseError,
)
from .figures import (
    save_metrics_figure,
    save_snr_figure,
    save_svd_figure,
    save_timing_figure,
    save_training_figure,
)
from .metrics import evaluate_embeddings
from .model import (
    GraphEncoderParams,
    ModelState,
    bind_parameters,
    config_digest,
    init_denoiser,
    load_checkpoint,
    predict_embeddings,
    save_checkpoint,
)
from .rng import RandomSource
from .training import ABLATION_VARIANTS, log_rows_to_csv, train

CHECKPOINT_FILE = "checkpoint.json"


def _seed_override(seed: int) -> int:
    env = os.environ.get("DIFFGT_SEED")
    return int(env) if env else seed


def _ensure_out(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    out = _ensure_out(args.out)
    seed = _seed_override(args.seed)
    graph, side = ingest(args.data, args.side, side_class=args.side_class)
    if side is not None and args.top_n > 0:
        graph = enrich_with_side_info(graph, side, args.top_n)
    data_split = split(graph, seed=seed)
    dataset_id = save_bundle(out, graph, side, data_split)
    stats = dataset_stats(graph)
    stats["dataset_id"] = dataset_id
    stats["split_seed"] = seed
    stats["side_info"] = side is not None
    stats["similarity_top_n"] = args.top_n if side is not None else 0
    Path(out, "stats.json").write_text(canonical_json(stats), encoding="utf-8")
    settings = {
        "data": str(args.data),
        "side": None if args.side is None else str(args.side),
        "side_class": args.side_class,
        "top_n": args.top_n,
        "seed": seed,
    }
    write_manifest(out, settings, seed, dataset_id, sys.argv[1:] or ["ingest"])
    print(f"ingested {stats['num_interactions']} interactions "
          f"({stats['num_users']} users x {stats['num_items']} items, density {stats['density_pct']})")
    return 0


def _normalize_variant(name: str) -> str:
    return name if name.startswith("-") else f"-{name}"


def cmd_train(args) -> int:
    out = _ensure_out(args.out)
    config = load_config(args.config)
    config["seed"] = _seed_override(config["seed"])
    if args.ablate is not None:
        variant = _normalize_variant(args.ablate)
        if variant not in ABLATION_VARIANTS:
            raise ConfigError(
                f"unknown ablation variant {variant!r}; valid: {', '.join(ABLATION_VARIANTS)}"
            )
        flag = {
            "-Direction": "direction",
            "-Condition": "condition",
            "-Transformer": "transformer",
            "-Side": "side_info",
            "-CL": "contrastive",
            "-DiffL": "diffusion_loss",
        }[variant]
        config["ablation"][flag] = False
    data_dir = args.data or config["data_dir"]
    if not data_dir:
        raise ConfigError("no dataset: set data_dir in the config or pass --data")
    graph, _, data_split, dataset_id = load_bundle(data_dir)
    model_cfg, diff_cfg, train_cfg = config_to_objects(config)

    try:
        result = train(graph, data_split, model_cfg, diff_cfg, train_cfg)
    except DivergenceError as exc:
        dump = Path(out, "diagnostic.json")
        dump.write_text(canonical_json(exc.diagnostic), encoding="utf-8")
        print(f"error: {exc}; diagnostic dump at {dump}", file=sys.stderr)
        return 3

    (out / "logs").mkdir(exist_ok=True)
    (out / "figures").mkdir(exist_ok=True)
    Path(out, "logs", "training_log.csv").write_text(log_rows_to_csv(result.log_rows), encoding="utf-8")
    save_training_figure(result.log_rows, Path(out, "figures", "training_loss.svg"))
    Path(out, "config.json").write_text(canonical_json(config), encoding="utf-8")

    enc = GraphEncoderParams(model_cfg.encoder_layers, model_cfg.dim, result.parameters["embed"])
    den = init_denoiser(
        RandomSource(0), graph.num_nodes, model_cfg.dim,
        model_cfg.denoiser_layers, model_cfg.compress_len, diff_cfg.steps,
    )
    _, den = bind_parameters(enc, den, result.parameters)
    state = ModelState(
        encoder=enc,
        denoiser=den,
        weighted=result.parameters.get("den.weighted"),
        schedule=make_schedule(diff_cfg.steps, diff_cfg.beta_start, diff_cfg.beta_end),
        config=config,
        config_hash=config_digest(config),
        dataset_id=dataset_id,
        num_users=graph.num_users,
        num_items=graph.num_items,
    )
    save_checkpoint(Path(out, CHECKPOINT_FILE), state)
    write_manifest(out, config, config["seed"], dataset_id, sys.argv[1:] or ["train"])
    print(
        f"trained {result.epochs_run} epochs (best validation {result.best_val:.6g} "
        f"at epoch {result.best_epoch}); checkpoint at {Path(out, CHECKPOINT_FILE)}"
    )
    return 0


def _load_state_and_bundle(checkpoint_path, data_dir):
    state = load_checkpoint(checkpoint_path)
    data_dir = data_dir or state.config.get("data_dir")
    if not data_dir:
        raise ConfigError("no dataset directory: pass --data")
    graph, side, data_split, dataset_id = load_bundle(data_dir)
    if dataset_id != state.dataset_id:
        raise IntegrityError(
            f"checkpoint was trained on dataset {state.dataset_id[:12]}... "
            f"but {data_dir} holds {dataset_id[:12]}..."
        )
    return state, graph, side, data_split, dataset_id


def cmd_evaluate(args) -> int:
    out = _ensure_out(args.out)
    state, graph, _, data_split, dataset_id = _load_state_and_bundle(args.checkpoint, args.data)
    adj = normalize_adjacency(graph, enriched=state.config["ablation"]["side_info"])
    _, x_final = predict_embeddings(state, graph, adj, data_split.train)
    report = evaluate_embeddings(np.asarray(x_final), graph, data_split, k=args.k)
    (out / "reports").mkdir(exist_ok=True)
    (out / "figures").mkdir(exist_ok=True)
    Path(out, "reports", "metrics.csv").write_text(report.to_csv(), encoding="utf-8")
    save_metrics_figure(report, Path(out, "figures", "metrics.svg"))
    write_manifest(
        out,
        {"checkpoint": str(args.checkpoint), "k": args.k, "config_hash": state.config_hash},
        state.config["seed"],
        dataset_id,
        sys.argv[1:] or ["evaluate"],
    )
    print(
        f"recall@{args.k} = {report.recall_mean:.4f} (±{report.recall_std:.4f}), "
        f"ndcg@{args.k} = {report.ndcg_mean:.4f} (±{report.ndcg_std:.4f}) over "
        f"{len(report.recall_per_set)} test sets"
    )
    return 0


def _item_labels(side, num_items):
    if side is None or side.matrix.size == 0:
        return np.zeros(num_items, dtype=np.int64)
    return side.dominant_labels()


def cmd_diagnose(args) -> int:
    out = _ensure_out(args.out)
    (out / "reports").mkdir(exist_ok=True)
    (out / "figures").mkdir(exist_ok=True)

    if args.mode == "timing":
        state = load_checkpoint(args.checkpoint)
        m = state.config["model"]
        d = state.config["diffusion"]
        reports = timing_harness(
            num_nodes=args.nodes,
            num_steps=d["steps"],
            sampled_steps=d["sampled_steps"],
            variants=TIMING_VARIANTS,
            seed=state.config["seed"],
            dim=m["dim"],
            encoder_layers=m["encoder_layers"],
            denoiser_layers=m["denoiser_layers"],
            compress_len=m["compress_len"],
        )
        Path(out, "reports", "timing.csv").write_text(timing_csv(reports), encoding="utf-8")
        save_timing_figure(reports, Path(out, "figures", "timing.svg"))
        write_manifest(
            out,
            {"mode": "timing", "nodes": args.nodes, "config_hash": state.config_hash},
            state.config["seed"],
            state.dataset_id,
            sys.argv[1:] or ["diagnose"],
        )
        for r in reports:
            print(f"{r.variant:22s} forward {r.forward_seconds:8.3f}s reverse {r.reverse_seconds:8.3f}s")
        return 0

    state, graph, side, data_split, dataset_id = _load_state_and_bundle(args.checkpoint, args.data)
    adj = normalize_adjacency(graph, enriched=state.config["ablation"]["side_info"])
    x_g, _ = predict_embeddings(state, graph, adj, data_split.train)
    item_embeddings = np.asarray(x_g)[graph.num_users :]
    labels = _item_labels(side, graph.num_items)

    if args.mode == "snr":
        keep = labels >= 0
        counts = np.bincount(labels[keep]) if np.any(keep) else np.array([])
        if (counts >= 2).sum() < 2:
            raise ConfigError("snr diagnostic needs side-info labels with >= 2 classes of >= 2 items")
        sched = state.schedule
        steps = sorted(set(np.linspace(1, sched.num_steps, min(10, sched.num_steps)).astype(int).tolist()))
        seed = state.config["seed"]
        curves = [
            snr_curve(item_embeddings, labels, sched, mode, steps, RandomSource(seed, stream=50))
            for mode in ("isotropic", "directional")
        ]
        Path(out, "reports", "snr.csv").write_text(snr_curves_csv(curves), encoding="utf-8")
        save_snr_figure(curves, Path(out, "figures", "snr.svg"))
    else:  # svd
        proj, labs, ratio = svd_export(item_embeddings, labels)
        Path(out, "reports", "svd.csv").write_text(svd_export_csv(proj, labs, ratio), encoding="utf-8")
        save_svd_figure(proj, labs, ratio, Path(out, "figures", "svd.svg"))
        print(f"anisotropy ratio sigma1/sigma2 = {ratio:.4g}")

    write_manifest(
        out,
        {"mode": args.mode, "config_hash": state.config_hash},
        state.config["seed"],
        dataset_id,
        sys.argv[1:] or ["diagnose"],
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffgt",
        description="Graph-diffusion recommender: ingest data, train, evaluate, diagnose.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="read interactions (+side info), build splits")
    p_ingest.add_argument("--data", required=True, help="interaction TSV: user<TAB>item[<TAB>...]")
    p_ingest.add_argument("--side", default=None, help="side-info TSV: id<TAB>attr|attr|...")
    p_ingest.add_argument("--side-class", default="item", choices=["user", "item"])
    p_ingest.add_argument("--top-n", type=int, default=10, help="similarity neighbours per entity")
    p_ingest.add_argument("--seed", type=int, default=0, help="split seed (test sets use seed..seed+9)")
    p_ingest.add_argument("--out", required=True)
    p_ingest.set_defaults(func=cmd_ingest)

    p_train = sub.add_parser("train", help="optimize the model on an ingested bundle")
    p_train.add_argument("--config", required=True, help="JSON run configuration")
    p_train.add_argument("--data", default=None, help="override config data_dir")
    p_train.add_argument("--ablate", default=None, metavar="VARIANT",
                         help="disable one component (-Direction, -Condition, -Transformer, -Side, -CL, -DiffL); use --ablate=-Name")
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="rank the catalog and report recall/ndcg")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", default=None, help="bundle dir (defaults to the checkpoint's)")
    p_eval.add_argument("--k", type=int, default=20)
    p_eval.add_argument("--out", default=None, help="report dir (default: alongside checkpoint)")
    p_eval.set_defaults(func=cmd_evaluate)

    p_diag = sub.add_parser("diagnose", help="SNR curves, SVD anisotropy, or timing table")
    p_diag.add_argument("--checkpoint", required=True)
    p_diag.add_argument("--mode", required=True, choices=["snr", "svd", "timing"])
    p_diag.add_argument("--data", default=None)
    p_diag.add_argument("--nodes", type=int, default=1000, help="synthetic graph size for timing")
    p_diag.add_argument("--out", required=True)
    p_diag.set_defaults(func=cmd_diagnose)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out", None) is None and args.command == "evaluate":
        args.out = str(Path(args.checkpoint).parent)
    try:
        return args.func(args)
    except IntegrityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ParseError, EmptyDatasetError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename or exc}", file=sys.stderr)
        return 2
    except (OSError, DiffGTError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
