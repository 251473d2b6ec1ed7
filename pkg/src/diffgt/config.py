"""Versioned JSON run configuration, dataset bundles, and run manifests.

One config document drives every module. Unknown keys are hard errors so
a typo in an ablation sweep cannot silently fall back to a default.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
from pathlib import Path

import numpy as np

from .data import DataSplit, InteractionGraph, SideFeatures
from .errors import ConfigError
from .losses import LossWeights
from .training import DiffusionConfig, ModelConfig, TrainConfig

CONFIG_VERSION = 1

DEFAULT_CONFIG = {
    "config_version": CONFIG_VERSION,
    "seed": 0,
    "data_dir": "",
    "model": {"dim": 64, "encoder_layers": 2, "denoiser_layers": 2, "compress_len": 64},
    "diffusion": {"steps": 50, "beta_start": 1e-4, "beta_end": 0.02, "sampled_steps": 5},
    "training": {
        "learning_rate": 1e-3,
        "batch_size": 2048,
        "max_epochs": 400,
        "patience": 50,
        "diffusion_weight": 0.5,
        "contrastive_weight": 0.1,
        "temperature": 0.2,
        "score_source": "denoised",
    },
    "ablation": {
        "direction": True,
        "condition": True,
        "transformer": True,
        "side_info": True,
        "contrastive": True,
        "diffusion_loss": True,
    },
}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def sha256_of(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _merge_section(defaults: dict, given: dict, path: str) -> dict:
    merged = dict(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {path}{key!r}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path}{key!r} must be an object")
            merged[key] = _merge_section(defaults[key], value, f"{path}{key}.")
        else:
            merged[key] = value
    return merged


def resolve_config(document: dict) -> dict:
    """Overlay a user document on the defaults, rejecting unknown keys."""
    config = _merge_section(DEFAULT_CONFIG, document, "")
    if config["config_version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config_version {config['config_version']}")
    return config


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return resolve_config(document)


def config_to_objects(config: dict) -> tuple[ModelConfig, DiffusionConfig, TrainConfig]:
    m = config["model"]
    d = config["diffusion"]
    t = config["training"]
    a = config["ablation"]
    model_cfg = ModelConfig(
        dim=m["dim"],
        encoder_layers=m["encoder_layers"],
        denoiser_layers=m["denoiser_layers"],
        compress_len=m["compress_len"],
    )
    diff_cfg = DiffusionConfig(
        steps=d["steps"],
        beta_start=d["beta_start"],
        beta_end=d["beta_end"],
        sampled_steps=d["sampled_steps"],
    )
    train_cfg = TrainConfig(
        seed=config["seed"],
        learning_rate=t["learning_rate"],
        batch_size=t["batch_size"],
        max_epochs=t["max_epochs"],
        patience=t["patience"],
        weights=LossWeights(t["diffusion_weight"], t["contrastive_weight"], t["temperature"]),
        score_source=t["score_source"],
        direction=a["direction"],
        condition=a["condition"],
        transformer=a["transformer"],
        side_info=a["side_info"],
        contrastive=a["contrastive"],
        diffusion_loss=a["diffusion_loss"],
    )
    return model_cfg, diff_cfg, train_cfg


# --- dataset bundle ----------------------------------------------------------

BUNDLE_VERSION = 1
BUNDLE_FILE = "bundle.json"
STATS_FILE = "stats.json"


def save_bundle(out_dir, graph: InteractionGraph, side: SideFeatures | None, data_split: DataSplit) -> str:
    """Serialize graph + side info + split; returns the dataset id (content hash)."""
    payload = {
        "format_version": BUNDLE_VERSION,
        "num_users": graph.num_users,
        "num_items": graph.num_items,
        "edges": [list(e) for e in graph.edges],
        "extra_links": [list(e) for e in graph.extra_links],
        "side": None
        if side is None
        else {
            "entity_class": side.entity_class,
            "attributes": side.attributes,
            "matrix": side.matrix.tolist(),
        },
        "split": {
            "train": [list(e) for e in data_split.train],
            "validation": [list(e) for e in data_split.validation],
            "test_sets": [[list(e) for e in ts] for ts in data_split.test_sets],
            "seeds": data_split.seeds,
        },
    }
    text = canonical_json(payload)
    Path(out_dir, BUNDLE_FILE).write_text(text, encoding="utf-8")
    return sha256_of(text)


def load_bundle(data_dir):
    """Returns (graph, side, split, dataset_id) from an ingest output directory."""
    path = Path(data_dir, BUNDLE_FILE)
    text = path.read_text(encoding="utf-8")
    payload = json.loads(text)
    if payload.get("format_version") != BUNDLE_VERSION:
        raise ConfigError(f"{path}: unsupported bundle version {payload.get('format_version')}")
    graph = InteractionGraph(
        num_users=payload["num_users"],
        num_items=payload["num_items"],
        edges=[tuple(e) for e in payload["edges"]],
        extra_links=[tuple(e) for e in payload["extra_links"]],
    )
    side = None
    if payload["side"] is not None:
        side = SideFeatures(
            entity_class=payload["side"]["entity_class"],
            attributes=payload["side"]["attributes"],
            matrix=np.array(payload["side"]["matrix"], dtype=np.float64).reshape(
                len(payload["side"]["matrix"]), -1
            ),
        )
    sp = payload["split"]
    data_split = DataSplit(
        train=[tuple(e) for e in sp["train"]],
        validation=[tuple(e) for e in sp["validation"]],
        test_sets=[[tuple(e) for e in ts] for ts in sp["test_sets"]],
        seeds=list(sp["seeds"]),
    )
    return graph, side, data_split, sha256_of(text)


# --- run manifest ------------------------------------------------------------


def source_revision() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            capture_output=True,
            text=True,
            timeout=10,
            cwd=Path(__file__).parent,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def write_manifest(out_dir, config: dict, seed: int, dataset_id: str, command_line: list) -> dict:
    """One manifest per artifact directory; the hash covers all config fields."""
    manifest = {
        "config_hash": sha256_of(canonical_json(config)),
        "seed": seed,
        "dataset_id": dataset_id,
        "source_revision": source_revision(),
        "output_dir": str(out_dir),
        "command_line": list(command_line),
    }
    Path(out_dir, "manifest.json").write_text(canonical_json(manifest), encoding="utf-8")
    return manifest
