"""Graph-diffusion recommendation library.

Pipeline: graph-encoded user/item embeddings, forward diffusion with
directional anisotropic noise, a conditioned linear-attention denoiser,
and a three-term ranking/reconstruction/contrastive objective, plus the
SNR and SVD diagnostics and the variant timing harness.
"""

from .data import DataSplit, InteractionGraph, SideFeatures, ingest, normalize_adjacency, split
from .diffusion import (
    DiffusionBatch,
    NoiseSchedule,
    directional_noise,
    forward_diffuse,
    make_schedule,
    reverse_posterior_mean,
    sample_reverse_steps,
)
from .losses import LossWeights, bpr_loss, contrastive_loss, diffusion_loss, total_loss
from .metrics import MetricReport, evaluate_embeddings, ndcg_at_k, recall_at_k
from .model import ModelState, load_checkpoint, predict_embeddings, save_checkpoint
from .rng import RandomSource
from .training import DiffusionConfig, ModelConfig, TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "DataSplit",
    "DiffusionBatch",
    "DiffusionConfig",
    "InteractionGraph",
    "LossWeights",
    "MetricReport",
    "ModelConfig",
    "ModelState",
    "NoiseSchedule",
    "RandomSource",
    "SideFeatures",
    "TrainConfig",
    "TrainResult",
    "bpr_loss",
    "contrastive_loss",
    "diffusion_loss",
    "directional_noise",
    "evaluate_embeddings",
    "forward_diffuse",
    "ingest",
    "load_checkpoint",
    "make_schedule",
    "ndcg_at_k",
    "normalize_adjacency",
    "predict_embeddings",
    "recall_at_k",
    "reverse_posterior_mean",
    "sample_reverse_steps",
    "save_checkpoint",
    "split",
    "total_loss",
    "train",
]
