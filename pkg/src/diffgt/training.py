"""Optimizer loop: three-term objective, early stopping, training log.

A single thread owns the parameters; every stochastic choice is drawn
from numbered child streams of the run seed, so one seed pins the whole
trajectory bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .data import DataSplit, InteractionGraph, normalize_adjacency
from .diffusion import forward_diffuse, make_schedule, noise_stats, sample_reverse_steps
from .errors import ConfigError, DivergenceError
from .losses import LossWeights, bpr_loss, contrastive_loss, diffusion_loss, total_loss
from .model import (
    bind_parameters,
    build_condition,
    condition_operator,
    denoise,
    denoise_weighted,
    encode,
    init_denoiser,
    init_encoder,
    named_parameters,
    xavier_uniform,
)
from .rng import RandomSource

ABLATION_VARIANTS = ("-Direction", "-Condition", "-Transformer", "-Side", "-CL", "-DiffL")

# child-stream labels of the run seed
_STREAM_INIT = 10
_STREAM_VAL_NEG = 20
_STREAM_EPOCH_NOISE = 1_000_000
_STREAM_EPOCH_NEG = 2_000_000
_STREAM_EPOCH_STEPS = 3_000_000
_STREAM_EPOCH_PERM = 4_000_000


@dataclass
class ModelConfig:
    dim: int = 64
    encoder_layers: int = 2
    denoiser_layers: int = 2
    compress_len: int = 64


@dataclass
class DiffusionConfig:
    steps: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.02
    sampled_steps: int = 5


@dataclass
class TrainConfig:
    """Everything the optimizer loop needs, ablation switches included.

    Each switch maps to one named variant: direction -> "-Direction",
    condition -> "-Condition", transformer -> "-Transformer", side_info ->
    "-Side", contrastive -> "-CL", diffusion_loss -> "-DiffL".
    """

    seed: int = 0
    learning_rate: float = 1e-3
    batch_size: int = 2048
    max_epochs: int = 200
    patience: int = 50
    weights: LossWeights = field(default_factory=LossWeights)
    score_source: str = "denoised"  # or "encoded"
    direction: bool = True
    condition: bool = True
    transformer: bool = True
    side_info: bool = True
    contrastive: bool = True
    diffusion_loss: bool = True

    @property
    def noise_mode(self) -> str:
        return "directional" if self.direction else "isotropic"


def apply_ablation(cfg: TrainConfig, variant: str) -> TrainConfig:
    """Flip the single switch named by a variant label."""
    if variant not in ABLATION_VARIANTS:
        raise ConfigError(f"unknown ablation variant {variant!r}; valid: {', '.join(ABLATION_VARIANTS)}")
    flag = {
        "-Direction": "direction",
        "-Condition": "condition",
        "-Transformer": "transformer",
        "-Side": "side_info",
        "-CL": "contrastive",
        "-DiffL": "diffusion_loss",
    }[variant]
    return replace(cfg, **{flag: False})


class Adam:
    """Adaptive moment estimation over a flat name -> array parameter dict."""

    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict) -> None:
        self.step_count += 1
        b1c = 1.0 - self.beta1**self.step_count
        b2c = 1.0 - self.beta2**self.step_count
        for name in sorted(self.params):
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            update = (self.m[name] / b1c) / (np.sqrt(self.v[name] / b2c) + self.eps)
            self.params[name] -= self.lr * update


@dataclass
class TrainResult:
    parameters: dict  # best-validation copies, name -> array
    log_rows: list  # (epoch, bpr, diff, cl, total, val_loss)
    best_epoch: int
    best_val: float
    epochs_run: int
    uses_weighted_denoiser: bool


LOG_HEADER = "epoch,bpr,diff,cl,total,val_loss"


def log_rows_to_csv(rows) -> str:
    lines = [LOG_HEADER]
    for epoch, bpr, diff, cl, total, val in rows:
        lines.append(f"{epoch},{bpr:.17g},{diff:.17g},{cl:.17g},{total:.17g},{val:.17g}")
    return "\n".join(lines) + "\n"


def _sample_negative(rng: RandomSource, interacted: set, num_items: int) -> int:
    neg = int(rng.integers(0, num_items))
    tries = 0
    while neg in interacted and tries < 100:
        neg = int(rng.integers(0, num_items))
        tries += 1
    return neg


def _validation_embeddings(graph, adj_norm, enc, den, weighted, cfg: TrainConfig, cond_op):
    """Deterministic forward used for validation: denoise the encoding at step 1."""
    x_g = encode(adj_norm, enc)
    if not cfg.transformer:
        x_hat = denoise_weighted(x_g, weighted)
    else:
        cond = build_condition(graph, x_g, None, operator=cond_op)
        x_hat = denoise(
            x_g, 1, cond, den, graph.num_users, graph.num_items, use_condition=cfg.condition
        )
    return x_g, (x_hat if cfg.score_source == "denoised" else x_g)


def train(
    graph: InteractionGraph,
    split: DataSplit,
    model_cfg: ModelConfig,
    diff_cfg: DiffusionConfig,
    cfg: TrainConfig,
) -> TrainResult:
    """Run the full optimization and return best-validation parameters + log.

    Per epoch: encode, corrupt to a step drawn from the epoch's sampled
    reverse steps, denoise under the user condition, combine the three
    losses over minibatches, and apply an adaptive-moment step. Training
    stops once the validation ranking loss has not improved for
    ``cfg.patience`` epochs.
    """
    if cfg.score_source not in ("denoised", "encoded"):
        raise ConfigError(f"unknown score_source {cfg.score_source!r}")
    root = RandomSource(cfg.seed)
    schedule = make_schedule(diff_cfg.steps, diff_cfg.beta_start, diff_cfg.beta_end)
    adj_norm = normalize_adjacency(graph, enriched=cfg.side_info)

    init_rng = root.child(_STREAM_INIT)
    enc = init_encoder(init_rng, graph.num_nodes, model_cfg.dim, model_cfg.encoder_layers)
    den = init_denoiser(
        init_rng,
        graph.num_nodes,
        model_cfg.dim,
        model_cfg.denoiser_layers,
        model_cfg.compress_len,
        diff_cfg.steps,
    )
    weighted = None if cfg.transformer else xavier_uniform(init_rng, model_cfg.dim, model_cfg.dim)
    params = named_parameters(enc, den, weighted)
    optimizer = Adam(params, cfg.learning_rate)

    cond_op = condition_operator(graph, split.train)
    train_edges = np.array(split.train, dtype=np.int64)
    train_items = [set() for _ in range(graph.num_users)]
    for u, i in split.train:
        train_items[u].add(i)

    # fixed validation triples: one seeded negative per held-out positive
    known = [set(s) for s in train_items]
    for u, i in split.validation:
        known[u].add(i)
    val_rng = root.child(_STREAM_VAL_NEG)
    val_triples = np.array(
        [(u, i, _sample_negative(val_rng, known[u], graph.num_items)) for u, i in split.validation],
        dtype=np.int64,
    )

    def validation_loss() -> float:
        if len(val_triples) == 0:
            return float("nan")
        _, x_score = _validation_embeddings(graph, adj_norm, enc, den, weighted, cfg, cond_op)
        users = x_score[val_triples[:, 0]]
        pos = x_score[graph.num_users + val_triples[:, 1]]
        neg = x_score[graph.num_users + val_triples[:, 2]]
        return float(bpr_loss((users * pos).sum(axis=1), (users * neg).sum(axis=1)))

    log_rows = []
    best_val = np.inf
    best_epoch = 0
    best_params = {k: v.copy() for k, v in params.items()}
    last_finite = {"epoch": 0, "losses": None}

    num_edges = len(train_edges)
    for epoch in range(1, cfg.max_epochs + 1):
        steps = sample_reverse_steps(diff_cfg.steps, diff_cfg.sampled_steps, root.child(_STREAM_EPOCH_STEPS + epoch))
        noise_rng = root.child(_STREAM_EPOCH_NOISE + epoch)
        neg_rng = root.child(_STREAM_EPOCH_NEG + epoch)
        order = root.child(_STREAM_EPOCH_PERM + epoch).permutation(num_edges)
        epoch_stats = noise_stats(ad.value_of(encode(adj_norm, enc)))

        sums = np.zeros(4)  # bpr, diff, cl, total
        num_batches = 0
        for b_start in range(0, num_edges, cfg.batch_size):
            batch = train_edges[order[b_start : b_start + cfg.batch_size]]
            users = batch[:, 0]
            pos_items = batch[:, 1]
            neg_items = np.array(
                [_sample_negative(neg_rng, train_items[u], graph.num_items) for u in users],
                dtype=np.int64,
            )
            t = steps[num_batches % len(steps)]

            tape = ad.Tape()
            nodes = {k: tape.watch(k, v) for k, v in params.items()}
            enc_n, den_n = bind_parameters(enc, den, nodes)
            x_g = encode(adj_norm, enc_n)
            noised = forward_diffuse(
                ad.value_of(x_g), t, schedule, cfg.noise_mode, noise_rng, stats=epoch_stats
            )
            ab = schedule.alpha_bars[t - 1]
            x_t = ad.add(ad.mul(x_g, np.sqrt(ab)), np.sqrt(1.0 - ab) * noised.noise)
            if cfg.transformer:
                cond = build_condition(graph, x_g, None, operator=cond_op)
                x_hat = denoise(
                    x_t, t, cond, den_n, graph.num_users, graph.num_items, use_condition=cfg.condition
                )
            else:
                x_hat = denoise_weighted(x_t, nodes["den.weighted"])
            x_score = x_hat if cfg.score_source == "denoised" else x_g

            u_rows = ad.take_rows(x_score, users)
            p_rows = ad.take_rows(x_score, graph.num_users + pos_items)
            n_rows = ad.take_rows(x_score, graph.num_users + neg_items)
            l_bpr = bpr_loss(
                ad.sum_(ad.mul(u_rows, p_rows), axis=1), ad.sum_(ad.mul(u_rows, n_rows), axis=1)
            )
            l_diff = diffusion_loss(x_g, x_hat) if cfg.diffusion_loss else 0.0
            if cfg.contrastive:
                uu = np.unique(users)
                ii = graph.num_users + np.unique(pos_items)
                cl_u = contrastive_loss(
                    ad.take_rows(x_g, uu), ad.take_rows(x_hat, uu), cfg.weights.temperature
                )
                cl_i = contrastive_loss(
                    ad.take_rows(x_g, ii), ad.take_rows(x_hat, ii), cfg.weights.temperature
                )
                l_cl = ad.add(ad.mul(cl_u, len(uu) / (len(uu) + len(ii))), ad.mul(cl_i, len(ii) / (len(uu) + len(ii))))
            else:
                l_cl = 0.0
            l_total = total_loss(
                l_bpr, l_diff, l_cl, cfg.weights,
                use_diffusion=cfg.diffusion_loss, use_contrastive=cfg.contrastive,
            )

            values = [float(ad.value_of(x)) for x in (l_bpr, l_diff, l_cl, l_total)]
            if not all(np.isfinite(v) for v in values):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}",
                    diagnostic={
                        "epoch": epoch,
                        "batch": num_batches,
                        "losses": values,
                        "last_finite": last_finite,
                    },
                )
            grads = tape.gradients(l_total)
            optimizer.step(grads)
            sums += values
            num_batches += 1
            last_finite = {"epoch": epoch, "losses": values}

        val = validation_loss()
        if not np.isfinite(val) and len(val_triples) > 0:
            raise DivergenceError(
                f"non-finite validation loss at epoch {epoch}",
                diagnostic={"epoch": epoch, "last_finite": last_finite},
            )
        means = sums / max(num_batches, 1)
        log_rows.append((epoch, means[0], means[1], means[2], means[3], val))

        if len(val_triples) == 0:
            # no validation signal (tiny splits): keep the newest parameters
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
        elif val < best_val:
            best_val = val
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
        elif epoch - best_epoch >= cfg.patience:
            break

    return TrainResult(
        parameters=best_params,
        log_rows=log_rows,
        best_epoch=best_epoch,
        best_val=float(best_val) if np.isfinite(best_val) else float("nan"),
        epochs_run=len(log_rows),
        uses_weighted_denoiser=not cfg.transformer,
    )
