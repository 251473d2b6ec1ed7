"""Diagnostics: SNR-vs-step curves, SVD anisotropy export, ablation pairs,
and the wall-clock timing harness for the diffusion variants.

Evaluation-grade numbers come from metrics.py; this module quantifies the
geometry and cost claims instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .data import InteractionGraph, normalize_adjacency
from .diffusion import forward_diffuse, make_schedule, noise_stats, sample_reverse_steps
from .errors import DegenerateInputError
from .linalg import svd_top2
from .metrics import MetricReport, evaluate_embeddings
from .model import (
    GraphEncoderParams,
    bind_parameters,
    build_condition,
    denoise,
    encode,
    inference_embeddings,
    init_denoiser,
    init_encoder,
)
from .rng import RandomSource
from .synth import bipartite_random
from .training import DiffusionConfig, ModelConfig, TrainConfig, apply_ablation, train

RIDGE = 1e-6


def fisher_ratio(points: np.ndarray, labels, ridge: float = RIDGE) -> tuple[float, bool]:
    """Trace(between-class scatter) / trace(within-class scatter).

    A singular (zero-trace) within-class scatter gets a ridge of
    ``ridge * I``; the returned flag reports that it was needed.
    """
    labels = np.asarray(labels)
    classes = [c for c in np.unique(labels) if c >= 0]
    if len(classes) < 2:
        raise DegenerateInputError("need at least two classes for a Fisher ratio")
    overall = points[np.isin(labels, classes)].mean(axis=0)
    within = 0.0
    between = 0.0
    for c in classes:
        rows = points[labels == c]
        if len(rows) < 2:
            raise DegenerateInputError(f"class {c} has fewer than two rows")
        mu = rows.mean(axis=0)
        within += float(((rows - mu) ** 2).sum())
        between += len(rows) * float(((mu - overall) ** 2).sum())
    ridged = within == 0.0
    if ridged:
        within = ridge * points.shape[1]
    return between / within, ridged


@dataclass
class SnrCurve:
    """Fisher-ratio SNR of the noisy embeddings along the forward process."""

    noise_mode: str
    steps: list[int]
    snr: list[float]
    ridged: list[bool] = field(default_factory=list)


def snr_curve(x0, labels, schedule, noise_mode: str, steps, rng: RandomSource) -> SnrCurve:
    """Diffuse x0 to each step and measure class separability there.

    Directional noise uses the per-column stats of x0 itself, mirroring
    how training recomputes them from the live embedding table.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    stats = noise_stats(x0)
    curve = SnrCurve(noise_mode=noise_mode, steps=[], snr=[], ridged=[])
    for t in steps:
        batch = forward_diffuse(x0, t, schedule, noise_mode, rng, stats=stats)
        ratio, ridged = fisher_ratio(batch.x_t, labels)
        curve.steps.append(int(t))
        curve.snr.append(ratio)
        curve.ridged.append(ridged)
    return curve


def snr_curves_csv(curves: list[SnrCurve]) -> str:
    header = "step," + ",".join(c.noise_mode for c in curves)
    steps = curves[0].steps
    lines = [header]
    for row, t in enumerate(steps):
        vals = ",".join(f"{c.snr[row]:.10g}" for c in curves)
        lines.append(f"{t},{vals}")
    return "\n".join(lines) + "\n"


def svd_export(embeddings, labels) -> tuple[np.ndarray, np.ndarray, float]:
    """Top-2 projection with labels plus the anisotropy ratio sigma1/sigma2."""
    proj, sv = svd_top2(embeddings)
    ratio = float(sv[0] / sv[1]) if sv[1] > 0 else float("inf")
    return proj, np.asarray(labels), ratio


def svd_export_csv(proj: np.ndarray, labels, ratio: float) -> str:
    lines = [f"# anisotropy_ratio={ratio:.10g}", "x,y,label"]
    for (x, y), lab in zip(proj, np.asarray(labels)):
        lines.append(f"{x:.10g},{y:.10g},{lab}")
    return "\n".join(lines) + "\n"


@dataclass
class AblationResult:
    variant: str
    base_reports: list[MetricReport]
    variant_reports: list[MetricReport]

    @property
    def base_recall_mean(self) -> float:
        return float(np.mean([r.recall_mean for r in self.base_reports]))

    @property
    def variant_recall_mean(self) -> float:
        return float(np.mean([r.recall_mean for r in self.variant_reports]))

    @property
    def per_seed_recall_diff(self) -> list[float]:
        return [
            b.recall_mean - v.recall_mean
            for b, v in zip(self.base_reports, self.variant_reports)
        ]


def trained_embeddings(graph, data_split, model_cfg, diff_cfg, cfg, parameters, uses_weighted):
    """Rebuild param structs from a trained name->array dict and run inference."""
    enc = GraphEncoderParams(
        num_layers=model_cfg.encoder_layers, dim=model_cfg.dim, embed_table=parameters["embed"]
    )
    den = init_denoiser(
        RandomSource(0),
        graph.num_nodes,
        model_cfg.dim,
        model_cfg.denoiser_layers,
        model_cfg.compress_len,
        diff_cfg.steps,
    )
    _, den = bind_parameters(enc, den, parameters)
    weighted = parameters.get("den.weighted") if uses_weighted else None
    adj = normalize_adjacency(graph, enriched=cfg.side_info)
    return inference_embeddings(
        graph,
        adj,
        enc,
        den,
        weighted,
        data_split.train,
        use_condition=cfg.condition,
        score_source=cfg.score_source,
    )


def _train_and_eval(graph, data_split, model_cfg, diff_cfg, cfg, k):
    result = train(graph, data_split, model_cfg, diff_cfg, cfg)
    _, x_final = trained_embeddings(
        graph, data_split, model_cfg, diff_cfg, cfg, result.parameters, result.uses_weighted_denoiser
    )
    return evaluate_embeddings(np.asarray(x_final), graph, data_split, k)


def ablate(
    graph: InteractionGraph,
    data_split,
    model_cfg: ModelConfig,
    diff_cfg: DiffusionConfig,
    base_cfg: TrainConfig,
    variant: str,
    seeds,
    k: int = 20,
) -> AblationResult:
    """Train base and variant under identical seeds/split; report both sides."""
    from dataclasses import replace

    base_reports, variant_reports = [], []
    for seed in seeds:
        seeded = replace(base_cfg, seed=seed)
        base_reports.append(_train_and_eval(graph, data_split, model_cfg, diff_cfg, seeded, k))
        variant_cfg = apply_ablation(seeded, variant)
        variant_reports.append(
            _train_and_eval(graph, data_split, model_cfg, diff_cfg, variant_cfg, k)
        )
    return AblationResult(variant=variant, base_reports=base_reports, variant_reports=variant_reports)


@dataclass
class TimingReport:
    """Wall-clock cost of one diffusion variant on the shared synthetic graph."""

    variant: str
    forward_seconds: float
    reverse_seconds: float
    recall: float | None = None
    ndcg: float | None = None


TIMING_VARIANTS = (
    "discrete",
    "continuous",
    "continuous-linear",
    "continuous-sampling",
    "combined",
)


def _normalize_bits(bits: np.ndarray) -> sp.csr_matrix:
    adj = sp.csr_matrix(bits)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / np.sqrt(deg[nz])
    d = sp.diags(inv)
    return (d @ adj @ d).tocsr()


def timing_harness(
    num_nodes: int = 1000,
    num_steps: int = 50,
    sampled_steps: int = 5,
    variants=TIMING_VARIANTS,
    seed: int = 0,
    dim: int = 64,
    encoder_layers: int = 2,
    denoiser_layers: int = 2,
    compress_len: int = 64,
    edges_per_node: int = 5,
) -> list[TimingReport]:
    """Measure forward/reverse wall time per variant on one seeded graph.

    Discrete forward evolves the edge set and re-encodes each step (the
    transition-matrix route); continuous forward encodes once and
    interpolates. Reverse passes run the denoiser per step: full attention
    for the quadratic variants, compressed attention for the linear ones,
    over the sampled subset of steps where the variant says so.
    """
    rng = RandomSource(seed)
    n_users = num_nodes // 2
    graph = bipartite_random(n_users, num_nodes - n_users, edges_per_node * num_nodes, rng.child(1))
    adj_norm = normalize_adjacency(graph)
    enc = init_encoder(rng.child(2), graph.num_nodes, dim, encoder_layers)
    den = init_denoiser(rng.child(3), graph.num_nodes, dim, denoiser_layers, compress_len, num_steps)
    schedule = make_schedule(num_steps)
    cond = build_condition(graph, encode(adj_norm, enc), graph.edges)
    flip_probs = np.minimum(schedule.betas * 5.0, 0.5)

    def forward_continuous() -> np.ndarray:
        x0 = encode(adj_norm, enc)
        noise_rng = rng.child(10)
        x_t = x0
        for t in range(1, num_steps + 1):
            batch = forward_diffuse(x0, t, schedule, "isotropic", noise_rng)
            x_t = batch.x_t
        return x_t

    def forward_discrete() -> np.ndarray:
        # per step: flip edge states through the 2x2 transition, then re-encode
        bits = graph.base_adjacency.toarray()
        chain_rng = rng.child(11)
        iu, ju = np.triu_indices(bits.shape[0], k=1)
        state = bits[iu, ju].astype(np.int64)
        out = None
        for t in range(num_steps):
            flips = chain_rng.uniform(0.0, 1.0, state.shape) < flip_probs[t]
            state = np.where(flips, 1 - state, state)
            stepped = np.zeros_like(bits)
            stepped[iu, ju] = state
            stepped[ju, iu] = state
            out = encode(_normalize_bits(stepped), enc)
        return out

    def reverse_pass(steps, full_attention: bool) -> np.ndarray:
        x = encode(adj_norm, enc)
        for t in steps:
            x = denoise(
                x,
                t,
                cond,
                den,
                graph.num_users,
                graph.num_items,
                full_attention=full_attention,
            )
        return x

    all_steps = list(range(num_steps, 0, -1))
    sampled = sample_reverse_steps(num_steps, sampled_steps, rng.child(12))
    plans = {
        "discrete": (forward_discrete, all_steps, True),
        "continuous": (forward_continuous, all_steps, True),
        "continuous-linear": (forward_continuous, all_steps, False),
        "continuous-sampling": (forward_continuous, sampled, True),
        "combined": (forward_continuous, sampled, False),
    }
    reports = []
    for variant in variants:
        forward_fn, steps, full = plans[variant]
        start = time.perf_counter()
        forward_fn()
        forward_seconds = time.perf_counter() - start
        start = time.perf_counter()
        reverse_pass(steps, full)
        reverse_seconds = time.perf_counter() - start
        reports.append(
            TimingReport(variant=variant, forward_seconds=forward_seconds, reverse_seconds=reverse_seconds)
        )
    return reports


def timing_csv(reports: list[TimingReport]) -> str:
    lines = ["variant,forward_seconds,reverse_seconds,recall,ndcg"]
    for r in reports:
        recall = "" if r.recall is None else f"{r.recall:.10g}"
        ndcg = "" if r.ndcg is None else f"{r.ndcg:.10g}"
        lines.append(f"{r.variant},{r.forward_seconds:.6f},{r.reverse_seconds:.6f},{recall},{ndcg}")
    return "\n".join(lines) + "\n"
