"""Cascaded architecture: light graph-convolution encoder feeding a
conditioned linear-attention denoiser, plus the recommendation scoring head.

Every forward function accepts either plain float64 arrays or autodiff
Nodes for its trainable inputs, so the same code serves training (taped)
and inference (untaped). Forward passes never mutate parameters and are
safe to run concurrently; updates are the trainer's job.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .data import InteractionGraph
from .diffusion import NoiseSchedule, make_schedule
from .errors import ShapeError
from .rng import RandomSource


def xavier_uniform(rng: RandomSource, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, (rows, cols))


def sinusoidal_table(num_steps: int, dim: int) -> np.ndarray:
    """Fixed sin/cos step embeddings for t = 1..num_steps."""
    table = np.zeros((num_steps, dim))
    positions = np.arange(1, num_steps + 1, dtype=np.float64)[:, None]
    idx = np.arange(0, dim, 2, dtype=np.float64)
    freq = 1.0 / np.power(10000.0, idx / dim)
    angles = positions * freq[None, :]
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)[:, : table[:, 1::2].shape[1]]
    return table


@dataclass
class GraphEncoderParams:
    """Layer-averaged propagation depth plus the trainable embedding table."""

    num_layers: int
    dim: int
    embed_table: object  # N x d array (or Node while taped)


def init_encoder(rng: RandomSource, num_nodes: int, dim: int, num_layers: int) -> GraphEncoderParams:
    if num_layers < 0:
        raise ValueError(f"encoder depth must be >= 0, got {num_layers}")
    return GraphEncoderParams(num_layers=num_layers, dim=dim, embed_table=xavier_uniform(rng, num_nodes, dim))


def encode(adj_norm: sp.csr_matrix, params: GraphEncoderParams):
    """Average of powers: (X + A X + ... + A^L X) / (1 + L), by iterated propagation."""
    h = params.embed_table
    acc = h
    for _ in range(params.num_layers):
        h = ad.spmm(adj_norm, h)
        acc = ad.add(acc, h)
    return ad.mul(acc, 1.0 / (1.0 + params.num_layers))


@dataclass
class ConditionVector:
    """Per-user mean of train-interacted item embeddings, plus the global item mean.

    The item mean doubles as the condition for item tokens and as the
    fallback for users with no training interactions.
    """

    users: object  # N_u x d
    item_mean: object  # 1 x d


def condition_operator(graph: InteractionGraph, train_edges) -> tuple[sp.csr_matrix, np.ndarray]:
    """Constant pieces of the condition: user averaging matrix + fallback mask.

    Returns ``(user_avg, needs_fallback)`` where ``user_avg`` is an
    N_u x N sparse matrix averaging each user's train item rows and
    ``needs_fallback`` is an N_u x 1 indicator of users with no train items.
    """
    counts = np.zeros(graph.num_users)
    rows, cols = [], []
    for u, i in train_edges:
        counts[u] += 1
        rows.append(u)
        cols.append(graph.item_node(i))
    data = [1.0 / counts[u] for u in rows]
    user_avg = sp.csr_matrix(
        (data, (rows, cols)), shape=(graph.num_users, graph.num_nodes)
    )
    needs_fallback = (counts == 0).astype(np.float64)[:, None]
    return user_avg, needs_fallback


def build_condition(graph: InteractionGraph, x_g, train_edges, operator=None) -> ConditionVector:
    """Condition rows from the encoder output, using training interactions only."""
    user_avg, needs_fallback = operator if operator is not None else condition_operator(graph, train_edges)
    item_rows = ad.take_rows(x_g, np.arange(graph.num_users, graph.num_nodes))
    item_mean = ad.mul(ad.sum_(item_rows, axis=0, keepdims=True), 1.0 / graph.num_items)
    averaged = ad.spmm(user_avg, x_g)
    users = ad.add(averaged, ad.matmul(needs_fallback, item_mean))
    return ConditionVector(users=users, item_mean=item_mean)


def _condition_tokens(cond: ConditionVector, num_users: int, num_items: int):
    """Stack user condition rows over tiled item-mean rows (as one tape op chain)."""
    n = num_users + num_items
    select_users = sp.csr_matrix(
        (np.ones(num_users), (np.arange(num_users), np.arange(num_users))), shape=(n, num_users)
    )
    item_indicator = np.zeros((n, 1))
    item_indicator[num_users:] = 1.0
    return ad.add(ad.spmm(select_users, cond.users), ad.matmul(item_indicator, cond.item_mean))


@dataclass
class DenoiserParams:
    """Projection stack of the conditioned linear-attention denoiser.

    ``compress`` maps the token axis down to ``compress_len`` before the
    softmax (shared by keys and values); with more tokens than
    ``compress_len`` the per-layer cost is linear in the token count.
    ``step_table`` holds the fixed sinusoidal step embeddings.
    """

    num_layers: int
    dim: int
    compress_len: int
    in_proj: object  # 2d x d
    query: list
    key: list
    value: list
    compress: object  # compress_len x N
    out_proj: object  # d x d
    step_table: np.ndarray  # T x d, not trainable


def init_denoiser(
    rng: RandomSource,
    num_tokens: int,
    dim: int,
    num_layers: int,
    compress_len: int,
    num_steps: int,
) -> DenoiserParams:
    return DenoiserParams(
        num_layers=num_layers,
        dim=dim,
        compress_len=compress_len,
        in_proj=xavier_uniform(rng, 2 * dim, dim),
        query=[xavier_uniform(rng, dim, dim) for _ in range(num_layers)],
        key=[xavier_uniform(rng, dim, dim) for _ in range(num_layers)],
        value=[xavier_uniform(rng, dim, dim) for _ in range(num_layers)],
        compress=xavier_uniform(rng, compress_len, num_tokens),
        out_proj=xavier_uniform(rng, dim, dim),
        step_table=sinusoidal_table(num_steps, dim),
    )


def identity_in_proj(dim: int) -> np.ndarray:
    """Input projection that passes the noisy slice through untouched."""
    return np.vstack([np.eye(dim), np.zeros((dim, dim))])


def attention_weights(h, pe, wq, wk, compress, dim: int, full: bool):
    """Row-stochastic attention matrix for one layer (softmaxed logits)."""
    a_in = ad.add(h, pe)
    q = ad.matmul(a_in, wq)
    k = ad.matmul(a_in, wk)
    n = ad.value_of(h).shape[0]
    if not full and compress is not None and n > ad.value_of(compress).shape[0]:
        k = ad.matmul(compress, k)
    logits = ad.mul(ad.matmul(q, ad.transpose(k)), 1.0 / np.sqrt(dim))
    return ad.softmax_rows(logits)


def denoise(
    x_t,
    t: int,
    cond: ConditionVector,
    params: DenoiserParams,
    num_users: int,
    num_items: int,
    use_condition: bool = True,
    full_attention: bool = False,
):
    """Predict the clean embeddings from a noisy snapshot at step t.

    Tokens are the rows of x_t concatenated with their condition row
    (item tokens share the global item-mean condition), projected to d.
    The step index enters through an additive sinusoidal embedding on the
    attention branch; residual paths carry the token stream itself.
    """
    n = num_users + num_items
    if ad.value_of(x_t).shape[0] != n:
        raise ShapeError(f"expected {n} token rows, got {ad.value_of(x_t).shape}")
    if not 1 <= t <= params.step_table.shape[0]:
        raise ShapeError(f"step {t} outside step table of length {params.step_table.shape[0]}")
    if use_condition:
        cond_tokens = _condition_tokens(cond, num_users, num_items)
    else:
        cond_tokens = np.zeros((n, params.dim))
    tokens = ad.concat_cols(x_t, cond_tokens)
    h = ad.matmul(tokens, params.in_proj)
    pe = params.step_table[t - 1 : t]
    compress_n = ad.value_of(params.compress).shape[1]
    use_compress = (not full_attention) and n > params.compress_len
    if use_compress and compress_n != n:
        raise ShapeError(f"compression built for {compress_n} tokens, got {n}")
    for layer in range(params.num_layers):
        a_in = ad.add(h, pe)
        q = ad.matmul(a_in, params.query[layer])
        k = ad.matmul(a_in, params.key[layer])
        v = ad.matmul(a_in, params.value[layer])
        if use_compress:
            k = ad.matmul(params.compress, k)
            v = ad.matmul(params.compress, v)
        logits = ad.mul(ad.matmul(q, ad.transpose(k)), 1.0 / np.sqrt(params.dim))
        attn = ad.softmax_rows(logits)
        h = ad.add(h, ad.matmul(attn, v))
    return ad.add(h, ad.matmul(h, params.out_proj))


def denoise_weighted(x_t, weight):
    """Single trainable weighted matrix standing in for the transformer."""
    return ad.matmul(x_t, weight)


def score_matrix(x_final, num_users: int, users=None):
    """Inner-product scores: selected users in rows, all items in columns."""
    x = ad.value_of(x_final)
    user_rows = x[:num_users] if users is None else x[np.asarray(users, dtype=np.intp)]
    return user_rows @ x[num_users:].T


def mask_interactions(scores: np.ndarray, items_by_user, value: float = -np.inf) -> np.ndarray:
    """Set already-interacted item scores to -inf so they never rank."""
    out = scores.copy()
    for u, items in enumerate(items_by_user):
        if items:
            out[u, list(items)] = value
    return out


# --- trainable parameter plumbing -----------------------------------------


def named_parameters(enc: GraphEncoderParams, den: DenoiserParams, weighted=None) -> dict:
    """Flat name -> array view of every trainable matrix."""
    params = {"embed": enc.embed_table}
    if weighted is not None:
        params["den.weighted"] = weighted
        return params
    params["den.in_proj"] = den.in_proj
    for i in range(den.num_layers):
        params[f"den.q{i}"] = den.query[i]
        params[f"den.k{i}"] = den.key[i]
        params[f"den.v{i}"] = den.value[i]
    params["den.compress"] = den.compress
    params["den.out_proj"] = den.out_proj
    return params


def bind_parameters(enc: GraphEncoderParams, den: DenoiserParams, mapping: dict):
    """Shadow copies of the param structs with entries taken from ``mapping``.

    Used to swap taped Nodes (or updated arrays) in for the raw matrices.
    """
    enc2 = replace(enc, embed_table=mapping.get("embed", enc.embed_table))
    den2 = replace(
        den,
        in_proj=mapping.get("den.in_proj", den.in_proj),
        query=[mapping.get(f"den.q{i}", den.query[i]) for i in range(den.num_layers)],
        key=[mapping.get(f"den.k{i}", den.key[i]) for i in range(den.num_layers)],
        value=[mapping.get(f"den.v{i}", den.value[i]) for i in range(den.num_layers)],
        compress=mapping.get("den.compress", den.compress),
        out_proj=mapping.get("den.out_proj", den.out_proj),
    )
    return enc2, den2


# --- checkpoint container ---------------------------------------------------

CHECKPOINT_VERSION = 1


@dataclass
class ModelState:
    """Everything needed to score and diagnose: params, schedule, config."""

    encoder: GraphEncoderParams
    denoiser: DenoiserParams
    weighted: np.ndarray | None
    schedule: NoiseSchedule
    config: dict
    config_hash: str
    dataset_id: str
    num_users: int
    num_items: int


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype=np.float64).reshape(d["shape"]).copy()


def config_digest(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


def save_checkpoint(path, state: ModelState) -> None:
    arrays = named_parameters(state.encoder, state.denoiser, state.weighted)
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": state.config,
        "config_hash": state.config_hash,
        "dataset_id": state.dataset_id,
        "num_users": state.num_users,
        "num_items": state.num_items,
        "uses_weighted_denoiser": state.weighted is not None,
        "params": {name: _encode_array(np.asarray(arr)) for name, arr in sorted(arrays.items())},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path) -> ModelState:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ShapeError(f"unsupported checkpoint version {payload.get('format_version')}")
    cfg = payload["config"]
    arrays = {name: _decode_array(d) for name, d in payload["params"].items()}
    model_cfg = cfg["model"]
    diff_cfg = cfg["diffusion"]
    enc = GraphEncoderParams(
        num_layers=model_cfg["encoder_layers"], dim=model_cfg["dim"], embed_table=arrays["embed"]
    )
    num_steps = diff_cfg["steps"]
    den = DenoiserParams(
        num_layers=model_cfg["denoiser_layers"],
        dim=model_cfg["dim"],
        compress_len=model_cfg["compress_len"],
        in_proj=arrays.get("den.in_proj", np.zeros((2 * model_cfg["dim"], model_cfg["dim"]))),
        query=[arrays[f"den.q{i}"] for i in range(model_cfg["denoiser_layers"]) if f"den.q{i}" in arrays],
        key=[arrays[f"den.k{i}"] for i in range(model_cfg["denoiser_layers"]) if f"den.k{i}" in arrays],
        value=[arrays[f"den.v{i}"] for i in range(model_cfg["denoiser_layers"]) if f"den.v{i}" in arrays],
        compress=arrays.get("den.compress", np.zeros((model_cfg["compress_len"], 0))),
        out_proj=arrays.get("den.out_proj", np.zeros((model_cfg["dim"], model_cfg["dim"]))),
        step_table=sinusoidal_table(num_steps, model_cfg["dim"]),
    )
    weighted = arrays.get("den.weighted")
    schedule = make_schedule(num_steps, diff_cfg["beta_start"], diff_cfg["beta_end"])
    return ModelState(
        encoder=enc,
        denoiser=den,
        weighted=weighted,
        schedule=schedule,
        config=cfg,
        config_hash=payload["config_hash"],
        dataset_id=payload["dataset_id"],
        num_users=payload["num_users"],
        num_items=payload["num_items"],
    )


def inference_embeddings(
    graph: InteractionGraph,
    adj_norm,
    encoder: GraphEncoderParams,
    denoiser: DenoiserParams | None,
    weighted,
    train_edges,
    use_condition: bool = True,
    score_source: str = "denoised",
):
    """Deterministic inference: encode, then denoise the encoder output once.

    The encoder output is treated as the step-1 noisy input ("directly
    denoise" at the smallest step) so no sampling enters evaluation.
    Returns ``(encoded, scoring_embeddings)``.
    """
    x_g = encode(adj_norm, encoder)
    if weighted is not None:
        x_hat = denoise_weighted(x_g, weighted)
    else:
        cond = build_condition(graph, x_g, train_edges)
        x_hat = denoise(
            x_g, 1, cond, denoiser, graph.num_users, graph.num_items, use_condition=use_condition
        )
    return x_g, (x_g if score_source == "encoded" else x_hat)


def predict_embeddings(state: ModelState, graph: InteractionGraph, adj_norm, train_edges):
    """Checkpoint-level wrapper over inference_embeddings."""
    return inference_embeddings(
        graph,
        adj_norm,
        state.encoder,
        state.denoiser,
        state.weighted,
        train_edges,
        use_condition=state.config["ablation"]["condition"],
        score_source=state.config["training"]["score_source"],
    )
