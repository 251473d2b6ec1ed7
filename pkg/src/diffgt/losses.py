"""The three-term training objective: ranking, reconstruction, contrastive.

All losses run on autodiff Nodes during training and plain arrays in
tests/diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import autodiff as ad
from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class LossWeights:
    """Mixing weights of the composite objective and the contrastive temperature."""

    diffusion_weight: float = 0.5
    contrastive_weight: float = 0.1
    temperature: float = 0.2

    def __post_init__(self):
        if self.diffusion_weight < 0 or self.contrastive_weight < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")


def bpr_loss(scores_pos, scores_neg):
    """Mean of -log sigmoid(s_pos - s_neg) over sampled triples."""
    if ad.value_of(scores_pos).shape != ad.value_of(scores_neg).shape:
        raise ShapeError("positive/negative score lists must align")
    margin = ad.sub(scores_pos, scores_neg)
    return ad.mean(ad.softplus(ad.mul(margin, -1.0)))


def diffusion_loss(x0, x0_hat):
    """Mean squared reconstruction error over all entries."""
    if ad.value_of(x0).shape != ad.value_of(x0_hat).shape:
        raise ShapeError(
            f"shape mismatch: {ad.value_of(x0).shape} vs {ad.value_of(x0_hat).shape}"
        )
    diff = ad.sub(x0, x0_hat)
    return ad.mean(ad.mul(diff, diff))


def contrastive_loss(anchor, positive, temperature, negatives=None):
    """Temperature-scaled softmax alignment of anchor rows to their positives.

    Rows are L2-normalized first. Row i's denominator sums the positive
    similarity with the similarities to every other row of ``positive``
    (in-batch negatives) or, when ``negatives`` is given, to those rows
    instead; the positive term is always included.
    """
    if temperature <= 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    a = ad.normalize_rows(anchor)
    p = ad.normalize_rows(positive)
    pos_sim = ad.sum_(ad.mul(a, p), axis=1, keepdims=True)
    if negatives is None:
        logits = ad.mul(ad.matmul(a, ad.transpose(p)), 1.0 / temperature)
    else:
        n = ad.normalize_rows(negatives)
        neg_sims = ad.matmul(a, ad.transpose(n))
        logits = ad.mul(ad.concat_cols(pos_sim, neg_sims), 1.0 / temperature)
    log_denom = ad.logsumexp_rows(logits)
    return ad.mean(ad.sub(log_denom, ad.mul(pos_sim, 1.0 / temperature)))


def total_loss(bpr, diff, cl, weights: LossWeights, use_diffusion=True, use_contrastive=True):
    """Weighted sum; terms disabled by ablation contribute exactly zero."""
    total = bpr
    if use_diffusion and weights.diffusion_weight != 0.0:
        total = ad.add(total, ad.mul(diff, weights.diffusion_weight))
    if use_contrastive and weights.contrastive_weight != 0.0:
        total = ad.add(total, ad.mul(cl, weights.contrastive_weight))
    return total
