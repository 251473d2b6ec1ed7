"""Noise schedules, forward corruption, reverse posterior, discrete chain.

All operations are pure given an explicit RandomSource, so independent
batches can be diffused concurrently on independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, StepError
from .rng import RandomSource


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step corruption strengths: beta, alpha = 1 - beta, alpha_bar = prod(alpha)."""

    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def num_steps(self) -> int:
        return len(self.betas)

    def check_step(self, t: int) -> None:
        if not 1 <= t <= self.num_steps:
            raise StepError(f"step {t} outside schedule of length {self.num_steps}")

    def alpha_bar_prev(self, t: int) -> float:
        """alpha_bar at t-1, with the t=1 boundary pinned to 1."""
        return 1.0 if t == 1 else float(self.alpha_bars[t - 2])


def make_schedule(num_steps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """Linear beta schedule stretched over ``num_steps`` steps."""
    if num_steps < 1:
        raise ConfigError(f"need at least one step, got {num_steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    betas = np.linspace(beta_start, beta_end, num_steps)
    alphas = 1.0 - betas
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=np.cumprod(alphas))


@dataclass
class DiffusionBatch:
    """A noised snapshot: x_t, its step index, the noise used, and an optional condition."""

    x_t: np.ndarray
    t: int
    noise: np.ndarray
    condition: np.ndarray | None = None


def sign_pm(x: np.ndarray) -> np.ndarray:
    """Sign with sign(0) = +1 so no coordinate is ever zeroed out."""
    return np.where(x >= 0, 1.0, -1.0)


def noise_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column empirical mean and standard deviation of the embeddings."""
    return x.mean(axis=0), x.std(axis=0)


def directional_noise(x0, rng: RandomSource, mu, sigma) -> np.ndarray:
    """Anisotropic noise rescaled per column and sign-aligned with x0.

    Draws eps ~ N(0, I), shifts/scales it to eps_bar = mu + sigma * eps,
    and returns sign(x0) * |eps_bar| so every coordinate keeps the sign of
    the data it corrupts.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if mu.shape != (x0.shape[1],) or sigma.shape != (x0.shape[1],):
        raise ShapeError(f"mu/sigma must have length {x0.shape[1]}, got {mu.shape}/{sigma.shape}")
    if np.any(sigma < 0):
        raise ValueError("sigma must be non-negative")
    eps = rng.standard_normal(*x0.shape)
    eps_bar = mu + sigma * eps
    return sign_pm(x0) * np.abs(eps_bar)


def forward_diffuse(
    x0,
    t: int,
    schedule: NoiseSchedule,
    noise_mode: str,
    rng: RandomSource,
    stats: tuple[np.ndarray, np.ndarray] | None = None,
) -> DiffusionBatch:
    """Corrupt x0 to step t: x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) noise.

    ``noise_mode`` is 'isotropic' (standard normal) or 'directional'
    (sign-aligned anisotropic; per-column stats default to those of x0).
    """
    schedule.check_step(t)
    x0 = np.asarray(x0, dtype=np.float64)
    if noise_mode == "isotropic":
        noise = rng.standard_normal(*x0.shape)
    elif noise_mode == "directional":
        mu, sigma = stats if stats is not None else noise_stats(x0)
        noise = directional_noise(x0, rng, mu, sigma)
    else:
        raise ConfigError(f"unknown noise_mode {noise_mode!r}")
    ab = schedule.alpha_bars[t - 1]
    x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise
    return DiffusionBatch(x_t=x_t, t=t, noise=noise)


def reverse_posterior_mean(x_t, x0_hat, t: int, schedule: NoiseSchedule):
    """Posterior mean (convex blend of x0_hat and x_t) and its variance.

    The blend weights are proportional to sqrt(ab_{t-1}) beta_t for x0_hat
    and sqrt(alpha_t) (1 - ab_{t-1}) for x_t, normalized to sum to exactly
    one, so the mean is a true convex combination: coincident arguments are
    a fixed point, and at t = 1 the mean collapses to x0_hat with zero
    variance.
    """
    schedule.check_step(t)
    x_t = np.asarray(x_t, dtype=np.float64)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    if x_t.shape != x0_hat.shape:
        raise ShapeError(f"shape mismatch: {x_t.shape} vs {x0_hat.shape}")
    ab_prev = schedule.alpha_bar_prev(t)
    beta = float(schedule.betas[t - 1])
    alpha = float(schedule.alphas[t - 1])
    w0 = np.sqrt(ab_prev) * beta
    wt = np.sqrt(alpha) * (1.0 - ab_prev)
    total = w0 + wt
    mean = (w0 / total) * x0_hat + (wt / total) * x_t
    variance = (1.0 - ab_prev) / (1.0 - schedule.alpha_bars[t - 1]) * beta
    return mean, variance


def posterior_coefficients(t: int, schedule: NoiseSchedule) -> tuple[float, float]:
    """The two normalized blend weights used by reverse_posterior_mean."""
    schedule.check_step(t)
    ab_prev = schedule.alpha_bar_prev(t)
    beta = float(schedule.betas[t - 1])
    alpha = float(schedule.alphas[t - 1])
    w0 = np.sqrt(ab_prev) * beta
    wt = np.sqrt(alpha) * (1.0 - ab_prev)
    total = w0 + wt
    return w0 / total, wt / total


@dataclass(frozen=True)
class DiscreteTransition:
    """Two-state edge transition: stay with 1 - flip_prob, flip with flip_prob."""

    flip_prob: float

    @property
    def matrix(self) -> np.ndarray:
        p = self.flip_prob
        return np.array([[1.0 - p, p], [p, 1.0 - p]])


def discrete_forward(adjacency_bits, num_steps: int, flip_probs, rng: RandomSource) -> np.ndarray:
    """Evolve a symmetric binary adjacency through a per-edge two-state chain.

    Only the upper triangle is simulated; symmetry is restored afterwards.
    ``flip_probs[k]`` is the off-diagonal entry of the k-th step's
    transition matrix, i.e. the probability an edge state toggles.
    """
    bits = np.asarray(adjacency_bits)
    if bits.ndim != 2 or bits.shape[0] != bits.shape[1]:
        raise ShapeError(f"adjacency must be square, got {bits.shape}")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("adjacency entries must be 0/1")
    flip_probs = np.asarray(flip_probs, dtype=np.float64)
    if num_steps > len(flip_probs):
        raise ConfigError(f"requested {num_steps} steps but only {len(flip_probs)} flip probs")
    n = bits.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    state = bits[iu, ju].astype(np.int64)
    for k in range(num_steps):
        flips = rng.uniform(0.0, 1.0, state.shape) < flip_probs[k]
        state = np.where(flips, 1 - state, state)
    out = np.zeros_like(bits, dtype=np.float64)
    out[iu, ju] = state
    out[ju, iu] = state
    np.fill_diagonal(out, np.diag(bits))
    return out


def sample_reverse_steps(num_steps: int, k: int, rng: RandomSource) -> list[int]:
    """k distinct steps drawn uniformly from [1, T], sorted descending."""
    if not 1 <= k <= num_steps:
        raise ConfigError(f"need 1 <= k <= {num_steps}, got {k}")
    picks = rng.choice_without_replacement(num_steps, k) + 1
    return sorted(int(p) for p in picks)[::-1]
