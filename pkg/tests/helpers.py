"""Shared test oracles."""

from __future__ import annotations

import numpy as np


def central_difference(loss_fn, params: dict[str, np.ndarray], step: float = 1e-5):
    """Finite-difference gradient of ``loss_fn(params) -> float`` per entry.

    Independent of any tape machinery: perturbs one entry at a time and
    evaluates the loss twice.
    """
    grads = {}
    for name, value in params.items():
        g = np.zeros_like(value)
        flat = value.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn(params)
            flat[i] = orig - step
            down = loss_fn(params)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        grads[name] = g
    return grads


def max_relative_error(analytic: dict, numeric: dict, floor: float = 1e-8) -> float:
    """Worst-case entrywise relative difference between two gradient dicts."""
    worst = 0.0
    for name in analytic:
        a = analytic[name]
        n = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
