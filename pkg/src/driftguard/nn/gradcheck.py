"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np


def grad_check(model, x: np.ndarray, y: np.ndarray, epsilon: float = 1e-5) -> float:
    """Maximum relative error between analytic and numeric gradients.

    Every parameter entry is perturbed by +/- epsilon (central
    differences) and the batch loss re-evaluated.  The relative error of
    entry j is |a_j - n_j| / max(|a_j|, |n_j|, 1e-8).  A correct
    implementation stays well below 1e-4 in float64.
    """
    _, analytic = model.batch_loss_and_grads(x, y)
    params = model.param_arrays()
    worst = 0.0
    for name, arr in params.items():
        grad = analytic[name]
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + epsilon
            up = model.batch_loss(x, y)
            flat[j] = orig - epsilon
            down = model.batch_loss(x, y)
            flat[j] = orig
            numeric = (up - down) / (2.0 * epsilon)
            err = abs(gflat[j] - numeric) / max(abs(gflat[j]), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
