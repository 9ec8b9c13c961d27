"""Loss functions for the predictors and the variance network."""

from __future__ import annotations

import numpy as np

from ..errors import InputError


def mse_loss(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Mean squared error over a batch.

    Raises InputError on empty or mismatched inputs.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if predictions.shape != labels.shape:
        raise InputError(
            f"mse_loss: shape mismatch {predictions.shape} vs {labels.shape}"
        )
    if predictions.size == 0:
        raise InputError("mse_loss: empty batch")
    return float(np.mean((predictions - labels) ** 2))


def nll_loss(squared_residuals: np.ndarray, variances: np.ndarray) -> float:
    """Gaussian negative log-likelihood (up to an additive constant).

    Returns the sum over the batch of

        0.5 * (r2_k / var_k + ln var_k)

    where r2_k is a squared residual and var_k the predicted variance.
    Variances must be strictly positive.
    """
    squared_residuals = np.asarray(squared_residuals, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    if squared_residuals.shape != variances.shape:
        raise InputError(
            f"nll_loss: shape mismatch {squared_residuals.shape} vs {variances.shape}"
        )
    if squared_residuals.size == 0:
        raise InputError("nll_loss: empty batch")
    if np.any(variances <= 0.0):
        raise InputError("nll_loss: variances must be strictly positive")
    return float(0.5 * np.sum(squared_residuals / variances + np.log(variances)))
