"""Composite heatmap losses: NMSE on peak positions and on pixels."""

from __future__ import annotations

import numpy as np

from .data import GridSpec, Heatmap, peak_coords, soft_weights


class DegenerateBatchError(ValueError):
    pass


def _batch_variance(x: np.ndarray) -> float:
    """Variance over axis 0, averaged over every other axis."""
    return float(np.mean(np.var(x, axis=0)))


def head_loss(pred, truth, c: float, temperature: float = 0.02, grid: GridSpec | None = None,
              pred_mode: str = "soft", return_grad: bool = False):
    """c * NMSE(peaks) + (1 - c) * NMSE(pixels) over a batch of heatmaps.

    ``pred`` and ``truth`` are :class:`Heatmap` objects or arrays of shape
    (N, [C,] H, W) with ``grid`` given. Truth peaks use the hard argmax,
    predicted peaks the soft argmax (``pred_mode``). Each NMSE divides by the
    truth variance over the batch axis, pooled over channels, coordinates and
    pixels. With ``return_grad`` the gradient w.r.t. the predicted values is
    returned too (soft mode only).
    """
    if isinstance(pred, Heatmap):
        grid = pred.grid
        pred = pred.values
    if isinstance(truth, Heatmap):
        grid = truth.grid
        truth = truth.values
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    if not 0.0 <= c <= 1.0:
        raise ValueError("c must lie in [0, 1]")

    p_true = peak_coords(truth, "hard", grid=grid)
    var_pix = _batch_variance(truth)
    var_peak = _batch_variance(p_true)
    if (c < 1 and var_pix <= 0) or (c > 0 and var_peak <= 0):
        raise DegenerateBatchError("truth batch has zero variance; NMSE undefined")

    loss = 0.0
    grad = np.zeros_like(pred) if return_grad else None
    if c < 1:
        diff = pred - truth
        loss += (1 - c) * np.mean(diff ** 2) / var_pix
        if return_grad:
            grad += (1 - c) * 2 * diff / (diff.size * var_pix)
    if c > 0:
        if return_grad and pred_mode != "soft":
            raise ValueError("gradients need the soft peak mode")
        if pred_mode == "soft":
            w = soft_weights(pred, temperature)
            p_pred = w @ grid.coords
        else:
            p_pred = peak_coords(pred, "hard", grid=grid)
        dp = p_pred - p_true
        loss += c * np.mean(dp ** 2) / var_peak
        if return_grad:
            g = c * 2 * dp / (dp.size * var_peak)                     # (..., 2)
            centred = grid.coords - p_pred[..., None, :]              # (..., HW, 2)
            dv = w * np.einsum("...d,...id->...i", g, centred) / temperature
            grad += dv.reshape(pred.shape)
    if return_grad:
        return float(loss), grad
    return float(loss)


def total_loss(depth_l, hpe_l, loc_l, a: float = 0.5, b: float = 0.5):
    """a * [b * L_depth + (1 - b) * L_hpe] + (1 - a) * L_loc."""
    return a * (b * depth_l + (1 - b) * hpe_l) + (1 - a) * loc_l


def total_loss_weights(a: float = 0.5, b: float = 0.5):
    """Coefficients of (depth, hpe, loc) in :func:`total_loss`."""
    return a * b, a * (1 - b), 1 - a


def c_schedule(step: int, total: int, start: float = 0.1, end: float = 0.9) -> float:
    """Linear ramp of the peak-term weight from ``start`` to ``end``."""
    if total <= 1:
        return end
    return start + (end - start) * min(step, total - 1) / (total - 1)
