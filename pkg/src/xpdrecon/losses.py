"""Differentiable training loss: weighted L1 plus (1 - MS-SSIM)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, ops
from .metrics import gaussian_window_1d, ms_ssim_weights


@dataclass
class LossTerms:
    total: Tensor
    l1: Tensor
    msssim: Tensor


def l1_graph(pred, target, eps=1e-6):
    """Charbonnier-smoothed mean absolute difference."""
    return ops.mean(ops.charbonnier(ops.sub(pred, target), eps))


def _ssim_terms(x, y, data_range, win, k1, k2):
    w = gaussian_window_1d(win, 1.5)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu_x = ops.filter2d_valid(x, w)
    mu_y = ops.filter2d_valid(y, w)
    mu_xx = ops.mul(mu_x, mu_x)
    mu_yy = ops.mul(mu_y, mu_y)
    mu_xy = ops.mul(mu_x, mu_y)
    sxx = ops.sub(ops.filter2d_valid(ops.mul(x, x), w), mu_xx)
    syy = ops.sub(ops.filter2d_valid(ops.mul(y, y), w), mu_yy)
    sxy = ops.sub(ops.filter2d_valid(ops.mul(x, y), w), mu_xy)
    cs_num = ops.add_scalar(ops.scale(sxy, 2.0), c2)
    cs_den = ops.add_scalar(ops.add(sxx, syy), c2)
    lum_num = ops.add_scalar(ops.scale(mu_xy, 2.0), c1)
    lum_den = ops.add_scalar(ops.add(mu_xx, mu_yy), c1)
    cs = ops.div(cs_num, cs_den)
    full = ops.div(ops.mul(lum_num, cs_num), ops.mul(lum_den, cs_den))
    return full, cs


def ms_ssim_graph(pred, target, data_range=1.0, scales=5, weights=None, win=11, k1=0.01, k2=0.03, floor=1e-6):
    """MS-SSIM of two ``(H, W)`` (or ``(N, C, H, W)``) tensors, kept in the graph.

    Per-scale means are clamped at ``floor`` so the fractional powers stay
    differentiable.
    """
    w = ms_ssim_weights(pred.shape[-2:], scales, weights, win)
    x, y = pred, target
    out = None
    for j, wj in enumerate(w):
        full, cs = _ssim_terms(x, y, data_range, win, k1, k2)
        term = ops.mean(full if j == len(w) - 1 else cs)
        factor = ops.pow_scalar(ops.clamp_min(term, floor), wj)
        out = factor if out is None else ops.mul(out, factor)
        if j < len(w) - 1:
            x, y = ops.avgpool2(_even(x)), ops.avgpool2(_even(y))
    return out


def _even(t):
    h, w = t.shape[-2:]
    if h % 2 == 0 and w % 2 == 0:
        return t
    if t.ndim != 2:
        raise ValueError("odd-sized multi-scale inputs must be 2D")
    return ops.slice_axis(ops.slice_axis(t, 0, h // 2 * 2, axis=0), 0, w // 2 * 2, axis=1)


def compound_loss(pred, target, alpha=0.5, beta=0.5, data_range=1.0, eps=1e-6, scales=5):
    """``alpha / data_range * L1 + beta * (1 - MS-SSIM)`` on magnitude images."""
    if not isinstance(target, Tensor):
        target = Tensor(np.asarray(target, dtype=pred.dtype))
    l1 = l1_graph(pred, target, eps)
    ms = ms_ssim_graph(pred, target, data_range, scales)
    total = ops.add(
        ops.scale(l1, alpha / data_range),
        ops.scale(ops.add_scalar(ops.scale(ms, -1.0), 1.0), beta),
    )
    return LossTerms(total, l1, ms)
