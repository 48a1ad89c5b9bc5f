"""Image quality metrics on real (magnitude) images."""
from __future__ import annotations

import csv

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# 5-scale weights from the original MS-SSIM construction (Wang, Simoncelli, Bovik 2003)
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

PSNR_CAP_DB = 100.0

METRICS_COLUMNS = ("volume_id", "slice", "method", "accel", "psnr_db", "ssim", "ms_ssim")


def gaussian_window_1d(size=11, sigma=1.5):
    t = np.arange(size) - (size - 1) / 2
    w = np.exp(-(t ** 2) / (2 * sigma ** 2))
    return w / w.sum()


def _filter_valid(img, w):
    # separable correlation without padding
    rows = sliding_window_view(img, len(w), axis=-2) @ w
    return sliding_window_view(rows, len(w), axis=-1) @ w


def l1_loss(pred, target):
    return float(np.mean(np.abs(np.asarray(pred, float) - np.asarray(target, float))))


def psnr(pred, target, data_range=None):
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if data_range is None:
        data_range = float(target.max())
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    mse = np.mean((pred - target) ** 2)
    if mse == 0:
        return float("inf")
    return float(10 * np.log10(data_range ** 2 / mse))


def _ssim_maps(x, y, data_range, win, k1, k2):
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    w = gaussian_window_1d(win, 1.5)
    mu_x = _filter_valid(x, w)
    mu_y = _filter_valid(y, w)
    sxx = _filter_valid(x * x, w) - mu_x * mu_x
    syy = _filter_valid(y * y, w) - mu_y * mu_y
    sxy = _filter_valid(x * y, w) - mu_x * mu_y
    cs = (2 * sxy + c2) / (sxx + syy + c2)
    lum = (2 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * sxy + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    )
    return ssim_map, cs, lum


def ssim(pred, target, data_range=None, win=11, k1=0.01, k2=0.03):
    """Mean SSIM over the valid (unpadded) region with an 11x11 Gaussian window."""
    x = np.asarray(pred, dtype=float)
    y = np.asarray(target, dtype=float)
    if data_range is None:
        data_range = float(y.max())
    if min(x.shape) < win:
        raise ValueError(f"image {x.shape} smaller than the {win}x{win} window")
    return float(np.mean(_ssim_maps(x, y, data_range, win, k1, k2)[0]))


def ms_ssim_scales(shape, scales=5, win=11):
    """Number of usable scales: each must still fit the window."""
    n = min(shape)
    usable = 0
    while usable < scales and n >= win:
        usable += 1
        n //= 2
    return usable


def ms_ssim_weights(shape, scales=5, weights=None, win=11):
    """Per-scale exponents.

    The full weight set is used as given (the standard five sum to 1.0001);
    whenever scales are dropped, by ``scales`` or by the image size, the
    remaining weights are renormalized to sum to one.
    """
    full = np.asarray(MS_SSIM_WEIGHTS if weights is None else weights, dtype=float)
    m = ms_ssim_scales(shape, min(scales, len(full)), win)
    if m == 0:
        raise ValueError(f"image {shape} smaller than the {win}x{win} window")
    if m == len(full):
        return full
    return full[:m] / full[:m].sum()


def downsample2(img):
    h, w = img.shape[-2] // 2 * 2, img.shape[-1] // 2 * 2
    img = img[..., :h, :w]
    return 0.25 * (img[..., 0::2, 0::2] + img[..., 1::2, 0::2] + img[..., 0::2, 1::2] + img[..., 1::2, 1::2])


def ms_ssim(pred, target, data_range=None, scales=5, weights=None, win=11, k1=0.01, k2=0.03):
    """Multi-scale SSIM.

    Contrast-structure terms are taken at every scale, the full SSIM at the
    coarsest one.  Scales that no longer fit the window are dropped and the
    remaining weights renormalized.  Negative per-scale means are clamped to
    zero before exponentiation.
    """
    x = np.asarray(pred, dtype=float)
    y = np.asarray(target, dtype=float)
    if data_range is None:
        data_range = float(y.max())
    w = ms_ssim_weights(x.shape, scales, weights, win)
    out = 1.0
    for j, wj in enumerate(w):
        s_map, cs_map, _ = _ssim_maps(x, y, data_range, win, k1, k2)
        term = s_map if j == len(w) - 1 else cs_map
        out *= max(float(np.mean(term)), 0.0) ** wj
        if j < len(w) - 1:
            x, y = downsample2(x), downsample2(y)
    return float(out)


def slice_metrics(pred, target, data_range=None):
    """PSNR / SSIM / MS-SSIM of one magnitude slice, normalized to the target max."""
    pred = np.abs(np.asarray(pred))
    target = np.abs(np.asarray(target))
    if data_range is None:
        data_range = float(target.max())
    return {
        "psnr_db": psnr(pred, target, data_range),
        "ssim": ssim(pred, target, data_range),
        "ms_ssim": ms_ssim(pred, target, data_range),
    }


def write_metrics_csv(path, rows):
    """Rows are dicts keyed by :data:`METRICS_COLUMNS`; infinite PSNR is capped."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
        w.writeheader()
        for row in rows:
            row = dict(row)
            row["psnr_db"] = min(float(row["psnr_db"]), PSNR_CAP_DB)
            w.writerow(row)


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
