"""Synthetic anatomy and coil sensitivities."""
from __future__ import annotations

import numpy as np

from .physics import normalize_maps

# (intensity, semi-axis a, semi-axis b, x0, y0, angle in degrees), modified Shepp-Logan
_SHEPP_LOGAN = np.array([
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0],
    [-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0],
    [-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0],
    [0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0],
    [0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0],
    [0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0],
    [0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0],
])

CONTRASTS = ("T1", "T2", "FLAIR", "T1POST")

# per-contrast ellipse intensities; the first two define skull and brain level
_CONTRAST_INTENSITY = {
    "T1": _SHEPP_LOGAN[:, 0],
    "T2": np.array([1.0, -0.7, 0.45, 0.45, -0.05, 0.15, 0.15, 0.2, 0.2, 0.2]),
    "FLAIR": np.array([1.0, -0.6, -0.25, -0.25, 0.15, 0.35, 0.35, 0.1, 0.1, 0.1]),
    "T1POST": np.array([1.0, -0.8, -0.2, -0.2, 0.1, 0.45, 0.45, 0.3, 0.3, 0.3]),
}


def _grid(n):
    c = (np.arange(n) - n / 2 + 0.5) / (n / 2)
    # rows run top to bottom, the ellipse y axis points up
    return np.meshgrid(c, -c, indexing="xy")


def _render(ellipses, n):
    x, y = _grid(n)
    img = np.zeros((n, n))
    for amp, a, b, x0, y0, deg in ellipses:
        t = np.deg2rad(deg)
        xr = (x - x0) * np.cos(t) + (y - y0) * np.sin(t)
        yr = -(x - x0) * np.sin(t) + (y - y0) * np.cos(t)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += amp
    return img


def _smooth_phase(n):
    x, y = _grid(n)
    return np.exp(1j * (0.6 * x + 0.3 * y + 0.4 * x * y))


def make_phantom(n, smooth_phase=False):
    """Deterministic modified Shepp-Logan phantom, magnitude in ``[0, 1]``."""
    if n < 8:
        raise ValueError(f"phantom size must be >= 8, got {n}")
    img = np.clip(_render(_SHEPP_LOGAN, n), 0.0, 1.0).astype(np.complex128)
    if smooth_phase:
        img = img * _smooth_phase(n)
    return img


def random_phantom(n, rng, contrast="T1", smooth_phase=False):
    """Shepp-Logan variant with jittered geometry, for training sets.

    The returned image is scaled to a max magnitude of 1.
    """
    ell = _SHEPP_LOGAN.copy()
    ell[:, 0] = _CONTRAST_INTENSITY[contrast]
    k = len(ell)
    ell[:, 1:3] *= rng.uniform(0.85, 1.15, size=(k, 2))
    ell[2:, 3:5] += rng.uniform(-0.05, 0.05, size=(k - 2, 2))
    ell[:, 5] += rng.uniform(-15.0, 15.0, size=k)
    ell[:2, 1:3] = np.minimum(ell[:2, 1:3], [[0.75, 0.95], [0.72, 0.91]])
    # keep the brain inside the skull
    ell[1, 1:3] = np.minimum(ell[1, 1:3], ell[0, 1:3] - 0.03)
    img = np.clip(_render(ell, n), 0.0, None)
    img = img / img.max()
    out = img.astype(np.complex128)
    if smooth_phase:
        out = out * _smooth_phase(n)
    return out


def make_coil_maps(n, coils, rotation=0.0):
    """Gaussian-profile coils spread around the image border.

    Each coil carries a smooth linear phase; maps are normalized so that
    ``sum_l |S_l|^2 = 1`` everywhere.
    """
    if coils < 1:
        raise ValueError(f"need at least one coil, got {coils}")
    x, y = _grid(n)
    width = 1.2
    maps = np.empty((coils, n, n), dtype=np.complex128)
    for ell in range(coils):
        ang = rotation + 2 * np.pi * ell / coils
        cx, cy = 1.3 * np.cos(ang), 1.3 * np.sin(ang)
        mag = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * width ** 2))
        phase = ang + 0.5 * (np.cos(ang) * x + np.sin(ang) * y)
        maps[ell] = mag * np.exp(1j * phase)
    maps, _ = normalize_maps(maps)
    return maps
