"""Coil sensitivity estimation from the fully sampled k-space center."""
from __future__ import annotations

import numpy as np

from .errors import InsufficientCalibrationError, InvalidShapeError
from .physics import EPS_NORM, ifft2c, normalize_maps


def acs_window(acs_count, apodize=True):
    """Weights across the ACS band; Hann without its zero end points."""
    if not apodize:
        return np.ones(acs_count)
    return np.hanning(acs_count + 2)[1:-1]


def estimate_maps_lowfreq(y, mask, apodize=True, anchor_phase=False, eps_rel=EPS_NORM):
    """Low-resolution coil images divided by their root-sum-of-squares.

    Parameters
    ----------
    y : ndarray, shape (L, H, W)
        Under-sampled coil k-space.
    mask : SamplingMask
        Provides the ACS band location.
    apodize : bool
        Taper the ACS band with a Hann profile to limit ringing.
    anchor_phase : bool
        Remove the phase of the first coil from every map.

    Returns
    -------
    ndarray, shape (L, H, W)
        Maps with ``sum_l |S_l|^2 = 1`` where the RSS exceeds ``eps_rel``
        times its maximum, zero elsewhere.
    """
    y = np.asarray(y)
    if y.ndim != 3 or y.shape[1:] != (mask.height, mask.width):
        raise InvalidShapeError(f"k-space {y.shape} does not match mask {(mask.height, mask.width)}")
    if mask.acs_count < 2:
        raise InsufficientCalibrationError(f"need at least 2 ACS lines, got {mask.acs_count}")
    band = mask.acs_slice
    low = np.zeros_like(y)
    low[:, band, :] = y[:, band, :] * acs_window(mask.acs_count, apodize)[None, :, None]
    maps, _ = normalize_maps(ifft2c(low), eps_rel)
    if anchor_phase:
        ref = maps[0]
        maps = maps * np.where(np.abs(ref) > 0, np.conj(ref) / np.maximum(np.abs(ref), 1e-30), 1.0)[None]
    return maps
