"""Cartesian multi-coil measurement model.

Images are complex ``(H, W)`` arrays, coil data are ``(L, H, W)`` arrays.
The Fourier transform is centered and orthonormal, so with a full mask and
maps normalized to ``sum_l |S_l|^2 = 1`` the forward operator is an isometry.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidInputError, InvalidShapeError

#: relative floor (w.r.t. the max RSS) under which maps are treated as background
EPS_NORM = 1e-8

#: default ACS fraction of phase-encode lines per acceleration
DEFAULT_ACS_FRACTION = {4: 0.08, 8: 0.04}


def _check_finite(a):
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("input contains non-finite values")


def fft2c(x):
    """Centered orthonormal 2D DFT over the last two axes."""
    x = np.asarray(x)
    _check_finite(x)
    axes = (-2, -1)
    return np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(x, axes=axes), axes=axes, norm="ortho"), axes=axes
    )


def ifft2c(k):
    """Inverse of :func:`fft2c` (and its adjoint)."""
    k = np.asarray(k)
    _check_finite(k)
    axes = (-2, -1)
    return np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(k, axes=axes), axes=axes, norm="ortho"), axes=axes
    )


def default_acs_count(height, acceleration):
    frac = DEFAULT_ACS_FRACTION.get(acceleration, 0.32 / max(acceleration, 1))
    return max(2, int(round(frac * height)))


@dataclass(frozen=True)
class SamplingMask:
    """Equispaced phase-encode line mask with a fully sampled center band.

    Lines run along the row (first image) axis.
    """

    height: int
    width: int
    line_selected: np.ndarray = field(repr=False)
    acs_count: int
    acceleration: int

    def __post_init__(self):
        sel = np.asarray(self.line_selected, dtype=bool)
        if sel.shape != (self.height,):
            raise InvalidShapeError(f"line_selected must have shape ({self.height},)")
        object.__setattr__(self, "line_selected", sel)

    @property
    def acs_slice(self):
        start = self.height // 2 - self.acs_count // 2
        return slice(start, start + self.acs_count)

    @property
    def matrix(self):
        """Binary ``(H, W)`` multiplier."""
        return np.repeat(self.line_selected[:, None], self.width, axis=1)

    @property
    def sampled_fraction(self):
        return float(self.line_selected.mean())

    def apply(self, k):
        """Zero the unsampled lines of ``k`` (any leading axes)."""
        k = np.asarray(k)
        if k.shape[-2:] != (self.height, self.width):
            raise InvalidShapeError(f"k-space shape {k.shape} does not match mask {(self.height, self.width)}")
        return np.where(self.line_selected[:, None], k, 0)


def make_mask(height, width, acceleration, acs_count=None, offset=0):
    """Select every ``acceleration``-th line from ``offset`` plus ``acs_count`` center lines."""
    if acceleration < 1:
        raise InvalidConfigError(f"acceleration must be >= 1, got {acceleration}")
    if acs_count is None:
        acs_count = default_acs_count(height, acceleration)
    if acs_count < 0 or acs_count > height:
        raise InvalidConfigError(f"acs_count must be in [0, {height}], got {acs_count}")
    if not 0 <= offset < acceleration:
        raise InvalidConfigError(f"offset must be in [0, {acceleration}), got {offset}")
    if height < 1 or width < 1:
        raise InvalidConfigError("mask dimensions must be positive")
    sel = np.zeros(height, dtype=bool)
    sel[offset::acceleration] = True
    start = height // 2 - acs_count // 2
    sel[start:start + acs_count] = True
    return SamplingMask(height, width, sel, acs_count, acceleration)


def full_mask(height, width):
    return make_mask(height, width, 1, 0, 0)


@dataclass(frozen=True)
class ForwardOperator:
    """The composite ``y_l = M F (S_l x)``."""

    mask: SamplingMask
    maps: np.ndarray = field(repr=False)

    def __post_init__(self):
        maps = np.asarray(self.maps)
        if maps.ndim != 3:
            raise InvalidShapeError(f"maps must be (coils, H, W), got {maps.shape}")
        if maps.shape[1:] != (self.mask.height, self.mask.width):
            raise InvalidShapeError(f"maps {maps.shape} and mask {(self.mask.height, self.mask.width)} disagree")
        object.__setattr__(self, "maps", maps)

    @property
    def coils(self):
        return self.maps.shape[0]

    @property
    def image_shape(self):
        return self.maps.shape[1:]

    def forward(self, x):
        return apply_forward(self, x)

    def adjoint(self, y):
        return apply_adjoint(self, y)

    def normal(self, x):
        return apply_adjoint(self, apply_forward(self, x))


def expand_coils(x, maps):
    """``S_l * x`` for every coil."""
    return maps * x[None]


def combine_coils(coil_images, maps):
    """``sum_l conj(S_l) * z_l`` with a fixed sequential reduction order."""
    out = np.conj(maps[0]) * coil_images[0]
    for s, z in zip(maps[1:], coil_images[1:]):
        out = out + np.conj(s) * z
    return out


def apply_forward(op, x):
    x = np.asarray(x)
    if x.shape != op.image_shape:
        raise InvalidShapeError(f"image shape {x.shape} does not match operator {op.image_shape}")
    return op.mask.apply(fft2c(expand_coils(x, op.maps)))


def apply_adjoint(op, y):
    y = np.asarray(y)
    if y.shape != op.maps.shape:
        raise InvalidShapeError(f"k-space shape {y.shape} does not match operator {op.maps.shape}")
    return combine_coils(ifft2c(op.mask.apply(y)), op.maps)


def rss(coil_images, axis=0):
    """Root-sum-of-squares coil combination."""
    z = np.asarray(coil_images)
    acc = np.zeros(np.delete(z.shape, axis), dtype=np.result_type(z.real.dtype, np.float32))
    for zl in np.moveaxis(z, axis, 0):
        acc = acc + (zl.real ** 2 + zl.imag ** 2)
    return np.sqrt(acc)


def normalize_maps(maps, eps_rel=EPS_NORM):
    """Scale maps so ``sum_l |S_l|^2 = 1``; background pixels become 0.

    Returns ``(maps, support)``.
    """
    maps = np.asarray(maps)
    r = rss(maps)
    support = r > eps_rel * r.max() if r.max() > 0 else np.zeros_like(r, dtype=bool)
    safe = np.where(support, r, 1.0)
    return np.where(support[None], maps / safe[None], 0), support
