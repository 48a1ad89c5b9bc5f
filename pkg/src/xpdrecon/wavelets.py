"""Orthonormal periodic 2D discrete wavelet transform.

Transforms act on the last two axes, so stacks of images (and complex
data) are handled in one call.  Subband naming: the first letter is the
filter along rows (height), the second along columns (width).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidShapeError

_S2 = np.sqrt(2.0)
_S3 = np.sqrt(3.0)

LOWPASS = {
    "haar": np.array([1.0, 1.0]) / _S2,
    "db2": np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4 * _S2),
}


def _highpass(h):
    k = len(h)
    return np.array([(-1) ** i * h[k - 1 - i] for i in range(k)])


FILTERS = {name: (h, _highpass(h)) for name, h in LOWPASS.items()}


def _filters(family):
    try:
        return FILTERS[family]
    except KeyError:
        raise InvalidConfigError(f"unknown wavelet family {family!r}; choose from {sorted(FILTERS)}") from None


def _analyze(x, axis, h, g):
    n = x.shape[axis]
    half = np.arange(n // 2)
    lo = hi = 0
    for k in range(len(h)):
        xk = np.take(x, (2 * half + k) % n, axis=axis)
        # python floats keep float32 inputs in float32
        lo = lo + float(h[k]) * xk
        hi = hi + float(g[k]) * xk
    return lo, hi


def _synthesize(lo, hi, axis, h, g):
    m = lo.shape[axis]
    n = 2 * m
    shape = list(lo.shape)
    shape[axis] = n
    out = np.zeros(shape, dtype=np.result_type(lo, hi))
    view = np.moveaxis(out, axis, 0)
    lo_v = np.moveaxis(lo, axis, 0)
    hi_v = np.moveaxis(hi, axis, 0)
    half = np.arange(m)
    for k in range(len(h)):
        # indices are distinct for a fixed tap, so fancy-index accumulation is safe
        view[(2 * half + k) % n] += float(h[k]) * lo_v + float(g[k]) * hi_v
    return out


def analysis_level(x, family="haar"):
    """One decomposition level: returns ``ll, (lh, hl, hh)``."""
    h, g = _filters(family)
    if x.shape[-1] % 2 or x.shape[-2] % 2:
        raise InvalidShapeError(f"spatial shape {x.shape[-2:]} is not even")
    lo, hi = _analyze(x, -1, h, g)
    ll, hl = _analyze(lo, -2, h, g)
    lh, hh = _analyze(hi, -2, h, g)
    return ll, (lh, hl, hh)


def synthesis_level(ll, details, family="haar"):
    """Inverse of :func:`analysis_level`."""
    h, g = _filters(family)
    lh, hl, hh = details
    lo = _synthesize(ll, hl, -2, h, g)
    hi = _synthesize(lh, hh, -2, h, g)
    return _synthesize(lo, hi, -1, h, g)


@dataclass
class WaveletCoeffs:
    """Multi-level decomposition.

    ``details[0]`` holds the finest level.
    """

    ll: np.ndarray
    details: list
    family: str
    shape: tuple

    @property
    def levels(self):
        return len(self.details)

    def arrays(self):
        yield self.ll
        for band in self.details:
            yield from band

    def map(self, fn, include_ll=True):
        ll = fn(self.ll) if include_ll else self.ll.copy()
        details = [tuple(fn(b) for b in band) for band in self.details]
        return WaveletCoeffs(ll, details, self.family, self.shape)

    def norm(self):
        return float(np.sqrt(sum(np.sum(np.abs(a) ** 2) for a in self.arrays())))

    def vdot(self, other):
        return sum(np.vdot(a, b) for a, b in zip(self.arrays(), other.arrays()))

    def __add__(self, other):
        return WaveletCoeffs(
            self.ll + other.ll,
            [tuple(a + b for a, b in zip(p, q)) for p, q in zip(self.details, other.details)],
            self.family,
            self.shape,
        )


def dwt2(img, levels=1, family="haar"):
    img = np.asarray(img)
    if levels < 1:
        raise InvalidConfigError(f"levels must be >= 1, got {levels}")
    step = 2 ** levels
    if img.shape[-1] % step or img.shape[-2] % step:
        raise InvalidShapeError(f"shape {img.shape[-2:]} not divisible by 2**{levels}")
    details = []
    ll = img
    for _ in range(levels):
        ll, band = analysis_level(ll, family)
        details.append(band)
    return WaveletCoeffs(ll, details, family, img.shape)


def idwt2(coeffs):
    x = coeffs.ll
    for band in reversed(coeffs.details):
        x = synthesis_level(x, band, coeffs.family)
    return x


def soft_threshold(coeffs, lam, threshold_ll=False):
    """Prox of ``lam * ||.||_1`` on the detail bands (complex-modulus shrinkage)."""
    if lam < 0:
        raise InvalidConfigError(f"threshold must be >= 0, got {lam}")
    return coeffs.map(lambda z: shrink(z, lam), include_ll=threshold_ll)


def shrink(z, lam):
    mag = np.abs(z)
    scale = np.maximum(mag - lam, 0.0) / np.where(mag > 0, mag, 1.0)
    return z * scale


def project_linf(z, radius):
    """Projection onto ``{|z| <= radius}`` elementwise (prox of the l1 conjugate)."""
    mag = np.abs(z)
    return z * np.minimum(1.0, radius / np.maximum(mag, np.finfo(float).tiny))
