"""Complex-valued physics as real-tensor primitives.

A complex array of shape ``S + (H, W)`` travels through the graph as a
real tensor of shape ``S + (2, H, W)``, axis -3 holding (real, imag).
Gradients use the same packing: for a real loss the gradient w.r.t. a
complex input ``z`` is ``dL/dRe z + i dL/dIm z``.
"""
from __future__ import annotations

import numpy as np

from .. import physics
from ..errors import InvalidShapeError
from .tensor import Tensor, make_node

_COMPLEX = {np.dtype(np.float32): np.complex64, np.dtype(np.float64): np.complex128}


def to_complex(a):
    a = np.asarray(a)
    if a.shape[-3] != 2:
        raise InvalidShapeError(f"expected a (re, im) axis of size 2 at position -3, got {a.shape}")
    z = np.empty(a.shape[:-3] + a.shape[-2:], dtype=_COMPLEX[a.dtype])
    z.real = a[..., 0, :, :]
    z.imag = a[..., 1, :, :]
    return z


def to_real(z, dtype=None):
    z = np.asarray(z)
    out = np.stack([z.real, z.imag], axis=-3)
    return out if dtype is None else out.astype(dtype, copy=False)


def complex_tensor(z, dtype=np.float32, requires_grad=False, name=None):
    return Tensor(to_real(z, dtype), requires_grad=requires_grad, name=name)


def _real_like(z, like):
    return to_real(z, like.dtype)


def fft2c(x):
    out = _real_like(physics.fft2c(to_complex(x.data)), x)
    return make_node("fft2c", (x,), out, lambda g: (_real_like(physics.ifft2c(to_complex(g)), x),))


def ifft2c(x):
    out = _real_like(physics.ifft2c(to_complex(x.data)), x)
    return make_node("ifft2c", (x,), out, lambda g: (_real_like(physics.fft2c(to_complex(g)), x),))


def apply_mask(x, mask):
    """Zero unsampled phase-encode lines (``mask`` is a :class:`SamplingMask`)."""
    def masked(a):
        return _real_like(mask.apply(to_complex(a)), x)

    return make_node("kmask", (x,), masked(x.data), lambda g: (masked(g),))


def coil_expand(x, maps):
    """``S_l * x``: image ``(2, H, W)`` and maps ``(L, 2, H, W)`` to ``(L, 2, H, W)``."""
    if x.shape != maps.shape[1:]:
        raise InvalidShapeError(f"image {x.shape} does not match maps {maps.shape}")
    xc, sc = to_complex(x.data), to_complex(maps.data)

    def bw(g):
        gc = to_complex(g)
        return _real_like(physics.combine_coils(gc, sc), x), _real_like(gc * np.conj(xc)[None], maps)

    return make_node("coil_expand", (x, maps), _real_like(physics.expand_coils(xc, sc), x), bw)


def coil_combine(z, maps):
    """``sum_l conj(S_l) z_l``: ``(L, 2, H, W)`` pairs to ``(2, H, W)``."""
    if z.shape != maps.shape:
        raise InvalidShapeError(f"coil images {z.shape} do not match maps {maps.shape}")
    zc, sc = to_complex(z.data), to_complex(maps.data)

    def bw(g):
        gc = to_complex(g)
        return _real_like(sc * gc[None], z), _real_like(zc * np.conj(gc)[None], maps)

    return make_node("coil_combine", (z, maps), _real_like(physics.combine_coils(zc, sc), z), bw)


def forward_op(x, maps, mask):
    """``E x = M F (S x)`` in the graph."""
    return apply_mask(fft2c(coil_expand(x, maps)), mask)


def adjoint_op(k, maps, mask):
    """``E^H k`` in the graph."""
    return coil_combine(ifft2c(apply_mask(k, mask)), maps)


def complex_abs(x, eps=0.0):
    """Magnitude ``sqrt(re^2 + im^2 + eps)``; drops the (re, im) axis."""
    re = x.data[..., 0, :, :]
    im = x.data[..., 1, :, :]
    out = np.sqrt(re * re + im * im + x.dtype.type(eps))

    def bw(g):
        safe = np.where(out > 0, out, 1)
        return (np.stack([g * re / safe, g * im / safe], axis=-3),)

    return make_node("complex_abs", (x,), out, bw)


def normalize_coils(maps, support, eps=1e-12):
    """Rescale maps to ``sum_l |S_l|^2 = 1`` on ``support`` and zero them elsewhere."""
    s = maps.data
    sup = np.asarray(support, dtype=bool)
    if sup.shape != s.shape[-2:]:
        raise InvalidShapeError(f"support {sup.shape} does not match maps {s.shape}")
    energy = np.sum(s * s, axis=(0, 1))
    d = np.sqrt(energy + s.dtype.type(eps))
    m = sup.astype(s.dtype)
    out = s * (m / d)[None, None]

    def bw(g):
        proj = np.sum(s * g, axis=(0, 1))
        return ((m / d)[None, None] * g - (m * proj / d ** 3)[None, None] * s,)

    return make_node("normalize_coils", (maps,), out, bw)
