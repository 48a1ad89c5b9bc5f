"""Primitive operations with hand-written backward rules.

Elementwise binary ops require identical shapes; the only implicit
broadcasts are the per-channel bias of :func:`conv2d` and the scalar
tensor factor of :func:`scale_by`.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidShapeError
from ..wavelets import analysis_level, synthesis_level
from .tensor import Tensor, make_node


def _same(a, b, op):
    if a.shape != b.shape:
        raise InvalidShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ----------------------------------------------------------------- arithmetic

def add(a, b):
    _same(a, b, "add")
    return make_node("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a, b):
    _same(a, b, "sub")
    return make_node("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a, b):
    _same(a, b, "mul")
    ad, bd = a.data, b.data
    return make_node("mul", (a, b), ad * bd, lambda g: (g * bd, g * ad))


def div(a, b):
    _same(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd
    return make_node("div", (a, b), out, lambda g: (g / bd, -g * out / bd))


def scale(x, c):
    c = float(c)
    return make_node("scale", (x,), x.data * x.dtype.type(c), lambda g: (g * x.dtype.type(c),))


def add_scalar(x, c):
    return make_node("add_scalar", (x,), x.data + x.dtype.type(c), lambda g: (g,))


def scale_by(x, s):
    """``x * s`` for a single-element tensor ``s`` (learnable step sizes)."""
    if s.size != 1:
        raise InvalidShapeError(f"scale_by needs a scalar factor, got shape {s.shape}")
    sv = s.data.reshape(())
    xd = x.data

    def bw(g):
        return g * sv, np.asarray(np.sum(g * xd), dtype=s.dtype).reshape(s.shape)

    return make_node("scale_by", (x, s), xd * sv, bw)


def square(x):
    xd = x.data
    return make_node("square", (x,), xd * xd, lambda g: (2 * g * xd,))


def sqrt(x):
    out = np.sqrt(x.data)
    return make_node("sqrt", (x,), out, lambda g: (g / (2 * out),))


def pow_scalar(x, p):
    xd = x.data
    p = float(p)
    return make_node("pow", (x,), xd ** p, lambda g: (g * p * xd ** (p - 1),))


def clamp_min(x, lo):
    xd = x.data
    keep = xd > lo
    return make_node("clamp_min", (x,), np.where(keep, xd, x.dtype.type(lo)), lambda g: (g * keep,))


def relu(x):
    xd = x.data
    pos = xd > 0
    return make_node("relu", (x,), np.where(pos, xd, 0), lambda g: (g * pos,))


def leaky_relu(x, slope=0.01):
    xd = x.data
    s = x.dtype.type(slope)
    factor = np.where(xd > 0, x.dtype.type(1), s)
    return make_node("leaky_relu", (x,), xd * factor, lambda g: (g * factor,))


def charbonnier(x, eps=1e-6):
    """Smooth absolute value ``sqrt(x^2 + eps^2) - eps`` (zero at zero)."""
    xd = x.data
    e = x.dtype.type(eps)
    root = np.sqrt(xd * xd + e * e)
    return make_node("charbonnier", (x,), root - e, lambda g: (g * xd / root,))


def sum(x):  # noqa: A001 - mirrors numpy naming
    shape = x.shape
    return make_node("sum", (x,), np.sum(x.data), lambda g: (np.full(shape, g, dtype=x.dtype),))


def mean(x):
    shape, n = x.shape, x.size
    return make_node("mean", (x,), np.mean(x.data), lambda g: (np.full(shape, g / n, dtype=x.dtype),))


# ----------------------------------------------------------------- structure

def reshape(x, shape):
    old = x.shape
    return make_node("reshape", (x,), x.data.reshape(shape), lambda g: (g.reshape(old),))


def concat(tensors, axis=1):
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        return tuple(np.take(g, range(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return make_node("concat", tuple(tensors), np.concatenate([t.data for t in tensors], axis=axis), bw)


def slice_axis(x, start, stop, axis=1):
    shape = x.shape
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)

    def bw(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[idx] = g
        return (full,)

    return make_node("slice", (x,), x.data[idx], bw)


def crop(x, border):
    """Drop ``border`` pixels on every side of the last two axes."""
    h, w = x.shape[-2:]
    shape = x.shape
    idx = (..., slice(border, h - border), slice(border, w - border))

    def bw(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[idx] = g
        return (full,)

    return make_node("crop", (x,), x.data[idx], bw)


# ----------------------------------------------------------------- convolution

def _pad_hw(x, ph, pw):
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))


def _corr_same(x, w):
    """Same-padded stride-1 cross-correlation, NCHW x OIHW -> NOHW."""
    kh, kw = w.shape[-2:]
    if kh == 1 and kw == 1:
        return np.einsum("nchw,oc->nohw", x, w[:, :, 0, 0], optimize=True)
    xp = _pad_hw(x, kh // 2, kw // 2)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # N C H W kh kw
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # N H W O
    return out.transpose(0, 3, 1, 2)


def conv2d(x, weight, bias=None):
    """Stride-1, same-padded 2D cross-correlation plus optional per-channel bias."""
    if x.ndim != 4 or weight.ndim != 4:
        raise InvalidShapeError("conv2d expects NCHW input and OIHW weight")
    if x.shape[1] != weight.shape[1]:
        raise InvalidShapeError(f"conv2d: input has {x.shape[1]} channels, weight expects {weight.shape[1]}")
    kh, kw = weight.shape[-2:]
    if kh % 2 == 0 or kw % 2 == 0:
        raise InvalidShapeError("conv2d supports odd kernel sizes only")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise InvalidShapeError(f"bias shape {bias.shape} does not match {weight.shape[0]} output channels")
    xd, wd = x.data, weight.data
    out = _corr_same(xd, wd)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    def bw(g):
        gx = _corr_same(g, wd[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
        if kh == 1 and kw == 1:
            gw = np.einsum("nohw,nchw->oc", g, xd, optimize=True)[:, :, None, None]
        else:
            win = sliding_window_view(_pad_hw(xd, kh // 2, kw // 2), (kh, kw), axis=(2, 3))
            gw = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))
        grads = [gx, gw.astype(wd.dtype, copy=False)]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_node("conv2d", inputs, out, bw)


def filter2d_valid(x, w1d):
    """Fixed separable filter without padding (each channel independently)."""
    w1d = np.asarray(w1d, dtype=x.dtype)
    k = len(w1d)
    rows = sliding_window_view(x.data, k, axis=-2) @ w1d
    out = sliding_window_view(rows, k, axis=-1) @ w1d

    def bw(g):
        pad = [(0, 0)] * (g.ndim - 1) + [(k - 1, k - 1)]
        gr = sliding_window_view(np.pad(g, pad), k, axis=-1) @ w1d[::-1]
        pad = [(0, 0)] * (g.ndim - 2) + [(k - 1, k - 1), (0, 0)]
        return (sliding_window_view(np.pad(gr, pad), k, axis=-2) @ w1d[::-1],)

    return make_node("filter2d_valid", (x,), out, bw)


# ----------------------------------------------------------------- resampling

def _pool(a):
    return 0.25 * (a[..., 0::2, 0::2] + a[..., 1::2, 0::2] + a[..., 0::2, 1::2] + a[..., 1::2, 1::2])


def _nearest_up(a):
    return np.repeat(np.repeat(a, 2, axis=-2), 2, axis=-1)


def avgpool2(x):
    if x.shape[-1] % 2 or x.shape[-2] % 2:
        raise InvalidShapeError(f"avgpool2 needs even spatial dims, got {x.shape[-2:]}")
    return make_node("avgpool2", (x,), _pool(x.data), lambda g: (0.25 * _nearest_up(g),))


def upsample2(x):
    return make_node("upsample2", (x,), _nearest_up(x.data), lambda g: (4.0 * _pool(g).astype(g.dtype),))


def _haar_down(a):
    ll, (lh, hl, hh) = analysis_level(a, "haar")
    return np.concatenate([ll, lh, hl, hh], axis=1)


def _haar_up(a):
    c = a.shape[1] // 4
    bands = [a[:, i * c:(i + 1) * c] for i in range(4)]
    return synthesis_level(bands[0], tuple(bands[1:]), "haar")


def dwt_layer(x):
    """Orthonormal Haar analysis, subbands stacked as ``[LL, LH, HL, HH]`` channel blocks."""
    if x.ndim != 4:
        raise InvalidShapeError("dwt_layer expects NCHW input")
    if x.shape[-1] % 2 or x.shape[-2] % 2:
        raise InvalidShapeError(f"dwt_layer needs even spatial dims, got {x.shape[-2:]}")
    return make_node("dwt_layer", (x,), _haar_down(x.data), lambda g: (_haar_up(g),))


def idwt_layer(x):
    if x.ndim != 4 or x.shape[1] % 4:
        raise InvalidShapeError(f"idwt_layer needs NCHW input with channels divisible by 4, got {x.shape}")
    return make_node("idwt_layer", (x,), _haar_up(x.data), lambda g: (_haar_down(g),))
