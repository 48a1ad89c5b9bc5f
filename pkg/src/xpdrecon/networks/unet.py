"""Small U-net refining coil sensitivity maps."""
from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, cplx, ops
from ..errors import InvalidShapeError
from ..physics import EPS_NORM
from .config import UnetConfig
from .layers import Conv, ConvBlock, Module


class UNet(Module):
    """Average-pool encoder, nearest-upsample decoder with concatenated skips.

    Maps ``(N, 2, H, W)`` to ``(N, 2, H, W)``.  The 1x1 output layer is
    zero-initialized.
    """

    def __init__(self, cfg=None, rng=None, dtype=np.float32, prefix="unet.", channels=2):
        super().__init__(prefix)
        cfg = cfg or UnetConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        k, b = cfg.kernel, cfg.base_filters
        widths = [b * 2 ** i for i in range(cfg.depth + 1)]
        self.enc = []
        c = channels
        for i in range(cfg.depth):
            self.enc.append(self.adopt(ConvBlock(f"{prefix}enc{i}.", c, widths[i], 2, k, rng, dtype, act="leaky")))
            c = widths[i]
        self.bottom = self.adopt(ConvBlock(f"{prefix}bottom.", c, widths[-1], 2, k, rng, dtype, act="leaky"))
        self.up = []
        self.dec = []
        for i in reversed(range(cfg.depth)):
            self.up.append(self.adopt(Conv(f"{prefix}up{i}.", widths[i + 1], widths[i], k, rng, dtype)))
            self.dec.append(self.adopt(ConvBlock(f"{prefix}dec{i}.", 2 * widths[i], widths[i], 2, k, rng, dtype, act="leaky")))
        self.out = self.adopt(Conv(f"{prefix}out.", widths[0], channels, 1, rng, dtype, zero=True))

    def check_shape(self, x):
        step = 2 ** self.cfg.depth
        if x.ndim != 4 or x.shape[2] % step or x.shape[3] % step:
            raise InvalidShapeError(f"U-net input {x.shape} needs spatial dims divisible by {step}")

    def __call__(self, x):
        self.check_shape(x)
        skips = []
        h = x
        for block in self.enc:
            h = block(h)
            skips.append(h)
            h = ops.avgpool2(h)
        h = self.bottom(h)
        for up, dec, skip in zip(self.up, self.dec, reversed(skips)):
            h = ops.leaky_relu(up(ops.upsample2(h)), 0.1)
            h = dec(ops.concat([h, skip], axis=1))
        return self.out(h)


def map_support(maps, eps_rel=EPS_NORM):
    """Pixels where the RSS of the initial maps is above the background floor."""
    m = np.asarray(maps)
    energy = np.sum(np.abs(m) ** 2, axis=0)
    r = np.sqrt(energy)
    return r > eps_rel * r.max() if r.max() > 0 else np.zeros(r.shape, dtype=bool)


def unet_refine_maps(maps0, unet, support=None):
    """Residual U-net correction of each coil's (re, im) pair, then renormalization.

    ``maps0`` is a ``(L, 2, H, W)`` tensor; the same weights process every
    coil.  The result satisfies ``sum_l |S_l|^2 = 1`` on ``support``
    whatever the weights are.
    """
    if not isinstance(maps0, Tensor):
        raise TypeError("maps0 must be a Tensor of shape (L, 2, H, W)")
    if maps0.ndim != 4 or maps0.shape[1] != 2:
        raise InvalidShapeError(f"maps must be (coils, 2, H, W), got {maps0.shape}")
    if support is None:
        support = map_support(cplx.to_complex(maps0.data))
    refined = ops.add(maps0, unet(maps0))
    return cplx.normalize_coils(refined, support)
