"""Multi-scale wavelet CNN image corrector."""
from __future__ import annotations

import numpy as np

from ..autodiff import ops
from ..errors import InvalidShapeError
from .config import MwcnnConfig
from .layers import Conv, ConvBlock, Module


class MWCNN(Module):
    """Encoder-decoder whose down/up-sampling are Haar DWT/IDWT layers.

    Scale ``s`` runs ``blocks`` conv layers with ``filters[s]`` channels.
    Going down, the DWT stacks four subbands (4x channels, half the size);
    going up, a conv produces ``4 * filters[s]`` channels that the IDWT
    folds back, and the encoder features of that scale are added.  The
    output conv is zero-initialized so the untrained net returns zeros.
    """

    def __init__(self, c_in, c_out, cfg=None, rng=None, dtype=np.float32, prefix="", zero_last=True):
        super().__init__(prefix)
        cfg = cfg or MwcnnConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        self.c_in, self.c_out = c_in, c_out
        f, k, n = cfg.filters, cfg.kernel, cfg.blocks
        self.enc = []
        for s in range(cfg.scales):
            c = c_in if s == 0 else 4 * f[s - 1]
            self.enc.append(self.adopt(ConvBlock(f"{prefix}enc{s}.", c, f[s], n, k, rng, dtype)))
        self.up = []
        self.dec = []
        for s in reversed(range(cfg.scales - 1)):
            self.up.append(self.adopt(Conv(f"{prefix}up{s}.", f[s + 1], 4 * f[s], k, rng, dtype)))
            self.dec.append(self.adopt(ConvBlock(f"{prefix}dec{s}.", f[s], f[s], n, k, rng, dtype)))
        self.out = self.adopt(Conv(f"{prefix}out.", f[0], c_out, k, rng, dtype, zero=zero_last))

    def check_shape(self, x):
        step = 2 ** self.cfg.scales
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise InvalidShapeError(f"expected (N, {self.c_in}, H, W) input, got {x.shape}")
        if x.shape[2] % step or x.shape[3] % step:
            raise InvalidShapeError(f"spatial dims {x.shape[2:]} not divisible by {step}")

    def __call__(self, x):
        self.check_shape(x)
        skips = []
        h = x
        for s, block in enumerate(self.enc):
            if s > 0:
                h = ops.dwt_layer(h)
            h = block(h)
            skips.append(h)
        for up, dec, skip in zip(self.up, self.dec, reversed(skips[:-1])):
            h = ops.idwt_layer(up(h))
            h = dec(ops.add(h, skip))
        return self.out(h)
