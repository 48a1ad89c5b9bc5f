"""Unrolled cross-domain reconstruction network with a buffer of primal iterates.

Each unrolled iteration feeds the buffer and a data-consistency
back-projection ``alpha_k * E^H (E b_0 - y)`` to its own MWCNN and adds the
result to the buffer.  No network ever acts on k-space data: the k-space
side is the fixed forward operator only.
"""
from __future__ import annotations

import numpy as np

from .. import physics
from ..autodiff import Tensor, cplx, ops
from ..errors import InvalidShapeError
from .config import XpdnetConfig
from .layers import Module
from .mwcnn import MWCNN
from .unet import UNet, map_support, unet_refine_maps


class XPDNet(Module):
    def __init__(self, cfg=None, seed=0, dtype=np.float32):
        super().__init__("")
        self.cfg = cfg = cfg or XpdnetConfig()
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.unet = self.adopt(UNet(cfg.unet, rng, dtype)) if cfg.refine_maps else None
        bs = cfg.buffer_size
        self.nets = []
        self.alphas = []
        for k in range(cfg.n_unrolled):
            net = MWCNN(2 * (bs + 1), 2 * bs, cfg.mwcnn, rng, dtype, prefix=f"mwcnn.{k}.")
            self.nets.append(self.adopt(net))
            self.alphas.append(self._param(f"alpha.{k}", np.array(cfg.alpha_init, dtype=dtype)))

    def _as_tensor(self, a, name):
        if isinstance(a, Tensor):
            return a
        return cplx.complex_tensor(a, self.dtype, name=name)

    def prepare_maps(self, maps):
        """Refined (or passed-through) maps as an ``(L, 2, H, W)`` tensor."""
        maps_t = self._as_tensor(maps, "maps")
        if self.unet is None:
            return maps_t
        support = map_support(cplx.to_complex(maps_t.data))
        return unet_refine_maps(maps_t, self.unet, support)

    def __call__(self, y, mask, maps):
        """Reconstruct a ``(2, H, W)`` complex image tensor.

        Parameters
        ----------
        y : ndarray (L, H, W) complex or Tensor (L, 2, H, W)
            Masked coil k-space.
        mask : SamplingMask
        maps : ndarray (L, H, W) complex or Tensor (L, 2, H, W)
            Initial sensitivity estimate.
        """
        y_t = self._as_tensor(y, "kspace")
        n_coils, _, h, w = y_t.shape
        if (h, w) != (mask.height, mask.width):
            raise InvalidShapeError(f"k-space {(h, w)} does not match mask {(mask.height, mask.width)}")
        step = 2 ** self.cfg.mwcnn.scales
        if h % step or w % step:
            raise InvalidShapeError(f"image size {(h, w)} not divisible by {step}")
        s_t = self.prepare_maps(maps)
        if s_t.shape != y_t.shape:
            raise InvalidShapeError(f"maps {s_t.shape} do not match k-space {y_t.shape}")

        bs = self.cfg.buffer_size
        x0 = ops.reshape(cplx.adjoint_op(y_t, s_t, mask), (1, 2, h, w))
        buf = ops.concat([x0] * bs, axis=0)
        for net, alpha in zip(self.nets, self.alphas):
            current = ops.reshape(ops.slice_axis(buf, 0, 1, axis=0), (2, h, w))
            resid = ops.sub(cplx.forward_op(current, s_t, mask), y_t)
            dc = ops.scale_by(cplx.adjoint_op(resid, s_t, mask), alpha)
            net_in = ops.concat([buf, ops.reshape(dc, (1, 2, h, w))], axis=0)
            update = net(ops.reshape(net_in, (1, 2 * (bs + 1), h, w)))
            buf = ops.add(buf, ops.reshape(update, (bs, 2, h, w)))
        return ops.reshape(ops.slice_axis(buf, 0, 1, axis=0), (2, h, w))

    def reconstruct(self, y, mask, maps):
        """Complex ``(H, W)`` reconstruction without recording a graph."""
        return cplx.to_complex(self(y, mask, maps).data)


def xpdnet_forward(y, mask, maps, cfg=None, params=None, seed=0, dtype=np.float32):
    """Functional entry point: build a network, optionally load ``params``, run it."""
    net = XPDNet(cfg, seed=seed, dtype=dtype)
    if params is not None:
        net.load_state(params)
    return net.reconstruct(y, mask, maps)


def zero_filled_adjoint(y, mask, maps):
    """``E^H y``, the reconstruction an untrained network reproduces."""
    return physics.apply_adjoint(physics.ForwardOperator(mask, maps), y)
