"""Finite-difference gradient-check suites for the primitives and the networks.

All suites run in double precision.  Network suites randomize every
parameter (including the zero-initialized output layers) so that no
gradient path is trivially zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, check_gradients, cplx, ops
from .losses import compound_loss
from .networks import MWCNN, UNet, XPDNet, MwcnnConfig, UnetConfig, XpdnetConfig, unet_refine_maps
from .phantom import make_coil_maps, make_phantom
from .physics import ForwardOperator, apply_forward, make_mask

PRIMITIVE_TOL = 1e-4
NETWORK_TOL = 1e-3

F64 = np.float64


@dataclass
class CheckLine:
    suite: str
    name: str
    max_rel_error: float
    tol: float

    @property
    def passed(self):
        return self.max_rel_error < self.tol

    def __str__(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.suite}:{self.name} max_rel_err={self.max_rel_error:.3e} tol={self.tol:.0e}"


def _leaf(rng, *shape, positive=False, away=1e-3):
    d = rng.standard_normal(shape)
    if positive:
        d = np.abs(d) + 0.5
    else:
        # keep away from kinks of relu / clamp style primitives
        d = np.where(np.abs(d) < away, np.sign(d + 1e-12) * (away + np.abs(d)), d)
    return Tensor(d, requires_grad=True, dtype=F64)


def _weighted_sum(fn, leaves, rng):
    """Reduce a primitive's output to a scalar with fixed random weights."""
    w = Tensor(rng.standard_normal(fn(*leaves).shape), dtype=F64)
    return lambda: ops.sum(ops.mul(fn(*leaves), w))


def _lines(suite, results, tol):
    return [CheckLine(suite, r.name, r.max_rel_error, tol) for r in results]


def primitive_cases(rng):
    """``name -> (fn, leaves)`` for every primitive."""
    small_mask = make_mask(4, 4, 2, 0)
    return {
        "add": (ops.add, [_leaf(rng, 2, 3), _leaf(rng, 2, 3)]),
        "sub": (ops.sub, [_leaf(rng, 2, 3), _leaf(rng, 2, 3)]),
        "mul": (ops.mul, [_leaf(rng, 2, 3), _leaf(rng, 2, 3)]),
        "div": (ops.div, [_leaf(rng, 2, 3), _leaf(rng, 2, 3, positive=True)]),
        "scale": (lambda a: ops.scale(a, -1.7), [_leaf(rng, 2, 3)]),
        "add_scalar": (lambda a: ops.add_scalar(a, 0.3), [_leaf(rng, 2, 3)]),
        "scale_by": (ops.scale_by, [_leaf(rng, 3, 4), _leaf(rng)]),
        "square": (ops.square, [_leaf(rng, 2, 3)]),
        "sqrt": (ops.sqrt, [_leaf(rng, 2, 3, positive=True)]),
        "pow": (lambda a: ops.pow_scalar(a, 0.3), [_leaf(rng, 2, 3, positive=True)]),
        "clamp_min": (lambda a: ops.clamp_min(a, 0.0), [_leaf(rng, 2, 3)]),
        "relu": (ops.relu, [_leaf(rng, 2, 3)]),
        "leaky_relu": (lambda a: ops.leaky_relu(a, 0.1), [_leaf(rng, 2, 3)]),
        "charbonnier": (ops.charbonnier, [_leaf(rng, 2, 3)]),
        "sum": (ops.sum, [_leaf(rng, 2, 3)]),
        "mean": (ops.mean, [_leaf(rng, 2, 3)]),
        "reshape": (lambda a: ops.reshape(a, (3, 2)), [_leaf(rng, 2, 3)]),
        "concat": (lambda a, b: ops.concat([a, b], axis=1), [_leaf(rng, 1, 2, 4, 4), _leaf(rng, 1, 3, 4, 4)]),
        "slice": (lambda a: ops.slice_axis(a, 1, 3, axis=1), [_leaf(rng, 1, 4, 4, 4)]),
        "crop": (lambda a: ops.crop(a, 1), [_leaf(rng, 1, 2, 5, 5)]),
        "conv2d_3x3": (ops.conv2d, [_leaf(rng, 1, 2, 6, 6), _leaf(rng, 2, 2, 3, 3), _leaf(rng, 2)]),
        "conv2d_1x1": (ops.conv2d, [_leaf(rng, 2, 3, 4, 4), _leaf(rng, 2, 3, 1, 1), _leaf(rng, 2)]),
        "conv2d_nobias": (lambda x, w: ops.conv2d(x, w), [_leaf(rng, 1, 3, 5, 5), _leaf(rng, 2, 3, 5, 5)]),
        "filter2d_valid": (lambda a: ops.filter2d_valid(a, np.hanning(5)), [_leaf(rng, 1, 1, 12, 10)]),
        "avgpool2": (ops.avgpool2, [_leaf(rng, 1, 2, 4, 6)]),
        "upsample2": (ops.upsample2, [_leaf(rng, 1, 2, 3, 4)]),
        "dwt_layer": (ops.dwt_layer, [_leaf(rng, 1, 2, 4, 6)]),
        "idwt_layer": (ops.idwt_layer, [_leaf(rng, 1, 8, 2, 3)]),
        "fft2c": (cplx.fft2c, [_leaf(rng, 3, 2, 4, 6)]),
        "ifft2c": (cplx.ifft2c, [_leaf(rng, 3, 2, 4, 6)]),
        "kmask": (lambda a: cplx.apply_mask(a, small_mask), [_leaf(rng, 3, 2, 4, 4)]),
        "coil_expand": (cplx.coil_expand, [_leaf(rng, 2, 4, 4), _leaf(rng, 3, 2, 4, 4)]),
        "coil_combine": (cplx.coil_combine, [_leaf(rng, 3, 2, 4, 4), _leaf(rng, 3, 2, 4, 4)]),
        "complex_abs": (cplx.complex_abs, [_leaf(rng, 2, 4, 4)]),
        "normalize_coils": (
            lambda a: cplx.normalize_coils(a, np.arange(16).reshape(4, 4) % 3 > 0),
            [_leaf(rng, 3, 2, 4, 4)],
        ),
    }


def check_primitives(seed=0):
    rng = np.random.default_rng(seed)
    lines = []
    for name, (fn, leaves) in primitive_cases(rng).items():
        results = check_gradients(_weighted_sum(fn, leaves, rng), leaves, n_coords=None)
        lines.append(CheckLine("primitives", name, max(r.max_rel_error for r in results), PRIMITIVE_TOL))
    return lines


def check_conv(seed=0):
    rng = np.random.default_rng(seed)
    leaves = [_leaf(rng, 1, 2, 6, 6), _leaf(rng, 2, 2, 3, 3), _leaf(rng, 2)]
    for t, name in zip(leaves, ("input", "weight", "bias")):
        t.name = name
    results = check_gradients(_weighted_sum(ops.conv2d, leaves, rng), leaves, n_coords=None)
    return _lines("conv", results, PRIMITIVE_TOL)


def randomize(module, rng, scale=0.3, fan_in=False):
    """Overwrite every parameter with random values (double precision).

    With ``fan_in`` conv weights get a He-style standard deviation so deep
    stacks neither shrink nor blow up the signal; other parameters use ``scale``.
    """
    for p in module.parameters():
        std = np.sqrt(2.0 / np.prod(p.shape[1:])) if fan_in and p.ndim == 4 else scale
        # np.array keeps 0-d parameters as arrays, so in-place perturbation reaches them
        p.data = np.array(std * rng.standard_normal(p.shape), dtype=F64)


def _smooth_target(rng, n):
    base = np.abs(make_phantom(n))
    return np.clip(base + 0.05 * rng.standard_normal((n, n)), 0, None)


GRADCHECK_MWCNN = MwcnnConfig(scales=3, filters=(4, 6, 8), blocks=2)
GRADCHECK_UNET = UnetConfig(depth=3, base_filters=4)


def check_mwcnn(seed=0, n_coords=50):
    """Full MWCNN (3 scales, reduced widths) followed by the compound loss."""
    rng = np.random.default_rng(seed)
    net = MWCNN(2, 2, GRADCHECK_MWCNN, rng, F64, prefix="mwcnn.", zero_last=False)
    randomize(net, rng)
    x = _leaf(rng, 1, 2, 32, 32)
    x.name = "input"
    target = Tensor(_smooth_target(rng, 32), dtype=F64)

    def loss():
        out = ops.reshape(net(x), (2, 32, 32))
        return compound_loss(cplx.complex_abs(out, 1e-12), target).total

    results = check_gradients(loss, [x, *net.parameters()], n_coords=n_coords, seed=seed)
    return _lines("mwcnn", results, NETWORK_TOL)


def check_unet(seed=0, n_coords=20):
    """Map refiner composed with the forward operator."""
    rng = np.random.default_rng(seed)
    n, coils = 16, 2
    unet = UNet(GRADCHECK_UNET, rng, F64)
    randomize(unet, rng, 0.2)
    maps0 = cplx.complex_tensor(make_coil_maps(n, coils), F64, requires_grad=True, name="maps0")
    x = cplx.complex_tensor(make_phantom(n), F64)
    mask = make_mask(n, n, 2, 4)
    support = np.ones((n, n), dtype=bool)
    w = Tensor(rng.standard_normal((coils, 2, n, n)), dtype=F64)

    def loss():
        maps = unet_refine_maps(maps0, unet, support)
        return ops.sum(ops.mul(cplx.forward_op(x, maps, mask), w))

    results = check_gradients(loss, [maps0, *unet.parameters()], n_coords=n_coords, seed=seed)
    return _lines("unet", results, NETWORK_TOL)


def check_xpdnet(seed=0, n_coords=10):
    """Two unrolled iterations on 16x16 with 2 coils, map refinement on."""
    rng = np.random.default_rng(seed)
    n = 16
    cfg = XpdnetConfig(n_unrolled=2, buffer_size=5, refine_maps=True, mwcnn=GRADCHECK_MWCNN, unet=GRADCHECK_UNET)
    net = XPDNet(cfg, seed=seed, dtype=F64)
    randomize(net, rng, 0.1)
    # fan-in scaling keeps the refiner's gradients well above finite-difference round-off
    randomize(net.unet, rng, 0.1, fan_in=True)
    image = make_phantom(n)
    maps = make_coil_maps(n, 2)
    mask = make_mask(n, n, 4, 4)
    y = apply_forward(ForwardOperator(mask, maps), image)
    target = Tensor(np.abs(image), dtype=F64)

    def loss():
        out = net(y, mask, maps)
        return compound_loss(cplx.complex_abs(out, 1e-12), target, scales=1).total

    results = check_gradients(loss, net.parameters(), n_coords=n_coords, seed=seed)
    return _lines("xpdnet", results, NETWORK_TOL)


def check_loss(seed=0):
    rng = np.random.default_rng(seed)
    target = Tensor(_smooth_target(rng, 32), dtype=F64)
    # unclipped, so no residual sits on the charbonnier kink
    pred = Tensor(target.data + 0.1 * rng.standard_normal(target.shape), requires_grad=True, dtype=F64, name="pred")
    results = check_gradients(lambda: compound_loss(pred, target).total, [pred], n_coords=200, seed=seed)
    return _lines("loss", results, NETWORK_TOL)


SUITES = {
    "primitives": check_primitives,
    "conv": check_conv,
    "mwcnn": check_mwcnn,
    "unet": check_unet,
    "xpdnet": check_xpdnet,
    "loss": check_loss,
}
