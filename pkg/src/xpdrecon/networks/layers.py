"""Parameter containers shared by the networks."""
from __future__ import annotations

import numpy as np

from ..autodiff import Parameter, ops
from ..errors import FormatError


class Module:
    """Holds a flat, ordered ``name -> Parameter`` registry."""

    def __init__(self, prefix=""):
        self.prefix = prefix
        self.params = {}

    def _param(self, name, value):
        full = f"{self.prefix}{name}"
        p = Parameter(value, full)
        self.params[full] = p
        return p

    def adopt(self, child):
        self.params.update(child.params)
        return child

    def parameters(self):
        return list(self.params.values())

    def num_parameters(self):
        return int(sum(p.size for p in self.params.values()))

    def load_state(self, state):
        missing = [name for name in self.params if name not in state]
        if missing:
            raise FormatError(f"state lacks {len(missing)} parameter(s), e.g. {missing[0]!r}")
        for name, p in self.params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise FormatError(f"{name}: shape {value.shape} != {p.shape}")
            p.data = value.astype(p.dtype, copy=True)

    def state(self):
        return {name: p.data for name, p in self.params.items()}


class Conv(Module):
    """Same-padded conv with bias; He-normal init or exact zeros."""

    def __init__(self, prefix, c_in, c_out, kernel, rng, dtype, zero=False):
        super().__init__(prefix)
        shape = (c_out, c_in, kernel, kernel)
        if zero:
            w = np.zeros(shape, dtype=dtype)
        else:
            w = (rng.standard_normal(shape) * np.sqrt(2.0 / (c_in * kernel * kernel))).astype(dtype)
        self.weight = self._param("weight", w)
        self.bias = self._param("bias", np.zeros(c_out, dtype=dtype))

    def __call__(self, x):
        return ops.conv2d(x, self.weight, self.bias)


class ConvBlock(Module):
    """``n`` conv + activation layers."""

    def __init__(self, prefix, c_in, c_out, n, kernel, rng, dtype, act="relu"):
        super().__init__(prefix)
        self.convs = []
        for i in range(n):
            conv = Conv(f"{prefix}conv{i}.", c_in if i == 0 else c_out, c_out, kernel, rng, dtype)
            self.convs.append(self.adopt(conv))
        self.act = ops.relu if act == "relu" else (lambda t: ops.leaky_relu(t, 0.1))

    def __call__(self, x):
        for conv in self.convs:
            x = self.act(conv(x))
        return x
