"""Tensors, the recording tape and reverse-mode backward."""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import InvalidShapeError

DEFAULT_DTYPE = np.float32

_ids = itertools.count()
_local = threading.local()


def _tape_stack():
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Dense real array node."""

    __array_priority__ = 100  # make ndarray <op> Tensor defer to us

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        arr = np.asarray(data, dtype=dtype if dtype is not None else None)
        if dtype is None and not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self.id = next(_ids)
        self.op = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag}, requires_grad={self.requires_grad})"

    # arithmetic sugar over the primitives in ops.py
    def __add__(self, other):
        from . import ops
        return ops.add(self, other) if isinstance(other, Tensor) else ops.add_scalar(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other) if isinstance(other, Tensor) else ops.add_scalar(self, -other)

    def __rsub__(self, other):
        from . import ops
        return ops.add_scalar(ops.scale(self, -1.0), other)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other) if isinstance(other, Tensor) else ops.scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other) if isinstance(other, Tensor) else ops.scale(self, 1.0 / other)

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)


class Parameter(Tensor):
    """Named trainable leaf; gradients accumulate into ``grad``."""

    def __init__(self, data, name, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype, name=name)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape}, dtype={self.dtype})"


@dataclass
class TapeEntry:
    op: str
    inputs: tuple
    output: Tensor
    backward: Callable


@dataclass
class Tape:
    """Ordered record of primitive applications.

    Use as a context manager; primitives executed inside it record
    themselves whenever one of their inputs requires a gradient.
    """

    entries: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        _tape_stack().pop()
        return False

    def record(self, op, inputs, output, backward):
        for t in inputs:
            if isinstance(t, Parameter):
                self.params.setdefault(t.id, t)
        self.entries.append(TapeEntry(op, tuple(inputs), output, backward))

    def __len__(self):
        return len(self.entries)


def make_node(op, inputs, data, backward):
    """Wrap ``data`` as a primitive's output and record it when needed."""
    out = Tensor(data)
    out.op = op
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(op, inputs, out, backward)
    return out


def backward(tape, loss, grad=None):
    """Reverse sweep over ``tape`` from a scalar ``loss``.

    Gradients accumulate into ``.grad`` of every leaf requiring one (so
    several uses of a node add up).  Returns ``{name: grad}`` for the
    Parameters touched by the tape.
    """
    if loss.size != 1:
        raise InvalidShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads = {loss.id: np.ones_like(loss.data) if grad is None else np.asarray(grad, dtype=loss.dtype)}
    produced = set()
    for entry in reversed(tape.entries):
        produced.add(entry.output.id)
        g = grads.pop(entry.output.id, None)
        if g is None:
            continue
        in_grads = entry.backward(g)
        for t, gi in zip(entry.inputs, in_grads):
            if gi is None or not t.requires_grad:
                continue
            if gi.shape != t.shape:
                raise InvalidShapeError(f"{entry.op}: gradient shape {gi.shape} != input shape {t.shape}")
            if t.id in grads:
                grads[t.id] = grads[t.id] + gi
            else:
                grads[t.id] = gi
    leaves = {}
    for entry in tape.entries:
        for t in entry.inputs:
            if t.requires_grad and t.id not in produced:
                leaves[t.id] = t
    for tid, t in leaves.items():
        g = grads.get(tid)
        if g is None:
            continue
        t.grad = g.copy() if t.grad is None else t.grad + g
    return {p.name: p.grad for p in tape.params.values()}
