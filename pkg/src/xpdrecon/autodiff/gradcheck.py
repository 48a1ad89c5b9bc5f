"""Central finite-difference gradient checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tape, backward


@dataclass
class GradcheckResult:
    name: str
    max_rel_error: float
    checked: int

    def passed(self, tol):
        return self.max_rel_error < tol


def rel_errors(analytic, numeric, floor=1e-6):
    """Coordinate-wise ``|a - n| / max(|a|, |n|, floor * max|n|)``.

    The floor keeps coordinates whose true gradient is tiny relative to the
    rest from being judged on round-off alone.
    """
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    scale = floor * max(float(np.max(np.abs(n))) if n.size else 0.0, 1e-300)
    den = np.maximum(np.maximum(np.abs(a), np.abs(n)), scale)
    return np.abs(a - n) / den


def check_gradients(loss_fn, tensors, n_coords=50, h=1e-5, seed=0):
    """Compare reverse-mode gradients of ``loss_fn()`` with central differences.

    Parameters
    ----------
    loss_fn : callable
        Builds the graph from ``tensors`` and returns a scalar Tensor.
    tensors : sequence of Tensor
        Leaves to check; each must have ``requires_grad`` set.
    n_coords : int or None
        Random coordinates sampled per tensor (all of them when ``None`` or
        when the tensor is smaller).

    Returns
    -------
    list of GradcheckResult
    """
    for t in tensors:
        t.grad = None
    with Tape() as tape:
        loss = loss_fn()
    backward(tape, loss)
    rng = np.random.default_rng(seed)
    results = []
    for i, t in enumerate(tensors):
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        if n_coords is None or n_coords >= flat.size:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, size=n_coords, replace=False)
        numeric = np.empty(len(coords))
        for j, c in enumerate(coords):
            orig = flat[c]
            flat[c] = orig + h
            fp = float(loss_fn().data)
            flat[c] = orig - h
            fm = float(loss_fn().data)
            flat[c] = orig
            numeric[j] = (fp - fm) / (2 * h)
        err = rel_errors(analytic.reshape(-1)[coords], numeric)
        results.append(GradcheckResult(t.name or f"input{i}", float(err.max()), len(coords)))
    return results
