"""Rectified Adam."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidShapeError, NumericError

RECTIFY_THRESHOLD = 4.0


def rho_inf(beta2):
    return 2.0 / (1.0 - beta2) - 1.0


def rho(t, beta2):
    """Length of the approximated simple moving average at step ``t`` (1-based)."""
    b2t = beta2 ** t
    return rho_inf(beta2) - 2.0 * t * b2t / (1.0 - b2t)


def rectification(t, beta2):
    r_t, r_inf = rho(t, beta2), rho_inf(beta2)
    return np.sqrt((r_t - 4) * (r_t - 2) * r_inf / ((r_inf - 4) * (r_inf - 2) * r_t))


@dataclass
class RAdam:
    """RAdam state for a fixed list of parameter names.

    While the variance of the adaptive rate is intractable (``rho_t <= 4``)
    the update is plain bias-corrected momentum; afterwards the adaptive
    step is scaled by the rectification term.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    last_rectified: bool | None = None

    def step(self, params, grads):
        """Update ``params`` (name -> Parameter) in place from ``grads`` (name -> array).

        Missing gradients count as zero.  A non-finite gradient rejects the
        whole step and leaves state and parameters untouched.
        """
        for name, g in grads.items():
            if g is None:
                continue
            if name not in params or np.shape(g) != params[name].shape:
                raise InvalidShapeError(f"gradient for {name!r} does not match its parameter")
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for {name!r}; step rejected")
        self.t += 1
        t = self.t
        b1, b2 = self.beta1, self.beta2
        r_t = rho(t, b2)
        rectified = r_t > RECTIFY_THRESHOLD
        self.last_rectified = rectified
        bias1 = 1.0 - b1 ** t
        bias2 = 1.0 - b2 ** t
        r = rectification(t, b2) if rectified else 0.0
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(p.data)
            g = np.asarray(g, dtype=np.float64)
            m = self.m.get(name)
            v = self.v.get(name)
            if m is None:
                m = np.zeros(p.shape)
                v = np.zeros(p.shape)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / bias1
            if rectified:
                update = r * m_hat / (np.sqrt(v / bias2) + self.eps)
            else:
                update = m_hat
            p.data = (p.data - self.lr * update).astype(p.dtype)
        return rectified

    def state(self):
        return {"t": self.t, "m": self.m, "v": self.v}
