"""Chambolle-Pock reconstruction with a wavelet-l1 regularizer.

Solves ``min_x sum_l 1/2 ||y_l - M F S_l x||^2 + lam ||psi x||_1`` by
dualizing both terms against the stacked operator ``K = (E; psi)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidShapeError
from .physics import apply_adjoint, apply_forward, ifft2c, rss
from .wavelets import dwt2, idwt2, project_linf


@dataclass
class PdhgConfig:
    lam: float = 1e-2
    n_iter: int = 200
    tau: float | None = None
    sigma: float | None = None
    theta: float = 1.0
    family: str = "db2"
    levels: int = 3
    threshold_ll: bool = False
    opnorm_iters: int = 50

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidConfigError(f"lam must be >= 0, got {self.lam}")
        if not 0.0 <= self.theta <= 1.0:
            raise InvalidConfigError(f"theta must lie in [0, 1], got {self.theta}")
        if self.n_iter < 0:
            raise InvalidConfigError("n_iter must be >= 0")


@dataclass
class PdhgTrace:
    objective: list = field(default_factory=list)
    data_fidelity: list = field(default_factory=list)
    l1_term: list = field(default_factory=list)

    def append(self, parts):
        obj, fid, l1 = parts
        self.objective.append(obj)
        self.data_fidelity.append(fid)
        self.l1_term.append(l1)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "data_fidelity", "l1_term"])
            for i, row in enumerate(zip(self.objective, self.data_fidelity, self.l1_term)):
                w.writerow([i + 1, *(repr(float(v)) for v in row)])


def estimate_opnorm(op, iters=50, seed=0):
    """Power-iteration estimate of ``||E||``."""
    if iters < 5:
        raise InvalidConfigError(f"power iteration needs >= 5 iterations, got {iters}")
    rng = np.random.default_rng(seed)
    shape = op.image_shape
    v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        ev = apply_forward(op, v)
        est = float(np.linalg.norm(ev))
        w = apply_adjoint(op, ev)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
    return est


def _l1(coeffs, threshold_ll):
    bands = list(coeffs.arrays()) if threshold_ll else [b for band in coeffs.details for b in band]
    return float(sum(np.sum(np.abs(b)) for b in bands))


def objective_terms(x, y, op, lam, family="db2", levels=3, threshold_ll=False):
    """``(total, data fidelity, lam * l1)``."""
    if x.shape != op.image_shape or y.shape != op.maps.shape:
        raise InvalidShapeError("x, y and operator shapes disagree")
    r = y - apply_forward(op, x)
    fid = 0.5 * float(np.sum(np.abs(r) ** 2))
    reg = lam * _l1(dwt2(x, levels, family), threshold_ll) if lam else 0.0
    return fid + reg, fid, reg


def objective(x, y, op, lam, family="db2", levels=3, threshold_ll=False):
    return objective_terms(x, y, op, lam, family, levels, threshold_ll)[0]


def step_sizes(cfg, opnorm_e):
    """Resolve ``(tau, sigma, ||K||)`` and refuse steps that break convergence."""
    knorm = float(np.sqrt(opnorm_e ** 2 + 1.0))  # psi is orthonormal
    tau = cfg.tau if cfg.tau is not None else 0.9 / knorm
    sigma = cfg.sigma if cfg.sigma is not None else 0.9 / knorm
    if tau <= 0 or sigma <= 0:
        raise InvalidConfigError("step sizes must be positive")
    if tau * sigma * knorm ** 2 > 1.0 + 1e-12:
        raise InvalidConfigError(
            f"tau*sigma*||K||^2 = {tau * sigma * knorm ** 2:.4g} > 1; PDHG would not be guaranteed to converge"
        )
    return tau, sigma, knorm


def solve_cs(y, op, cfg=None, x0=None, opnorm=None, callback=None):
    """Run Chambolle-Pock on the wavelet-l1 problem.

    Returns
    -------
    x : ndarray
        Final primal iterate.
    trace : PdhgTrace
        Objective after every iteration.
    """
    cfg = cfg or PdhgConfig()
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != op.maps.shape:
        raise InvalidShapeError(f"k-space {y.shape} does not match operator {op.maps.shape}")
    if opnorm is None:
        opnorm = estimate_opnorm(op, cfg.opnorm_iters)
    tau, sigma, _ = step_sizes(cfg, opnorm)

    x = apply_adjoint(op, y) if x0 is None else np.array(x0, dtype=np.complex128)
    x_bar = x.copy()
    p = np.zeros_like(y)
    q = dwt2(np.zeros_like(x), cfg.levels, cfg.family)
    ll_radius = cfg.lam if cfg.threshold_ll else 0.0
    trace = PdhgTrace()

    for it in range(cfg.n_iter):
        # dual ascent; the data-term conjugate prox is closed form
        p = (p + sigma * (apply_forward(op, x_bar) - y)) / (1.0 + sigma)
        q = q + dwt2(x_bar, cfg.levels, cfg.family).map(lambda c: sigma * c)
        q.ll = project_linf(q.ll, ll_radius)
        q.details = [tuple(project_linf(b, cfg.lam) for b in band) for band in q.details]
        # primal descent, G = 0
        x_new = x - tau * (apply_adjoint(op, p) + idwt2(q))
        x_bar = x_new + cfg.theta * (x_new - x)
        x = x_new
        trace.append(objective_terms(x, y, op, cfg.lam, cfg.family, cfg.levels, cfg.threshold_ll))
        if callback is not None:
            callback(it, x)
    return x, trace


def zero_filled(y, op):
    """RSS of the per-coil inverse transforms of the masked k-space."""
    y = np.asarray(y)
    if y.shape != op.maps.shape:
        raise InvalidShapeError(f"k-space {y.shape} does not match operator {op.maps.shape}")
    return zero_filled_rss(y, op.mask)


def zero_filled_rss(y, mask):
    """Same as :func:`zero_filled` but needs only the mask, no coil maps."""
    return rss(ifft2c(mask.apply(np.asarray(y))))
