"""Synthetic slice datasets and the batch-size-1 training loop."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import formats
from .autodiff import Tape, backward, cplx
from .errors import InvalidConfigError, NumericError
from .losses import compound_loss
from .metrics import psnr
from .networks import XPDNet, XpdnetConfig
from .networks.config import apply_overrides, parse_text, to_text
from .optim import RAdam
from .pdhg import zero_filled
from .phantom import CONTRASTS, make_coil_maps, random_phantom
from .physics import ForwardOperator, apply_forward, make_mask
from .sense import estimate_maps_lowfreq

log = logging.getLogger(__name__)

LOSS_COLUMNS = ("step", "epoch", "loss", "l1_term", "msssim_term")


@dataclass
class TrainConfig:
    epochs: int = 5
    batch_size: int = 1
    acceleration: int = 4
    acs_count: int = 0  # 0 picks the per-acceleration default
    seed: int = 0
    lr: float = 1e-3
    loss_alpha: float = 0.5
    loss_beta: float = 0.5
    max_steps: int = 0  # 0 means no cap
    finetune_epochs: int = 1
    finetune_contrast: str = ""  # empty disables the fine-tuning stage
    dataset: str = "synthetic"  # or a KSP1 file of single-coil ground-truth images
    n_slices: int = 32
    image_size: int = 32
    coils: int = 2
    contrasts: str = "T1,T2,FLAIR,T1POST"
    noise_sigma: float = 0.0
    grad_clip: float = 0.0  # 0 disables clipping
    checkpoint_every: int = 0
    checkpoint_path: str = ""
    history_csv: str = ""

    def __post_init__(self):
        if self.batch_size != 1:
            raise InvalidConfigError("batch size is fixed at 1")
        if self.acceleration < 1:
            raise InvalidConfigError(f"acceleration must be >= 1, got {self.acceleration}")
        if self.epochs < 0 or self.finetune_epochs < 0:
            raise InvalidConfigError("epoch counts must be >= 0")
        for c in self.contrast_list:
            if c not in CONTRASTS:
                raise InvalidConfigError(f"unknown contrast {c!r}")
        if self.finetune_contrast and self.finetune_contrast not in CONTRASTS:
            raise InvalidConfigError(f"unknown fine-tune contrast {self.finetune_contrast!r}")

    @property
    def contrast_list(self):
        return [c.strip() for c in self.contrasts.split(",") if c.strip()]


@dataclass
class Sample:
    image: np.ndarray
    contrast: str
    kspace: np.ndarray
    mask: object
    maps0: np.ndarray
    true_maps: np.ndarray

    @property
    def target(self):
        return np.abs(self.image)


def simulate_sample(image, contrast, coils, mask, rng, noise_sigma=0.0, rotation=0.0):
    n = image.shape[0]
    maps = make_coil_maps(n, coils, rotation)
    y = apply_forward(ForwardOperator(mask, maps), image)
    if noise_sigma > 0:
        noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        y = mask.apply(y + noise_sigma / np.sqrt(2) * noise)
    return Sample(image, contrast, y, mask, estimate_maps_lowfreq(y, mask), maps)


def make_dataset(cfg, n_slices=None, seed=None):
    """Deterministic list of simulated slices for ``cfg``.

    Images come either from random phantoms (cycling through the configured
    contrasts) or from a KSP1 file holding single-coil ground-truth images.
    """
    n_slices = cfg.n_slices if n_slices is None else n_slices
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    if cfg.dataset == "synthetic":
        contrasts = cfg.contrast_list
        images = [
            (random_phantom(cfg.image_size, rng, contrasts[i % len(contrasts)]), contrasts[i % len(contrasts)])
            for i in range(n_slices)
        ]
    else:
        vol = formats.read_kspace(cfg.dataset)
        if vol.data.shape[1] != 1:
            raise InvalidConfigError("a dataset file must hold single-coil ground-truth images")
        images = [(img / max(np.abs(img).max(), 1e-30), vol.contrast) for img in vol.data[:n_slices, 0]]
    if not images:
        raise InvalidConfigError("dataset is empty")
    h, w = images[0][0].shape
    mask = make_mask(h, w, cfg.acceleration, cfg.acs_count or None)
    samples = []
    for img, contrast in images:
        rot = rng.uniform(0, 2 * np.pi)
        samples.append(simulate_sample(img, contrast, cfg.coils, mask, rng, cfg.noise_sigma, rot))
    return samples


@dataclass
class TrainResult:
    net: XPDNet
    optimizer: RAdam
    history: list = field(default_factory=list)
    visited: list = field(default_factory=list)


def magnitude(out):
    return cplx.complex_abs(out, 1e-12)


def training_step(net, opt, sample, cfg):
    with Tape() as tape:
        out = net(sample.kspace, sample.mask, sample.maps0)
        terms = compound_loss(magnitude(out), sample.target, cfg.loss_alpha, cfg.loss_beta)
    loss = float(terms.total.data)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite training loss {loss}")
    grads = backward(tape, terms.total)
    if cfg.grad_clip > 0:
        total = np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))
        if total > cfg.grad_clip:
            grads = {k: g * (cfg.grad_clip / total) for k, g in grads.items()}
    opt.step(net.params, grads)
    for p in net.parameters():
        p.grad = None
    return loss, float(terms.l1.data), float(terms.msssim.data)


def train(model_cfg=None, cfg=None, dataset=None, dtype=np.float32):
    """Train an XPDNet; returns the network, optimizer state and loss history.

    Main epochs shuffle the full slice list with a seeded generator; the
    optional fine-tuning stage then runs only on slices of
    ``cfg.finetune_contrast``.
    """
    model_cfg = model_cfg or XpdnetConfig()
    cfg = cfg or TrainConfig()
    samples = make_dataset(cfg) if dataset is None else dataset
    if not samples:
        raise InvalidConfigError("dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    net = XPDNet(model_cfg, seed=cfg.seed, dtype=dtype)
    opt = RAdam(lr=cfg.lr)
    result = TrainResult(net, opt)

    stages = [("main", list(range(len(samples))), cfg.epochs)]
    if cfg.finetune_contrast and cfg.finetune_epochs:
        subset = [i for i, s in enumerate(samples) if s.contrast == cfg.finetune_contrast]
        stages.append(("finetune", subset, cfg.finetune_epochs))

    step = 0
    epoch = 0
    for stage, indices, n_epochs in stages:
        for _ in range(n_epochs):
            for idx in rng.permutation(indices) if indices else []:
                if cfg.max_steps and step >= cfg.max_steps:
                    break
                loss, l1, ms = training_step(net, opt, samples[idx], cfg)
                step += 1
                result.history.append((step, epoch, loss, l1, 1.0 - ms))
                result.visited.append((stage, int(idx)))
                if cfg.checkpoint_every and cfg.checkpoint_path and step % cfg.checkpoint_every == 0:
                    save_checkpoint(cfg.checkpoint_path, net, opt)
                if step % 50 == 0:
                    log.info("step %d epoch %d loss %.5f", step, epoch, loss)
            epoch += 1
    if cfg.history_csv:
        write_history_csv(cfg.history_csv, result.history)
    return result


def smoothed(values, window=20):
    """Means of the first and last ``window`` entries."""
    values = np.asarray(values, dtype=float)
    window = min(window, len(values))
    return float(values[:window].mean()), float(values[-window:].mean())


def write_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOSS_COLUMNS)
        for step, epoch, loss, l1, ms_term in history:
            w.writerow([step, epoch, repr(loss), repr(l1), repr(ms_term)])


def evaluate(net, samples):
    """Mean PSNR of the network and of zero-filled RSS over ``samples``."""
    net_psnr, zf_psnr = [], []
    for s in samples:
        target = s.target
        rec = np.abs(net.reconstruct(s.kspace, s.mask, s.maps0))
        zf = zero_filled(s.kspace, ForwardOperator(s.mask, s.maps0))
        net_psnr.append(psnr(rec, target, 1.0))
        zf_psnr.append(psnr(zf, target, 1.0))
    return float(np.mean(net_psnr)), float(np.mean(zf_psnr))


# ----------------------------------------------------------------- checkpoints

def save_checkpoint(path, net, opt=None):
    optimizer = None
    if opt is not None:
        optimizer = {"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps,
                     "t": opt.t, "m": opt.m, "v": opt.v}
    ckpt = formats.Checkpoint(to_text(net.cfg), dict(net.state()), optimizer)
    formats.write_checkpoint(path, ckpt)


def load_checkpoint(path):
    """Rebuild ``(net, optimizer)`` from a CKPT1 file."""
    ckpt = formats.read_checkpoint(path)
    cfg = apply_overrides(XpdnetConfig(), parse_text(ckpt.config_text))
    dtype = next(iter(ckpt.params.values())).dtype if ckpt.params else np.float32
    net = XPDNet(cfg, dtype=dtype)
    net.load_state(ckpt.params)
    opt = None
    if ckpt.optimizer is not None:
        o = ckpt.optimizer
        opt = RAdam(lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"], t=o["t"], m=o["m"], v=o["v"])
    return net, opt


def train_config_from_items(items):
    """Split ``key=value`` items into model (``model.*``) and training overrides."""
    model_items = {k[len("model."):]: v for k, v in items.items() if k.startswith("model.")}
    train_items = {k: v for k, v in items.items() if not k.startswith("model.")}
    return apply_overrides(XpdnetConfig(), model_items), apply_overrides(TrainConfig(), train_items)


__all__ = [
    "LOSS_COLUMNS",
    "Sample",
    "TrainConfig",
    "TrainResult",
    "evaluate",
    "load_checkpoint",
    "make_dataset",
    "save_checkpoint",
    "simulate_sample",
    "smoothed",
    "train",
    "train_config_from_items",
    "write_history_csv",
]
