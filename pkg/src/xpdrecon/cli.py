"""Command-line entry point: ``xpdrecon <subcommand> ...``.

Every subcommand reads and writes files only.  Exit codes: 0 success,
2 invalid configuration, 3 data or format error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import formats
from .errors import InvalidConfigError, NumericError, ReconError
from .metrics import slice_metrics, write_metrics_csv
from .networks import XPDNet
from .pdhg import PdhgConfig, solve_cs, zero_filled_rss
from .phantom import make_coil_maps, make_phantom
from .physics import ForwardOperator, apply_forward, make_mask
from .sense import estimate_maps_lowfreq

log = logging.getLogger("xpdrecon")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _positive(kind):
    def parse(raw):
        value = kind(raw)
        if value < 1:
            raise argparse.ArgumentTypeError(f"must be >= 1, got {raw}")
        return value
    return parse


def _nonneg_float(raw):
    value = float(raw)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {raw}")
    return value


# ----------------------------------------------------------------- commands

def cmd_phantom(args):
    formats.write_image(args.out, make_phantom(args.size, smooth_phase=args.smooth_phase))


def cmd_mask(args):
    width = args.width or args.height
    formats.write_mask(args.out, make_mask(args.height, width, args.accel, args.acs, args.offset))


def cmd_sim(args):
    image = formats.read_image(args.image)
    mask = formats.read_mask(args.mask)
    if image.shape[0] != image.shape[1]:
        raise InvalidConfigError(f"sim needs a square image, got {image.shape}")
    if image.shape != (mask.height, mask.width):
        raise InvalidConfigError(f"image {image.shape} does not match mask {(mask.height, mask.width)}")
    maps = make_coil_maps(image.shape[0], args.coils)
    y = apply_forward(ForwardOperator(mask, maps), image)
    if args.noise_sigma > 0:
        rng = np.random.default_rng(args.seed)
        noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        y = mask.apply(y + args.noise_sigma / np.sqrt(2) * noise)
    formats.write_kspace(args.out, y[None])
    if args.maps_out:
        formats.write_maps(args.maps_out, maps)


def _load_kspace(path):
    vol = formats.read_kspace(path)
    if vol.data.shape[0] != 1:
        raise InvalidConfigError(f"{path}: expected one slice, got {vol.data.shape[0]}")
    return vol.data[0].astype(np.complex128)


def cmd_maps(args):
    y = _load_kspace(args.kspace)
    formats.write_maps(args.out, estimate_maps_lowfreq(y, formats.read_mask(args.mask)))


def _recon_inputs(args):
    y = _load_kspace(args.kspace)
    mask = formats.read_mask(args.mask)
    maps = formats.read_maps(args.maps) if args.maps else estimate_maps_lowfreq(y, mask)
    return y, mask, maps


def _write_recon(args, image):
    if not np.all(np.isfinite(image)):
        raise NumericError("reconstruction contains non-finite values")
    formats.write_image(args.out, image)
    formats.write_pgm16(args.pgm or str(Path(args.out).with_suffix(".pgm")), np.abs(image))


def cmd_recon_zf(args):
    # coil maps are not needed, so fully sampled data without ACS lines works too
    y = _load_kspace(args.kspace)
    _write_recon(args, zero_filled_rss(y, formats.read_mask(args.mask)).astype(np.complex128))


def cmd_recon_pdhg(args):
    y, mask, maps = _recon_inputs(args)
    cfg = PdhgConfig(lam=args.lam, n_iter=args.iters)
    x, trace = solve_cs(y, ForwardOperator(mask, maps), cfg)
    if args.trace_csv:
        trace.to_csv(args.trace_csv)
    _write_recon(args, x)


def cmd_recon_xpdnet(args):
    from .training import load_checkpoint

    y, mask, maps = _recon_inputs(args)
    net = load_checkpoint(args.ckpt)[0] if args.ckpt else XPDNet()
    _write_recon(args, net.reconstruct(y, mask, maps).astype(np.complex128))


def cmd_train(args):
    from .networks.config import parse_text
    from .training import save_checkpoint, train, train_config_from_items

    items = parse_text(Path(args.config).read_text()) if args.config else {}
    model_cfg, cfg = train_config_from_items(items)
    if args.history_csv:
        cfg.history_csv = args.history_csv
    result = train(model_cfg, cfg)
    save_checkpoint(args.out_ckpt, result.net, result.optimizer)
    if result.history:
        log.info("trained %d steps, final loss %.5f", len(result.history), result.history[-1][2])


def cmd_eval(args):
    recon = formats.read_image(args.recon)
    target = formats.read_image(args.target)
    if recon.shape != target.shape:
        raise InvalidConfigError(f"recon {recon.shape} and target {target.shape} differ in shape")
    row = {"volume_id": Path(args.target).stem, "slice": 0, "method": args.method, "accel": args.accel}
    row.update(slice_metrics(recon, target))
    write_metrics_csv(args.out_csv, [row])
    print(f"psnr_db={min(row['psnr_db'], 100.0):.4f} ssim={row['ssim']:.6f} ms_ssim={row['ms_ssim']:.6f}")


def cmd_gradcheck(args):
    from .checks import SUITES

    names = list(SUITES) if args.module == "all" else [args.module]
    failed = 0
    for name in names:
        for line in SUITES[name]():
            print(line)
            failed += not line.passed
    if failed:
        raise NumericError(f"{failed} gradient check(s) failed")


# ----------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="xpdrecon", description="Multi-coil MRI reconstruction toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", help="write a Shepp-Logan phantom image")
    s.add_argument("--size", type=_positive(int), required=True)
    s.add_argument("--smooth-phase", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("mask", help="write a Cartesian line mask")
    s.add_argument("--height", type=_positive(int), required=True)
    s.add_argument("--width", type=_positive(int), default=None)
    s.add_argument("--accel", type=int, required=True)
    s.add_argument("--acs", type=int, default=None)
    s.add_argument("--offset", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mask)

    s = sub.add_parser("sim", help="simulate masked multi-coil k-space from an image")
    s.add_argument("--image", required=True)
    s.add_argument("--coils", type=_positive(int), required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--noise-sigma", type=_nonneg_float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--maps-out", default=None, help="also write the true coil maps")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("maps", help="estimate coil maps from the calibration region")
    s.add_argument("--kspace", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_maps)

    for name, func, help_ in (
        ("recon-zf", cmd_recon_zf, "zero-filled root-sum-of-squares reconstruction"),
        ("recon-pdhg", cmd_recon_pdhg, "wavelet-l1 compressed sensing reconstruction"),
        ("recon-xpdnet", cmd_recon_xpdnet, "unrolled network reconstruction"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--kspace", required=True)
        s.add_argument("--mask", required=True)
        s.add_argument("--maps", default=None, help="coil maps (estimated from the data when omitted)")
        s.add_argument("--out", required=True)
        s.add_argument("--pgm", default=None, help="PGM export path (default: OUT with .pgm suffix)")
        if name == "recon-pdhg":
            s.add_argument("--lambda", dest="lam", type=_nonneg_float, default=PdhgConfig.lam)
            s.add_argument("--iters", type=int, default=PdhgConfig.n_iter)
            s.add_argument("--trace-csv", default=None)
        if name == "recon-xpdnet":
            s.add_argument("--ckpt", default=None, help="checkpoint (untrained default network when omitted)")
        s.set_defaults(func=func)

    s = sub.add_parser("train", help="train an XPDNet on simulated slices")
    s.add_argument("--config", default=None, help="key=value file; model.* keys set the architecture")
    s.add_argument("--out-ckpt", required=True)
    s.add_argument("--history-csv", default=None)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="write PSNR / SSIM / MS-SSIM of a reconstruction")
    s.add_argument("--recon", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--out-csv", required=True)
    s.add_argument("--method", default="unknown")
    s.add_argument("--accel", type=int, default=0)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", help="run finite-difference gradient checks")
    s.add_argument("--module", choices=["primitives", "conv", "mwcnn", "unet", "xpdnet", "loss", "all"],
                   default="all")
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except ReconError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
