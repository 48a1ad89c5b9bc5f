"""Multi-coil MRI reconstruction toolkit.

Forward model and coil maps, a wavelet-l1 primal-dual solver, a small
reverse-mode autodiff engine, the unrolled XPDNet with its MWCNN corrector
and U-net map refiner, losses and metrics, RAdam training, and file formats.
"""
from .errors import (
    BadMagicError,
    FormatError,
    InsufficientCalibrationError,
    IntegrityError,
    InvalidConfigError,
    InvalidInputError,
    InvalidShapeError,
    NumericError,
    ReconError,
    TruncatedFileError,
    VersionError,
)
from .metrics import ms_ssim, psnr, ssim
from .pdhg import PdhgConfig, solve_cs, zero_filled
from .phantom import make_coil_maps, make_phantom
from .physics import ForwardOperator, SamplingMask, apply_adjoint, apply_forward, fft2c, ifft2c, make_mask
from .sense import estimate_maps_lowfreq

__version__ = "0.1.0"

__all__ = [
    "BadMagicError",
    "ForwardOperator",
    "FormatError",
    "InsufficientCalibrationError",
    "IntegrityError",
    "InvalidConfigError",
    "InvalidInputError",
    "InvalidShapeError",
    "NumericError",
    "PdhgConfig",
    "ReconError",
    "SamplingMask",
    "TruncatedFileError",
    "VersionError",
    "apply_adjoint",
    "apply_forward",
    "estimate_maps_lowfreq",
    "fft2c",
    "ifft2c",
    "make_coil_maps",
    "make_mask",
    "make_phantom",
    "ms_ssim",
    "psnr",
    "solve_cs",
    "ssim",
    "zero_filled",
]
