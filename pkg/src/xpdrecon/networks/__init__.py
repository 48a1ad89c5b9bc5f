"""Learned components: MWCNN corrector, U-net map refiner, XPDNet."""
from .config import MwcnnConfig, UnetConfig, XpdnetConfig
from .mwcnn import MWCNN
from .unet import UNet, map_support, unet_refine_maps
from .xpdnet import XPDNet, xpdnet_forward, zero_filled_adjoint

__all__ = [
    "MWCNN",
    "MwcnnConfig",
    "UNet",
    "UnetConfig",
    "XPDNet",
    "XpdnetConfig",
    "map_support",
    "unet_refine_maps",
    "xpdnet_forward",
    "zero_filled_adjoint",
]
