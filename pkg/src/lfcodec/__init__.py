"""Lenslet plenoptic video coding with ray-space motion-compensated prediction."""

from lfcodec.core import (
    LensletFrame,
    LensletGrid,
    LightField4D,
    OpticsConfig,
    RayCoord,
    StructuralError,
    lenslet_to_multiview,
    micro_image_pitch,
    multiview_to_lenslet,
    project_ray,
)
from lfcodec.mc import (
    RayMotionVector,
    filter_coeffs,
    predict_conventional,
    predict_fractional,
    predict_integer,
    separable_coeffs,
)

__version__ = "0.1.0"

__all__ = [
    "LensletFrame",
    "LensletGrid",
    "LightField4D",
    "OpticsConfig",
    "RayCoord",
    "RayMotionVector",
    "StructuralError",
    "filter_coeffs",
    "lenslet_to_multiview",
    "micro_image_pitch",
    "multiview_to_lenslet",
    "predict_conventional",
    "predict_fractional",
    "predict_integer",
    "project_ray",
    "separable_coeffs",
]
