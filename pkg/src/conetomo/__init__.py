"""Fixed-axis cone transform and its inversion in dimensions 2 and 3."""

from .axf import read_field, write_field
from .fields import (Axis, ConeData, FullField, GaussianBlob, GridSpec, RadialField,
                     interpolate, make_ball_phantom, make_gaussian_phantom,
                     radial_grids, radialize, unradialize)
from .forward import backproject, compton_angle, cone_transform
from .inversion import invert_harmonic, invert_limited, invert_local_odd, invert_riesz

__version__ = "0.1.0"

__all__ = [
    "Axis", "ConeData", "FullField", "GaussianBlob", "GridSpec", "RadialField",
    "interpolate", "make_ball_phantom", "make_gaussian_phantom", "radial_grids",
    "radialize", "unradialize", "backproject", "compton_angle", "cone_transform",
    "invert_harmonic", "invert_limited", "invert_local_odd", "invert_riesz",
    "read_field", "write_field",
]
