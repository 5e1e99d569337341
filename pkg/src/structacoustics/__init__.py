"""Numerical laboratory for a damped wave-plate structural acoustics model.

A semilinear wave equation in a chamber is coupled, through a flexible
flat wall, to a clamped plate (beam in the reduced 2-D setting).  The
package discretises the system, computes potential-well quantities
(embedding constants, mountain-pass depth, stable sets) and measures
energy decay against the comparison-ODE envelopes.
"""

from .nonlinearity import DampingProfile, ModelParams, ValidationReport, validate_params
from .geometry import Geometry, build_geometry
from .dynamics import State, EnergyLedger, simulate, step
from .well import WellGeometry, Classification
from .decay import DecayProfile, StabilizationConstants

__all__ = [
    "DampingProfile",
    "ModelParams",
    "ValidationReport",
    "validate_params",
    "Geometry",
    "build_geometry",
    "State",
    "EnergyLedger",
    "simulate",
    "step",
    "WellGeometry",
    "Classification",
    "DecayProfile",
    "StabilizationConstants",
]

__version__ = "0.1.0"
