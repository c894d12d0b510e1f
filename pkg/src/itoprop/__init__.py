"""Chebychev propagation with iterative time ordering for H(t) = H0 + E(t) mu."""
from .errors import PropagationError
from .lincore import FourierGrid, GridModel, LevelModel, Pulse, TwoSurfaceModel
from .propagators import (
    ChebStepper,
    ItoConfig,
    ItoStepper,
    RK4Stepper,
    SplitStepper,
    ito_step,
    make_stepper,
    propagate,
    rk4_propagate,
    standard_cheb_step,
)

__version__ = "0.1.0"

__all__ = [
    "ChebStepper", "FourierGrid", "GridModel", "ItoConfig", "ItoStepper", "LevelModel",
    "PropagationError", "Pulse", "RK4Stepper", "SplitStepper", "TwoSurfaceModel", "ito_step",
    "make_stepper", "propagate", "rk4_propagate", "standard_cheb_step",
]
