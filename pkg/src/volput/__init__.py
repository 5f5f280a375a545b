"""Perpetual American, knock-out and callable volatility puts under the 3/2 model."""

from .estimators import AmericanPutPricer, CallablePutPricer, KnockoutPutPricer
from .model import ModelParams, PathConfig, derive_constants, phi_basis
from .pricing import (
    Regime,
    compute_d1,
    solve_american,
    solve_callable,
    solve_knockout,
)

__all__ = [
    "AmericanPutPricer",
    "CallablePutPricer",
    "KnockoutPutPricer",
    "ModelParams",
    "PathConfig",
    "Regime",
    "compute_d1",
    "derive_constants",
    "phi_basis",
    "solve_american",
    "solve_callable",
    "solve_knockout",
]

__version__ = "0.1.0"
