"""Enhanced dissipation by rough shear flows on the one-dimensional torus.

Submodules:

* :mod:`~roughshear.fields` grids, fields, transforms and random generators
* :mod:`~roughshear.norms` Besov, Sobolev and Campanato seminorms
* :mod:`~roughshear.irregularity` Wei index and related roughness measures
* :mod:`~roughshear.elliptic` and :mod:`~roughshear.parabolic` closed-form solves
* :mod:`~roughshear.semigroup` propagators, operator norms and decay rates
* :mod:`~roughshear.stochastic` Feynman-Kac Monte Carlo checks
* :mod:`~roughshear.experiments` sweeps, exponent fits and reports
"""
from ._accel import HAVE_NUMBA, backend
from .fields import (FieldRecipe, Grid, GridField, SpectralField, as_grid, as_spectral, generate,
                     transform, truncate_modes)
from .irregularity import LambdaParams, LambdaReport, alpha_irregularity, lambda_index
from .semigroup import PropagatorConfig, decay_rate, operator_norm, propagate

__version__ = "0.1.0"

__all__ = [
    "HAVE_NUMBA", "backend",
    "FieldRecipe", "Grid", "GridField", "SpectralField", "as_grid", "as_spectral", "generate",
    "transform", "truncate_modes",
    "LambdaParams", "LambdaReport", "alpha_irregularity", "lambda_index",
    "PropagatorConfig", "decay_rate", "operator_norm", "propagate",
]
