"""Elliptic regularization: the zero-mean periodic solution of -U'' = u - mean(u)."""
from dataclasses import dataclass

import numpy as np

from .fields import SpectralField, as_spectral


@dataclass(frozen=True)
class EllipticSolution:
    U: SpectralField
    dU: SpectralField
    mean_u: float


def solve_elliptic(u) -> EllipticSolution:
    """Exact spectral solve. Accepts a grid or spectral field."""
    u = as_spectral(u)
    kw = u.grid.wavenumbers
    c = u.coeffs
    with np.errstate(divide="ignore", invalid="ignore"):
        Uc = np.where(kw != 0, c / kw**2, 0.0)
    U = SpectralField(u.grid, Uc)
    mean = c[u.grid.nyquist]
    return EllipticSolution(U, U.derivative(), float(mean.real))


def residual(u, sol: EllipticSolution) -> float:
    """Relative L2 residual of -U'' = u - mean(u)."""
    u = as_spectral(u)
    lhs = -sol.U.derivative(2).coeffs
    rhs = u.coeffs.copy()
    rhs[u.grid.nyquist] = 0.0
    scale = max(u.l2_norm(), np.finfo(float).tiny)
    return float(np.sqrt(u.grid.domain_length * np.sum(np.abs(lhs - rhs) ** 2)) / scale)
