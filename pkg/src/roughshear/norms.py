"""Seminorms on the torus: Besov (sharp Littlewood-Paley blocks), Sobolev, Campanato."""
import math
from dataclasses import dataclass

import numpy as np

from .fields import SpectralField, as_grid, as_spectral
from .irregularity import MIN_SAMPLES, depth_deviations


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float = 2.0  # may be np.inf

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError("p must be >= 1")


@dataclass(frozen=True)
class CampanatoParams:
    p: float
    alpha: float
    k: int = 0
    normalized: bool = False

    def __post_init__(self):
        if not 1 <= self.p < np.inf:
            raise ValueError("p must lie in [1, inf)")
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


def block_index(modes):
    """Littlewood-Paley block of each mode: 0 for |m| <= 1, j for 2^j <= |m| < 2^(j+1)."""
    a = np.abs(np.asarray(modes))
    out = np.zeros(a.shape, dtype=int)
    big = a >= 2
    out[big] = np.floor(np.log2(a[big])).astype(int)
    return out


def _lp_norm(values, h, p):
    a = np.abs(values)
    if np.isinf(p):
        return float(a.max())
    return float((h * np.sum(a**p)) ** (1.0 / p))


def littlewood_paley_blocks(f, p: float = 2.0):
    """``(j, ||Delta_j f||_{L^p})`` for every block present below Nyquist."""
    f = as_spectral(f)
    blocks = block_index(f.modes)
    h = f.grid.spacing
    rows = []
    for j in range(int(blocks.max()) + 1):
        part = SpectralField(f.grid, np.where(blocks == j, f.coeffs, 0.0))
        rows.append((j, _lp_norm(part.to_grid(is_real=False).values, h, p)))
    return np.array(rows)


def besov_seminorm(f, params: BesovParams) -> float:
    """``sup_j 2^(j s) ||Delta_j f||_{L^p}`` with sharp dyadic Fourier blocks."""
    rows = littlewood_paley_blocks(f, params.p)
    return float(np.max(2.0 ** (rows[:, 0] * params.s) * rows[:, 1]))


def sobolev_norm(f, s: float) -> float:
    """``(2 pi sum (1 + m^2)^s |f_m|^2)^(1/2)``."""
    f = as_spectral(f)
    w = (1.0 + f.grid.wavenumbers**2) ** s
    return float(np.sqrt(f.grid.domain_length * np.sum(w * np.abs(f.coeffs) ** 2)))


def campanato_seminorm(f, params: CampanatoParams) -> float:
    """``sup_J |J|^-alpha ||f - P_J||_{L^p(J)}`` over dyadic J with |J| <= L/2.

    ``P_J`` is the L2 projection onto polynomials of degree <= k. With
    ``normalized=False`` the interval norm is the plain integral norm, which
    is ``|J|^(1/p)`` times the averaged one.
    """
    f = as_grid(f)
    grid = f.grid
    deepest = int(math.log2(grid.n_points // max(MIN_SAMPLES, params.k + 1)))
    depths = range(1, deepest + 1)
    devs = depth_deviations(f, params.k, params.p, depths)
    best = 0.0
    for d in depths:
        length = grid.domain_length / 2**d
        scale = length ** (-params.alpha)
        if not params.normalized:
            scale *= length ** (1.0 / params.p)
        best = max(best, float(scale * devs[d].max()))
    return best
