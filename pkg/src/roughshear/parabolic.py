"""Closed-form solution of the forced heat problem ``U_t - (nu/2) U_yy = u - mean(u)``, ``U(0) = 0``.

Per mode with wavenumber m != 0 and ``a = nu m^2 / 2``::

    U_m(t) = u_m (2 / (nu m^2)) (1 - exp(-a t))

so ``int_0^t |d_y U_m|^2 ds`` has the closed form used by
:func:`grad_time_integral`.
"""
from dataclasses import dataclass

import numpy as np

from .fields import SpectralField, as_spectral
from .norms import sobolev_norm


def _nonzero_modes(u):
    kw = u.grid.wavenumbers
    return kw, kw != 0


@dataclass(frozen=True)
class ParabolicSolution:
    u: SpectralField
    nu: float

    def amplitudes(self, t):
        kw, nz = _nonzero_modes(self.u)
        out = np.zeros_like(self.u.coeffs)
        k2 = kw[nz] ** 2
        out[nz] = self.u.coeffs[nz] * (2.0 / (self.nu * k2)) * -np.expm1(-0.5 * self.nu * k2 * t)
        return out

    def U(self, t):
        return SpectralField(self.u.grid, self.amplitudes(t))

    def dU(self, t):
        return self.U(t).derivative()

    def time_derivative(self, t):
        kw, nz = _nonzero_modes(self.u)
        out = np.zeros_like(self.u.coeffs)
        out[nz] = self.u.coeffs[nz] * np.exp(-0.5 * self.nu * kw[nz] ** 2 * t)
        return out

    def pde_residual(self, t):
        """Max over modes of ``|U_t + (nu/2) m^2 U - (u - mean)|``, relative to max |u_m|."""
        kw, nz = _nonzero_modes(self.u)
        lhs = self.time_derivative(t) + 0.5 * self.nu * kw**2 * self.amplitudes(t)
        rhs = np.where(nz, self.u.coeffs, 0.0)
        scale = max(np.max(np.abs(self.u.coeffs)), np.finfo(float).tiny)
        return float(np.max(np.abs(lhs - rhs)) / scale)


def heat_forced(u, nu: float, t: float):
    """``(U(t), d_y U(t))`` as spectral fields."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    sol = ParabolicSolution(as_spectral(u), nu)
    return sol.U(t), sol.dU(t)


def _bracket(a, t):
    """``t - (2/a)(1 - e^{-at}) + (1/(2a))(1 - e^{-2at})`` without cancellation."""
    x = a * t
    small = x < 1e-3
    out = np.empty_like(x)
    xs = x[small]
    out[small] = (xs**3 / 3 - xs**4 / 4 + 7 * xs**5 / 60 - xs**6 / 24) / a[small]
    xl, al = x[~small], a[~small]
    out[~small] = t + (2.0 / al) * np.expm1(-xl) - (0.5 / al) * np.expm1(-2 * xl)
    return out


def grad_time_integral(u, nu: float, t: float) -> float:
    """``int_0^t ||d_y U(s)||_{L2}^2 ds`` summed exactly over modes."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    u = as_spectral(u)
    kw, nz = _nonzero_modes(u)
    if t == 0 or not np.any(nz):
        return 0.0
    k2 = kw[nz] ** 2
    a = 0.5 * nu * k2
    w = np.abs(u.coeffs[nz]) ** 2 * 4.0 / (nu**2 * k2)
    return float(u.grid.domain_length * np.sum(w * _bracket(a, t)))


@dataclass(frozen=True)
class AppendixBTable:
    rows: np.ndarray  # columns: nu, t, lhs, t nu^-2 ||u||_{H^-1}^2, ratio
    nu_slope: float  # median over t of the log-log slope of lhs in nu
    t_slope: float  # median over nu of the log-log slope of lhs in t

    @property
    def ratio_spread(self):
        r = self.rows[:, 4]
        r = r[r > 0]
        return float(r.max() / r.min()) if r.size else 1.0

    @property
    def max_ratio(self):
        return float(self.rows[:, 4].max())


def appendix_b_check(u, nu_grid, t_grid) -> AppendixBTable:
    """Compare the gradient time integral against ``t nu^-2 ||u||_{H^-1}^2``."""
    nu_grid = np.asarray(nu_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if nu_grid.size < 4 or t_grid.size < 4:
        raise ValueError("need at least 4 points on each axis")
    u = as_spectral(u)
    h1 = sobolev_norm(u, -1.0) ** 2
    rows = []
    lhs = np.empty((nu_grid.size, t_grid.size))
    for i, nu in enumerate(nu_grid):
        for j, t in enumerate(t_grid):
            val = grad_time_integral(u, nu, t)
            ref = t * nu**-2 * h1
            lhs[i, j] = val
            rows.append((nu, t, val, ref, val / ref if ref > 0 else 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        ln_nu, ln_t = np.log(nu_grid), np.log(t_grid)
        nu_slopes = [np.polyfit(ln_nu, np.log(lhs[:, j]), 1)[0] for j in range(t_grid.size)]
        t_slopes = [np.polyfit(ln_t, np.log(lhs[i, :]), 1)[0] for i in range(nu_grid.size)]
    nu_slope = float(np.median(nu_slopes)) if np.all(lhs > 0) else 0.0
    t_slope = float(np.median(t_slopes)) if np.all(lhs > 0) else 0.0
    return AppendixBTable(np.array(rows), nu_slope, t_slope)
