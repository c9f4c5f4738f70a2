"""Monte Carlo check of the Feynman-Kac fluctuation-dissipation identity.

For ``f_t`` solving ``d_t f + i xi u f = nu f_yy`` the identity reads
``||f_0||^2 - ||f_t||^2 = int Var(Z_t^y) dy`` with
``Z_t^y = exp(-i xi int_0^t u(y + s_B B_s) ds) f_0(y + s_B B_t)`` and noise
amplitude ``s_B = sqrt(2 nu)``.

Paths are shared across all ``y``: with ``u = sum_m u_m e^{imy}`` the time
integral is ``sum_m u_m e^{imy} I_m`` where ``I_m = int_0^t e^{i m s_B B_s} ds``
depends only on the path, so one path yields ``Z`` on the whole grid through
a single inverse FFT.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fields import _to_values, as_grid, as_spectral, stream_rng, truncate_modes
from .kernels import path_phase_integrals
from .norms import sobolev_norm
from .semigroup import PropagatorConfig, propagate

MIN_PATHS = 1000
CHUNK = 2000
BATCH = 200  # paths per independent estimate used for the standard error
_TAG_PATHS = 4
WORKERS_ENV = "ROUGHSHEAR_WORKERS"


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class FKConfig:
    nu: float
    xi: float
    t: float
    n_paths: int = 100_000
    n_steps: Optional[int] = None  # None: smallest count with ds <= min(1e-3, t/100)
    seed: int = 0
    u_truncation: Optional[int] = None

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.t < 0:
            raise ValueError("t must be nonnegative")
        if self.n_paths < MIN_PATHS:
            raise ValueError(f"n_paths must be at least {MIN_PATHS}")

    def steps(self):
        if self.n_steps is not None:
            return int(self.n_steps)
        ds = min(1e-3, self.t / 100.0)
        return max(1, int(np.ceil(self.t / ds - 1e-9)))


@dataclass(frozen=True)
class FKReport:
    variance_integral: float
    variance_stderr: float
    lhs_deficit: float
    residual_sigmas: float
    variance_profile: np.ndarray  # Var(Z_t^y) on the grid


def _active_modes(fs, nonnegative=False, rel_tol=1e-13):
    """Modes (as wavenumbers) whose coefficient exceeds ``rel_tol`` times the
    largest one, so round-off from the transform does not count as signal.
    With ``nonnegative=True`` only modes ``m >= 0`` and the unpaired Nyquist
    mode are kept."""
    mags = np.abs(fs.coeffs)
    keep = mags > rel_tol * mags.max() if mags.max() > 0 else np.zeros(mags.size, bool)
    if nonnegative:
        keep &= (fs.grid.wavenumbers >= 0) | (np.arange(mags.size) == 0)
    nz = np.nonzero(keep)[0]
    return fs.grid.wavenumbers[nz], fs.coeffs[nz], nz


def _chunk_moments(chunk, n, cfg, u_modes, f_modes, grid, n_steps):
    """Sums of Z and |Z|^2 over each batch of paths of one chunk, on every
    grid point. Returns ``(sum_z, sum_abs2, batch_sizes)`` with one row per batch."""
    rng = stream_rng(cfg.seed, chunk, _TAG_PATHS)
    ds = cfg.t / n_steps
    z = rng.standard_normal((n, 2 * n_steps))
    amp = np.sqrt(2.0 * cfg.nu)
    scale = amp * np.sqrt(0.5 * ds)
    kw_u, cu, idx_u = u_modes
    kw_f, cf, idx_f = f_modes
    if kw_u.size:
        integrals, ends = path_phase_integrals(z, scale, ds, np.ascontiguousarray(kw_u))
    else:
        integrals = np.zeros((n, 0), dtype=complex)
        ends = np.cumsum(z * scale, axis=1)[:, -1]
    nn = grid.n_points
    # u is real, so phase(y) = sum_m u_m I_m e^{imy} only needs m >= 0:
    # the m < 0 terms are the conjugates of the m > 0 ones.
    # f0(y + B) = sum_m f_m e^{imB} e^{imy}
    weights = np.where((kw_u > 0) & (idx_u > 0), 2.0, 1.0)
    spec_u = np.zeros((n, nn), dtype=complex)
    spec_u[:, idx_u] = weights * cu * integrals
    spec_f = np.zeros((n, nn), dtype=complex)
    spec_f[:, idx_f] = cf * np.exp(1j * np.outer(ends, kw_f))
    phase = _to_values(grid, spec_u).real
    Z = np.exp(-1j * cfg.xi * phase) * _to_values(grid, spec_f)
    bounds = np.arange(0, n, BATCH)
    return (np.add.reduceat(Z, bounds, axis=0), np.add.reduceat(np.abs(Z) ** 2, bounds, axis=0),
            np.diff(np.append(bounds, n)))


def simulate_variance(f0, u, cfg: FKConfig, workers: Optional[int] = None,
                      lhs_dt: Optional[float] = None) -> FKReport:
    """Monte Carlo ``int Var(Z_t^y) dy`` against the spectral energy deficit.

    Paths are drawn in fixed chunks of 2000, each with its own counter-based
    stream, so results do not depend on ``workers``. The standard error comes
    from the spread of independent estimates over batches of 200 paths.
    """
    f0g = as_grid(f0)
    grid = f0g.grid
    us = as_spectral(u)
    if cfg.u_truncation is not None:
        us = truncate_modes(us, cfg.u_truncation)
    # the velocity is real: use its real part on the grid
    us = us.to_grid(is_real=True).to_spectral()
    if cfg.t == 0:
        zero = np.zeros(grid.n_points)
        return FKReport(0.0, 0.0, 0.0, 0.0, zero)
    n_steps = cfg.steps()
    u_modes = _active_modes(us, nonnegative=True)
    f_modes = _active_modes(f0g.to_spectral())
    sizes = [CHUNK] * (cfg.n_paths // CHUNK)
    if cfg.n_paths % CHUNK:
        sizes.append(cfg.n_paths % CHUNK)
    workers = default_workers() if workers is None else max(1, int(workers))

    def job(i):
        return _chunk_moments(i, sizes[i], cfg, u_modes, f_modes, grid, n_steps)

    if workers == 1:
        results = [job(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(job, range(len(sizes))))
    h = grid.spacing
    S1 = np.zeros(grid.n_points, dtype=complex)
    S2 = np.zeros(grid.n_points)
    per_batch = []
    for b1, b2, counts in results:
        S1 += b1.sum(axis=0)
        S2 += b2.sum(axis=0)
        for s1, s2, n in zip(b1, b2, counts):
            if n > 1:
                var_b = (s2 / n - np.abs(s1 / n) ** 2) * n / (n - 1)
                per_batch.append((h * var_b.sum(), n))
    n = cfg.n_paths
    profile = (S2 / n - np.abs(S1 / n) ** 2) * n / (n - 1)
    total = float(h * profile.sum())
    est = np.array([e for e, _ in per_batch])
    wts = np.array([w for _, w in per_batch], dtype=float)
    if est.size > 1:
        mean_c = np.average(est, weights=wts)
        var_mean = np.sum(wts**2 * (est - mean_c) ** 2) / (wts.sum() ** 2) * est.size / (est.size - 1)
        stderr = float(np.sqrt(var_mean))
    else:
        stderr = float("nan")
    deficit = energy_deficit(f0g, us, cfg.nu, cfg.xi, cfg.t, lhs_dt)
    resid = abs(total - deficit) / stderr if stderr > 0 else float("inf")
    return FKReport(total, stderr, deficit, float(resid), profile.real)


def energy_deficit(f0, u, nu: float, xi: float, t: float, dt: Optional[float] = None) -> float:
    """``||f_0||^2 - ||f_t||^2`` from the spectral splitting solver."""
    if t == 0:
        return 0.0
    f0s = as_spectral(f0)
    probe = PropagatorConfig(nu=nu, k=1, dt=None)
    if dt is None:
        from .semigroup import max_dt
        dt = min(1e-3, t / 100.0, max_dt(u, probe) / abs(xi) if xi else 1.0)
    cfg = PropagatorConfig(nu=nu, k=xi, dt=dt)
    ft = propagate(f0s, u, cfg, t)
    return f0s.l2_norm() ** 2 - ft.l2_norm() ** 2


@dataclass(frozen=True)
class DeficitTable:
    rows: np.ndarray  # columns: nu, deficit, rhs, ratio
    ratio_spread: float
    bounded: bool


def deficit_bound_check(f0, u, nu_grid, alpha: float, eps: float, t: float = 1.0,
                        xi: float = 1.0, alpha_bar: Optional[float] = None) -> DeficitTable:
    """Scaling check of the energy deficit against
    ``||f0||_{H^1}^2 (nu t + xi^2 (nu^(-1/2+ab) t^(3/2+ab+2eps))^(1/(1+eps)) ||u||^2)``.

    ``||u||`` is the Besov ``B^alpha_{1,inf}`` seminorm at resolution.
    ``alpha_bar`` defaults to ``alpha - eps (1/2 - alpha + eps)``. The flag is
    set when max ratio / min ratio <= 100.
    """
    from .norms import BesovParams, besov_seminorm

    if alpha_bar is None:
        alpha_bar = alpha - eps * (0.5 - alpha + eps)
    if not -0.5 < alpha_bar < alpha:
        raise ValueError("alpha_bar must lie in (-1/2, alpha)")
    f0s = as_spectral(f0)
    h1 = sobolev_norm(f0s, 1.0) ** 2
    ub = besov_seminorm(u, BesovParams(alpha, 1.0)) ** 2
    rows = []
    for nu in nu_grid:
        d = energy_deficit(f0s, u, nu, xi, t) if t > 0 else 0.0
        rhs = h1 * (nu * t + xi**2 * (nu ** (-0.5 + alpha_bar) * t ** (1.5 + alpha_bar + 2 * eps))
                    ** (1 / (1 + eps)) * ub)
        ratio = d / rhs if rhs > 0 else 1.0
        rows.append((nu, d, rhs, ratio))
    rows = np.array(rows)
    pos = rows[:, 3][rows[:, 3] > 0]
    spread = float(pos.max() / pos.min()) if pos.size else 1.0
    return DeficitTable(rows, spread, spread <= 100.0)
