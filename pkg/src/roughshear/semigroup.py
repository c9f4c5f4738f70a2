"""Hypoelliptic propagator ``exp(t(-iku + nu d_yy))`` for one x-Fourier mode.

Two time integrators are available:

* ``strang_split`` (default): half a diffusion step as a spectral multiplier,
  a full advection step as a pointwise phase ``exp(-i k u dt)``, then the
  other half diffusion step. Both sub-flows are contractions, so the discrete
  L2 norm never increases. For rough ``u`` the splitting error carries the
  derivatives of ``u`` and converges slowly.
* ``etdrk4``: fourth-order exponential time differencing (Cox-Matthews, with
  the Kassam-Trefethen contour evaluation of the phi functions). Diffusion is
  integrated exactly and advection explicitly, so the error depends on
  ``k max|u| dt`` but not on the smoothness of ``u``. Used for rate sweeps.
"""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.fft as sfft
from scipy import optimize
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .fields import GridField, SpectralField, as_grid, as_spectral, stream_rng, truncate_modes

PHASE_LIMIT = np.pi / 4
# etdrk4 steps: default and maximal dt * |k| * max|u| (the classical RK4
# stability interval on the imaginary axis ends at 2 sqrt 2)
ETD_DEFAULT = 1.0
ETD_LIMIT = 2.5
SCHEMES = ("strang_split", "etdrk4")
_TAG_START = 3


@dataclass(frozen=True)
class PropagatorConfig:
    nu: float
    k: int = 1
    dt: Optional[float] = None  # None: scheme default from max|u|, capped at 1
    u_truncation: Optional[int] = None  # None: keep every resolved mode
    scheme: str = "strang_split"
    laplacian: str = "hypoelliptic"  # or "full": adds the -k^2 part of the Laplacian

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        # k is the x-wavenumber; real values are accepted for the Fourier
        # variable of the Feynman-Kac check
        if self.k == 0:
            raise ValueError("k must be nonzero")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unsupported scheme {self.scheme!r}")
        if self.laplacian not in ("hypoelliptic", "full"):
            raise ValueError(f"unknown laplacian {self.laplacian!r}")


@dataclass(frozen=True)
class NormEstimate:
    sigma: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class RatePoint:
    nu: float
    k: int
    T1: float
    T2: float
    sigma1: float
    sigma2: float
    r: float
    flags: tuple = ()
    evaluations: int = 0
    dt: float = 0.0
    scheme: str = ""


@dataclass
class Trajectory:
    """Per-step diagnostics recorded by :func:`propagate` when asked."""

    times: np.ndarray
    l2_norms: np.ndarray
    grad_sq: np.ndarray  # ||d_y f||^2 at each recorded time

    def gradient_budget(self):
        """Trapezoidal estimate of the integral of ||d_y f||^2 over the run."""
        return float(np.trapezoid(self.grad_sq, self.times))


def band_limited_velocity(u, cfg: PropagatorConfig):
    """Real grid values of the truncated velocity ``u_M``."""
    us = as_spectral(u)
    if cfg.u_truncation is not None:
        us = truncate_modes(us, cfg.u_truncation)
    return us.to_grid(is_real=True).values.real


def _speed(u, cfg):
    return abs(cfg.k) * float(np.max(np.abs(band_limited_velocity(u, cfg))))


def max_dt(u, cfg: PropagatorConfig):
    """Largest admissible step: the phase limit for splitting, the stability
    limit for etdrk4."""
    speed = _speed(u, cfg)
    if speed == 0.0:
        return np.inf
    return (PHASE_LIMIT if cfg.scheme == "strang_split" else ETD_LIMIT) / speed


def resolve_dt(u, cfg: PropagatorConfig):
    limit = max_dt(u, cfg)
    if cfg.dt is None:
        if cfg.scheme == "etdrk4":
            speed = _speed(u, cfg)
            return min(ETD_DEFAULT / speed, 1.0) if speed > 0 else 1.0
        return min(limit, 1.0)
    if cfg.dt > limit * (1 + 1e-12):
        bound = "pi/4" if cfg.scheme == "strang_split" else f"{ETD_LIMIT}"
        raise ValueError(
            f"dt={cfg.dt:.6g} violates the step limit dt*|k|*max|u| <= {bound}; "
            f"max admissible dt is {limit:.6g}")
    return cfg.dt


def _split_steps(t, dt):
    n_full = int(np.floor(t / dt + 1e-9))
    rem = t - n_full * dt
    if rem <= 1e-12 * dt:
        rem = 0.0
    return [dt] * n_full + ([rem] if rem > 0 else [])


class _Splitting:
    """Precomputed multipliers for one (u, cfg, dt); works on grid values."""

    def __init__(self, u, cfg: PropagatorConfig, dt: float):
        grid = as_grid(u).grid if isinstance(u, GridField) else u.grid
        self.grid = grid
        self.cfg = cfg
        self.dt = dt
        self.u = band_limited_velocity(u, cfg)
        n = grid.n_points
        self.kw = sfft.fftfreq(n, 1.0 / n) * (2 * np.pi / grid.domain_length)
        decay = cfg.nu * self.kw**2
        if cfg.laplacian == "full":
            decay = decay + cfg.nu * cfg.k**2
        self._decay = decay

    def half_diffusion(self, h):
        return np.exp(-0.5 * h * self._decay)

    def phase(self, h, sign=1):
        return np.exp(-1j * sign * self.cfg.k * h * self.u)

    def run(self, v, t, adjoint=False, record=False):
        """Apply the time-``t`` map to grid values ``v`` (last axis)."""
        steps = _split_steps(t, self.dt)
        if adjoint:
            steps = steps[::-1]
        sign = -1 if adjoint else 1
        traj = None
        if record:
            traj = ([0.0], [self._l2(v)], [self._grad_sq(v)])
        if not steps:
            return v, self._finish(traj)
        spec = sfft.fft(v, axis=-1)
        cache = {}

        def mult(h):
            if h not in cache:
                cache[h] = (self.half_diffusion(h), self.phase(h, sign))
            return cache[h]

        time = 0.0
        pending = None  # half-diffusion multiplier not yet applied
        for i, h in enumerate(steps):
            dh, ph = mult(h)
            spec = spec * (dh if pending is None else dh * pending)
            vals = sfft.ifft(spec, axis=-1) * ph
            spec = sfft.fft(vals, axis=-1)
            pending = dh
            time += h
            if record:
                s_rec = spec * pending
                traj[0].append(time)
                traj[1].append(self._l2_spec(s_rec))
                traj[2].append(self._grad_sq_spec(s_rec))
        spec = spec * pending
        return sfft.ifft(spec, axis=-1), self._finish(traj)

    # norms on fft-ordered spectra: ||f||^2 = L/N^2 * sum |F|^2
    def _l2_spec(self, s):
        return float(np.sqrt(self.grid.domain_length * np.sum(np.abs(s) ** 2)) / self.grid.n_points)

    def _grad_sq_spec(self, s):
        return float(self.grid.domain_length * np.sum(np.abs(self.kw * s) ** 2) / self.grid.n_points**2)

    def _l2(self, v):
        return self._l2_spec(sfft.fft(v, axis=-1))

    def _grad_sq(self, v):
        return self._grad_sq_spec(sfft.fft(v, axis=-1))

    @staticmethod
    def _finish(traj):
        if traj is None:
            return None
        return Trajectory(*(np.asarray(a) for a in traj))


def _phi_weights(z, h, n_contour=32):
    """ETDRK4 weights for real ``z = h L <= 0`` by contour averaging."""
    roots = np.exp(1j * np.pi * (np.arange(1, n_contour + 1) - 0.5) / n_contour)
    w = z[:, None] + roots[None, :]
    ew = np.exp(w)

    def avg(expr):
        return h * np.real(np.mean(expr, axis=1))

    q = avg((np.exp(w / 2) - 1) / w)
    f1 = avg((-4 - w + ew * (4 - 3 * w + w**2)) / w**3)
    f2 = avg((2 + w + ew * (w - 2)) / w**3)
    f3 = avg((-4 - 3 * w - w**2 + ew * (4 - w)) / w**3)
    return q, f1, f2, f3


class _ExpIntegrator(_Splitting):
    """ETDRK4 with diffusion as the exact linear part. The adjoint run
    integrates the adjoint equation (velocity sign flipped), which matches the
    discrete adjoint up to the fourth-order truncation error."""

    def _weights(self, h):
        if h not in self._cache:
            lin = -self._decay
            self._cache[h] = (np.exp(h * lin), np.exp(0.5 * h * lin)) + _phi_weights(h * lin, h)
        return self._cache[h]

    def run(self, v, t, adjoint=False, record=False):
        self._cache = getattr(self, "_cache", {})
        steps = _split_steps(t, self.dt)
        sign = -1 if adjoint else 1
        rhs_mult = -1j * sign * self.cfg.k * self.u

        def advect(spec):
            return sfft.fft(rhs_mult * sfft.ifft(spec, axis=-1), axis=-1)

        traj = ([0.0], [self._l2(v)], [self._grad_sq(v)]) if record else None
        spec = sfft.fft(v, axis=-1)
        time = 0.0
        for h in steps:
            e, e2, q, f1, f2, f3 = self._weights(h)
            nv = advect(spec)
            a = e2 * spec + q * nv
            na = advect(a)
            b = e2 * spec + q * na
            nb = advect(b)
            c = e2 * a + q * (2 * nb - nv)
            nc = advect(c)
            spec = e * spec + f1 * nv + 2 * f2 * (na + nb) + f3 * nc
            time += h
            if record:
                traj[0].append(time)
                traj[1].append(self._l2_spec(spec))
                traj[2].append(self._grad_sq_spec(spec))
        return sfft.ifft(spec, axis=-1), self._finish(traj)


def _integrator(u, cfg):
    cls = _Splitting if cfg.scheme == "strang_split" else _ExpIntegrator
    return cls(u, cfg, resolve_dt(u, cfg))


def _check_time(t):
    if t < 0:
        raise ValueError("t must be nonnegative")


def propagate(f0, u, cfg: PropagatorConfig, t: float, record: bool = False):
    """Evolve ``f0`` to time ``t``. Returns a SpectralField, or with
    ``record=True`` a ``(SpectralField, Trajectory)`` pair."""
    _check_time(t)
    split = _integrator(u, cfg)
    f0g = as_grid(f0)
    v, traj = split.run(f0g.values, t, record=record)
    out = GridField(f0g.grid, v).to_spectral()
    return (out, traj) if record else out


def adjoint_propagate(g, u, cfg: PropagatorConfig, t: float):
    """Adjoint of :func:`propagate`. Exact for the splitting (reversed step
    order, conjugated phases); for etdrk4 it solves the adjoint equation."""
    _check_time(t)
    split = _integrator(u, cfg)
    gg = as_grid(g)
    v, _ = split.run(gg.values, t, adjoint=True)
    return GridField(gg.grid, v).to_spectral()


def inner(f, g):
    """L2 inner product, conjugate-linear in the first slot."""
    f, g = as_spectral(f), as_spectral(g)
    return complex(f.grid.domain_length * np.vdot(f.coeffs, g.coeffs))


# ---------------------------------------------------------------- operator norm

def _normal_operator(u, cfg, T, zero_mean):
    split = _integrator(u, cfg)
    n = split.grid.n_points

    def project(v):
        return v - v.mean() if zero_mean else v

    def matvec(x):
        x = project(np.asarray(x, dtype=complex).ravel())
        y, _ = split.run(x, T)
        z, _ = split.run(y, T, adjoint=True)
        return project(z)

    return LinearOperator((n, n), matvec=matvec, dtype=complex), split


def operator_norm(u, cfg: PropagatorConfig, T: float, *, zero_mean: bool = False,
                  tol: float = 1e-10, max_iter: int = 500, seed: int = 0,
                  start=None) -> NormEstimate:
    """Largest singular value of the time-``T`` propagator on L2.

    Uses implicitly restarted Lanczos (ARPACK) on the normal operator
    ``A* A``; each iteration costs one forward and one adjoint propagation.
    ``start`` optionally warm-starts from a previous singular vector.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    op, split = _normal_operator(u, cfg, T, zero_mean)
    n = op.shape[0]
    if start is None:
        rng = stream_rng(seed, 0, _TAG_START)
        start = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    if zero_mean:
        start = start - start.mean()
    count = [0]
    inner_mv = op.matvec

    def counted(x):
        count[0] += 1
        return inner_mv(x)

    counted_op = LinearOperator(op.shape, matvec=counted, dtype=complex)
    try:
        vals, vecs = eigsh(counted_op, k=1, which="LA", v0=start, tol=tol,
                           maxiter=max_iter, ncv=min(n - 1, 20))
    except ArpackNoConvergence as exc:
        if len(exc.eigenvalues) == 0:
            raise RuntimeError(f"operator norm did not converge after {count[0]} iterations "
                               f"(T={T}); increase T") from exc
        vals, vecs = exc.eigenvalues, exc.eigenvectors
    lam = float(max(vals[0].real, 0.0))
    v = vecs[:, 0]
    res = np.linalg.norm(inner_mv(v) - lam * v) / max(lam, np.finfo(float).tiny)
    sigma = float(np.sqrt(lam))
    est = NormEstimate(min(sigma, 1.0 + 1e-12), count[0], float(res))
    operator_norm.last_vector = v
    return est


operator_norm.last_vector = None


def singular_vector_norm(u, cfg, T, **kw):
    """Like :func:`operator_norm` but also returns the top right singular vector."""
    est = operator_norm(u, cfg, T, **kw)
    return est, operator_norm.last_vector


# ---------------------------------------------------------------- rates

def _window_search(sigma_at, lo, hi, T_a, s_a, T_guess, t_max):
    """Find T > T_a with lo <= sigma(T) <= hi, given sigma(T_a) > hi.

    Log-linear extrapolation until the window is bracketed, then Illinois
    regula falsi on log sigma. Returns (T, sigma).
    """
    target = np.log(np.sqrt(lo * hi))
    T_b, s_b = None, None
    T = T_guess
    while True:
        T = min(T, t_max)
        s = sigma_at(T)
        if lo <= s <= hi:
            return T, s
        if s < lo:
            T_b, s_b = T, s
            break
        if T >= t_max:
            raise RuntimeError(f"sigma stayed above {hi:g} up to T={t_max:g}; rate too small")
        slope = (np.log(s_a) - np.log(s)) / (T - T_a)
        T_a, s_a = T, s
        step = (np.log(s) - target) / slope if slope > 0 else np.inf
        T = T_a + min(max(step, 0.1 * T_a), 4.0 * T_a)
    ga, gb = np.log(s_a) - target, np.log(s_b) - target
    side = 0
    for _ in range(100):
        T = (T_a * gb - T_b * ga) / (gb - ga)
        s = sigma_at(T)
        if lo <= s <= hi:
            return T, s
        g = np.log(s) - target
        if g > 0:
            T_a, ga = T, g
            if side == 1:
                gb *= 0.5
            side = 1
        else:
            T_b, gb = T, g
            if side == -1:
                ga *= 0.5
            side = -1
    raise RuntimeError("window search did not converge")


def decay_rate(u, nu: float, k: int = 1, *, dt: Optional[float] = None,
               u_truncation: Optional[int] = None, scheme: str = "strang_split",
               window1=(1e-2, 1e-1), window2=(1e-7, 1e-5), t_max: float = 1e6,
               tol: float = 1e-10, rate_tol: Optional[float] = 5e-3,
               max_refinements: int = 8) -> RatePoint:
    """Two-time decay rate ``r = -(ln s2 - ln s1)/(T2 - T1)`` with ``T1 >= 1``.

    ``T1`` is chosen so ``sigma(T1)`` lies in ``window1`` (or ``T1 = 1`` with
    the flag ``"T1_floor"`` if ``sigma(1)`` is already below it) and ``T2`` so
    that ``sigma(T2)`` lies in ``window2``.

    The step is then halved at fixed ``(T1, T2)`` until two successive rates
    agree to ``rate_tol`` relative (``None`` keeps the first step). Pass
    ``scheme="etdrk4"`` for rough velocities: there the splitting needs
    orders of magnitude more steps for the same accuracy.
    """
    if not 0 < nu < 1:
        raise ValueError("nu must lie in (0, 1)")
    cfg = PropagatorConfig(nu=nu, k=k, dt=dt, u_truncation=u_truncation, scheme=scheme)
    um = band_limited_velocity(u, cfg)
    if np.ptp(um) <= 1e-14 * max(1.0, np.max(np.abs(um))):
        return RatePoint(nu, k, 1.0, 1.0, 1.0, 1.0, 0.0, ("constant_velocity",), 0,
                         0.0, scheme)
    cfg = replace(cfg, dt=resolve_dt(u, cfg))
    evaluations = [0]
    state = {"v": None}

    def sigma_fn(step_cfg):
        cache = {}

        def sigma_at(T):
            key = round(T, 12)
            if key not in cache:
                est = operator_norm(u, step_cfg, T, tol=tol, start=state["v"])
                state["v"] = operator_norm.last_vector
                evaluations[0] += 1
                cache[key] = est.sigma
            return cache[key]

        return sigma_at

    flags = []
    T1, T2, s1, s2 = _rate_windows(sigma_fn(cfg), window1, window2, t_max, flags)
    r = -(np.log(s2) - np.log(s1)) / (T2 - T1)
    if rate_tol is not None:
        for level in range(1, max_refinements + 1):
            cfg = replace(cfg, dt=cfg.dt / 2)
            sigma_at = sigma_fn(cfg)
            s1, s2 = sigma_at(T1), sigma_at(T2)
            r_new = -(np.log(s2) - np.log(s1)) / (T2 - T1)
            change = abs(r_new - r) / max(abs(r_new), np.finfo(float).tiny)
            r = r_new
            if change <= rate_tol:
                flags.append(f"dt_refined:{level}")
                break
        else:
            flags.append("dt_unconverged")
        lo1, hi1 = window1
        lo2, hi2 = window2
        if not (lo2 <= s2 <= hi2 and (lo1 <= s1 <= hi1 or "T1_floor" in flags)):
            # the refined step moved sigma out of a window: search again
            flags = [f for f in flags if f != "T1_floor"]
            T1, T2, s1, s2 = _rate_windows(sigma_at, window1, window2, t_max, flags)
            r = -(np.log(s2) - np.log(s1)) / (T2 - T1)
    return RatePoint(nu, k, float(T1), float(T2), float(s1), float(s2), float(r),
                     tuple(flags), evaluations[0], float(cfg.dt), scheme)


def _rate_windows(sigma_at, window1, window2, t_max, flags):
    s1 = sigma_at(1.0)
    lo1, hi1 = window1
    if s1 < lo1:
        T1 = 1.0
        flags.append("T1_floor")
    elif s1 <= hi1:
        T1 = 1.0
    else:
        T1, s1 = _window_search(sigma_at, lo1, hi1, 1.0, s1, 2.0, t_max)
    lo2, hi2 = window2
    if s1 < lo2:
        raise RuntimeError(f"sigma(T1={T1:g})={s1:.3g} already below the second window")
    if s1 <= hi2:
        raise RuntimeError("first and second windows coincide")
    # guess T2 from the rate implied by sigma(T1) ~ exp(-r T1)
    r_guess = max(-np.log(s1) / T1, 1e-12)
    T_guess = T1 + (np.log(s1) - np.log(np.sqrt(lo2 * hi2))) / r_guess
    T2, s2 = _window_search(sigma_at, lo2, hi2, T1, s1, max(T_guess, 1.01 * T1), t_max)
    return T1, T2, s1, s2


# ---------------------------------------------------------------- Wei bound

def _thirty_six_x_tan(y):
    return 36.0 * y * np.tan(y)


_Y_MAX = np.pi / 2 - 1e-12


def f_inverse(x: float) -> float:
    """Increasing inverse of ``y -> 36 y tan y`` on ``[0, pi/2)``."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 0.0
    if _thirty_six_x_tan(_Y_MAX) <= x:
        return _Y_MAX
    return float(optimize.bisect(lambda y: _thirty_six_x_tan(y) - x, 0.0, _Y_MAX,
                                 xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=400))


@dataclass(frozen=True)
class WeiBound:
    bound: float
    omega1: float
    F: float
    t_star: float  # time after which the bound drops below 1


def wei_bound_report(u, nu: float, t: float, delta: float) -> WeiBound:
    from .elliptic import solve_elliptic
    from .irregularity import omega1

    dU = solve_elliptic(u).dU.to_grid(is_real=True)
    w = omega1(dU, delta)
    F = f_inverse(delta * nu**-2 * w**2)
    rate = nu * delta**-2 * F
    bound = float(np.exp(np.pi / 2 - t * rate))
    t_star = np.pi / 2 / rate if rate > 0 else np.inf
    return WeiBound(bound, float(w), float(F), float(t_star))


def wei_bound(u, nu: float, t: float, delta: float) -> float:
    """Explicit upper bound ``exp(pi/2 - t nu delta^-2 F(delta nu^-2 omega1^2))``."""
    return wei_bound_report(u, nu, t, delta).bound
