"""Irregularity indices of periodic fields.

Interval conventions. An interval of ``L`` consecutive samples starting at
sample ``s`` is the arc covered by the cells centred on those samples, so its
length is ``L*h`` and its samples sit at the local coordinates
``x_i = (i + 1/2)/L`` of ``[0, 1]``. Averages over an interval use the
midpoint rule. Dyadic intervals at depth ``n`` hold ``N / 2**n`` samples.

Best polynomial approximation uses exact discrete least squares: for each
interval length a basis of polynomials of degree ``<= k`` orthonormal for the
averaged inner product ``(1/L) sum_i`` is built once and cached.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.polynomial import Legendre, Polynomial
from scipy.ndimage import maximum_filter1d, minimum_filter1d
from scipy.special import comb

from .fields import GridField, as_grid
from .kernels import affine_window_rss, interval_deviations

MAX_DEGREE = 8
MIN_SAMPLES = 8


# ---------------------------------------------------------------- bases

@dataclass(frozen=True)
class OrthoPolyBasis:
    """Orthonormal polynomials ``Q_0..Q_k`` on L2(0, 1).

    ``coeffs[i]`` holds the monomial coefficients of ``Q_i`` in increasing
    powers of x.
    """

    k: int
    coeffs: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.polynomial.polynomial.polyval(x, c) for c in self.coeffs], axis=-1)

    def gram(self):
        """Gram matrix on L2(0, 1) by Gauss-Legendre quadrature, exact for degree 2k."""
        nodes, weights = np.polynomial.legendre.leggauss(self.k + 1)
        Q = self(0.5 * (nodes + 1.0))
        return (0.5 * weights * Q.T) @ Q


def ortho_basis(k: int) -> OrthoPolyBasis:
    """Gram-Schmidt of ``1, x, ..., x^k`` on [0, 1]: shifted, scaled Legendre."""
    if not 0 <= k <= MAX_DEGREE:
        raise ValueError(f"k must lie in [0, {MAX_DEGREE}] for a well-conditioned basis, got {k}")
    coeffs = []
    for i in range(k + 1):
        # Legendre P_i composed with x -> 2x - 1, scaled to unit norm on [0, 1]
        c = Legendre.basis(i)(Polynomial([-1.0, 2.0])).coef * math.sqrt(2 * i + 1)
        coeffs.append(np.pad(c, (0, k + 1 - c.size)))
    arr = np.array(coeffs)
    arr.setflags(write=False)
    return OrthoPolyBasis(k, arr)


@lru_cache(maxsize=None)
def discrete_basis(n_samples: int, k: int) -> np.ndarray:
    """``(L, k+1)`` matrix orthonormal for ``(1/L) sum`` on midpoint samples."""
    if n_samples < k + 1:
        raise ValueError(f"interval has {n_samples} samples, need at least {k + 1} for degree {k}")
    x = (np.arange(n_samples) + 0.5) / n_samples
    V = ortho_basis(k)(x)
    Q, R = np.linalg.qr(V)
    Q = Q * np.sign(np.diag(R))
    B = Q * math.sqrt(n_samples)
    B.setflags(write=False)
    return B


# ---------------------------------------------------------------- intervals

@dataclass(frozen=True)
class IntervalRef:
    """A run of samples: either dyadic ``(depth, index)`` or ``(start, length)``."""

    depth: Optional[int] = None
    index: Optional[int] = None
    start: Optional[int] = None
    length: Optional[int] = None

    @classmethod
    def dyadic(cls, depth, index):
        return cls(depth=int(depth), index=int(index))

    @classmethod
    def span(cls, start, length):
        return cls(start=int(start), length=int(length))

    @classmethod
    def from_arc(cls, grid, left, length):
        """Interval whose cells cover ``[left, left + length)`` (snapped to cells)."""
        h = grid.spacing
        s = int(round((left - grid.origin) / h + 0.5))
        n = int(round(length / h))
        return cls.span(s, n)

    def samples(self, grid):
        """``(start, n_samples)`` on ``grid``."""
        if self.depth is not None:
            n = grid.n_points >> self.depth
            if n < 1 or (n << self.depth) != grid.n_points or not 0 <= self.index < 2**self.depth:
                raise ValueError(f"dyadic interval {self.depth, self.index} not on this grid")
            return self.index * n, n
        if self.length is None or self.length < 1:
            raise ValueError("interval needs a positive length")
        return self.start, self.length

    def arc_length(self, grid):
        return self.samples(grid)[1] * grid.spacing

    def left(self, grid):
        s, _ = self.samples(grid)
        return grid.origin + (s - 0.5) * grid.spacing

    def values(self, f):
        f = as_grid(f)
        s, n = self.samples(f.grid)
        idx = (s + np.arange(n)) % f.grid.n_points
        return f.values.real[idx]


def _real_values(f):
    f = as_grid(f)
    return f.values.real


# ---------------------------------------------------------------- projection

def project(f, J: IntervalRef, k: int) -> Polynomial:
    """Best L2 polynomial of degree <= k on J, as a function of torus position."""
    f = as_grid(f)
    w = J.values(f)
    n = w.size
    if n < max(MIN_SAMPLES, k + 1):
        raise ValueError(f"interval has {n} samples; need at least {max(MIN_SAMPLES, k + 1)}")
    B = discrete_basis(n, k)
    c = B.T @ w / n
    x = (np.arange(n) + 0.5) / n
    local = Polynomial.fit(x, B @ c, k, domain=[0, 1], window=[0, 1])
    left, length = J.left(f.grid), J.arc_length(f.grid)
    return Polynomial(local.coef, domain=[left, left + length], window=[0, 1])


def local_deviation(f, J: IntervalRef, k: int, p: float) -> float:
    """Averaged L^p distance from f to its L2 projection on J."""
    _check_p(p)
    w = J.values(f)
    n = w.size
    if n < max(MIN_SAMPLES, k + 1):
        raise ValueError(f"interval has {n} samples; need at least {max(MIN_SAMPLES, k + 1)}")
    B = discrete_basis(n, k)
    r = w - B @ (B.T @ w / n)
    return float(np.mean(np.abs(r) ** p) ** (1.0 / p))


def _check_p(p):
    if not 1.0 <= p < np.inf:
        raise ValueError(f"p must lie in [1, inf), got {p}")


# ---------------------------------------------------------------- dyadic tree

class DyadicMomentTree:
    """Projection coefficients and residual sums of squares on every dyadic interval.

    Leaves are fitted directly. Parents are merged from their two children
    without revisiting samples: child residuals are orthogonal to the parent
    polynomials, so the parent residual energy is the children's plus the
    part of the stacked child coefficients that the parent basis cannot
    represent. That part is computed through an orthonormal complement basis,
    which avoids the cancellation of ``sum f^2 - sum c^2``.
    """

    def __init__(self, values, k: int, max_depth: int):
        values = np.asarray(values, dtype=float)
        n = values.size
        if n >> max_depth < max(MIN_SAMPLES, k + 1):
            raise ValueError("max_depth leaves fewer than 8 samples per interval")
        self.k = k
        self.n_points = n
        self.max_depth = max_depth
        self.coeffs = {}
        self.rss = {}
        L = n >> max_depth
        B = discrete_basis(L, k)
        F = values.reshape(2**max_depth, L)
        C = F @ B / L
        R = F - C @ B.T
        self.coeffs[max_depth] = C
        self.rss[max_depth] = np.einsum("ij,ij->i", R, R)
        for depth in range(max_depth - 1, -1, -1):
            self._merge(depth)

    @staticmethod
    @lru_cache(maxsize=None)
    def _transfer(child_len, k):
        Bc = discrete_basis(child_len, k)
        Bp = discrete_basis(2 * child_len, k)
        T = np.vstack([Bc.T @ Bp[:child_len], Bc.T @ Bp[child_len:]]) / child_len
        P = T @ T.T / 2.0
        evals, evecs = np.linalg.eigh(np.eye(2 * k + 2) - P)
        W = evecs[:, evals > 0.5]
        return T, W

    def _merge(self, depth):
        child = self.coeffs[depth + 1]
        Lc = self.n_points >> (depth + 1)
        T, W = self._transfer(Lc, self.k)
        V = child.reshape(2**depth, 2 * (self.k + 1))
        self.coeffs[depth] = V @ T / 2.0
        extra = V @ W
        rss_child = self.rss[depth + 1].reshape(2**depth, 2).sum(axis=1)
        self.rss[depth] = rss_child + Lc * np.einsum("ij,ij->i", extra, extra)

    def deviation(self, depth):
        """Averaged L2 deviation on each interval at ``depth``."""
        L = self.n_points >> depth
        return np.sqrt(np.maximum(self.rss[depth], 0.0) / L)


def depth_deviations(f, k: int, p: float, depths):
    """Map depth -> array of averaged L^p deviations on the dyadic intervals."""
    _check_p(p)
    values = _real_values(f)
    n = values.size
    depths = list(depths)
    if p == 2.0:
        tree = DyadicMomentTree(values, k, max(depths))
        return {d: tree.deviation(d) for d in depths}
    out = {}
    for d in depths:
        L = n >> d
        B = discrete_basis(L, k)
        F = values.reshape(2**d, L)
        R = F - (F @ B / L) @ B.T
        out[d] = np.mean(np.abs(R) ** p, axis=1) ** (1.0 / p)
    return out


# ---------------------------------------------------------------- Lambda

@dataclass(frozen=True)
class LambdaParams:
    alpha: float
    k: int = 0
    p: float = 2.0
    max_depth: Optional[int] = None  # None: deepest level with >= 8 samples
    min_depth: Optional[int] = None  # None: first level whose intervals are no longer than 1

    def __post_init__(self):
        _check_p(self.p)
        if not 0 <= self.k <= MAX_DEGREE:
            raise ValueError(f"k must lie in [0, {MAX_DEGREE}]")

    def depth_range(self, grid):
        deepest = int(math.log2(grid.n_points // max(MIN_SAMPLES, self.k + 1)))
        hi = deepest if self.max_depth is None else int(self.max_depth)
        if hi > deepest:
            raise ValueError(f"max_depth {hi} leaves fewer than {MIN_SAMPLES} samples per interval "
                             f"(deepest allowed is {deepest})")
        if self.min_depth is None:
            lo = max(0, math.ceil(math.log2(grid.domain_length) - 1e-12))
        else:
            lo = int(self.min_depth)
        if lo > hi:
            raise ValueError(f"empty depth range {lo}..{hi}")
        return lo, hi


@dataclass(frozen=True)
class LambdaReport:
    value: float
    argmin: IntervalRef
    per_depth: np.ndarray  # rows of (depth, best scaled deviation at that depth)

    def tails(self):
        """Rows of (n0, min over depths >= n0)."""
        d = self.per_depth
        tail = np.minimum.accumulate(d[::-1, 1])[::-1]
        return np.column_stack([d[:, 0], tail])


def lambda_index(f, params: LambdaParams) -> LambdaReport:
    """Dyadic Wei index ``min_n min_{J in D_n} |J|^-alpha * deviation(f, J)``.

    Ties go to the shallowest depth, then the smallest index.
    """
    f = as_grid(f)
    grid = f.grid
    lo, hi = params.depth_range(grid)
    devs = depth_deviations(f, params.k, params.p, range(lo, hi + 1))
    rows = []
    best, arg = np.inf, None
    for d in range(lo, hi + 1):
        length = grid.domain_length / 2**d
        scaled = length ** (-params.alpha) * devs[d]
        i = int(np.argmin(scaled))
        rows.append((d, float(scaled[i])))
        if scaled[i] < best:
            best, arg = float(scaled[i]), IntervalRef.dyadic(d, i)
    return LambdaReport(best, arg, np.array(rows, dtype=float))


def lambda_local(f, params: LambdaParams) -> np.ndarray:
    """Tail infima ``(n0, inf_{n >= n0} best(n))``; nondecreasing in ``n0``."""
    return lambda_index(f, params).tails()


def lambda_bruteforce(f, alpha: float, k: int = 0, p: float = 2.0, max_arc: float = 1.0,
                      min_samples: int = MIN_SAMPLES):
    """Exhaustive scan over every non-wrapping interval with ``>= min_samples``
    samples and arc length ``<= max_arc``. Returns ``(value, IntervalRef)``.
    O(N^2 k) work; intended as an oracle on small grids."""
    _check_p(p)
    f = as_grid(f)
    values = np.ascontiguousarray(_real_values(f))
    h = f.grid.spacing
    best, arg = np.inf, None
    L = max(min_samples, k + 1)
    while L <= values.size and L * h <= max_arc * (1 + 1e-12):
        dev = interval_deviations(values, discrete_basis(L, k), float(p))
        scaled = (L * h) ** (-alpha) * dev
        i = int(np.argmin(scaled))
        if scaled[i] < best:
            best, arg = float(scaled[i]), IntervalRef.span(i, L)
        L += 1
    if arg is None:
        raise ValueError("no admissible interval on this grid")
    return best, arg


# ---------------------------------------------------------------- differences

def _finite_difference(values, start, count, step, order):
    n = values.size
    base = start + np.arange(count)
    out = np.zeros(count)
    for i in range(order + 1):
        out += (-1) ** (order - i) * comb(order, i, exact=True) * values[(base + i * step) % n]
    return out


def lambda_differences(f, J: IntervalRef, k: int, p: float):
    """``(sup_h ||D_h^{k+1} f||, (avg_h ||D_h f||^p)^{1/p})`` on J, averaged norms.

    ``h`` runs over the grid lattice ``0..|J|``. If J extended by ``(k+1)|J|``
    does not fit before the end of the sampled domain, J is shrunk to its
    first ``L/(k+2)`` samples so that every increment stays in the domain.
    The h-average uses the trapezoidal rule.
    """
    _check_p(p)
    f = as_grid(f)
    values = _real_values(f)
    s, L = J.samples(f.grid)
    n = values.size
    if s + (k + 2) * L > n:
        L = L // (k + 2)
    if L < 2:
        raise ValueError("interval too small for the requested increments")
    h_steps = np.arange(L + 1)
    sup_val = 0.0
    first = np.empty(L + 1)
    for j in h_steps:
        d_hi = _finite_difference(values, s, L, j, k + 1)
        sup_val = max(sup_val, float(np.mean(np.abs(d_hi) ** p) ** (1 / p)))
        d1 = _finite_difference(values, s, L, j, 1)
        first[j] = np.mean(np.abs(d1) ** p)
    avg_val = float((np.trapezoid(first, dx=1.0) / L) ** (1 / p))
    return sup_val, avg_val


# ---------------------------------------------------------------- G and K

def _grid_steps(grid, x, what):
    q = x / grid.spacing
    r = round(q)
    if abs(q - r) > 1e-6:
        raise ValueError(f"{what}={x} is not a multiple of the grid spacing")
    return int(r)


def g_alpha(f, y: float, delta: float, k: int, alpha: float) -> float:
    """Average of ``|D_delta^{k+1} f|^(-1/alpha)`` over ``[y, y+delta)``.

    Returns ``math.inf`` when some increment vanishes (below 1e-300).
    Positions wrap periodically.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    f = as_grid(f)
    grid = f.grid
    iy = _grid_steps(grid, y - grid.origin, "y")
    d = _grid_steps(grid, delta, "delta")
    if d < 1:
        raise ValueError("delta must span at least one grid step")
    inc = np.abs(_finite_difference(_real_values(f), iy, d, d, k + 1))
    if np.any(inc < 1e-300):
        return math.inf
    return float(np.mean(inc ** (-1.0 / alpha)))


def k_index(f, alpha: float, lam: float, k: int, max_n: Optional[int] = None,
            m_start: int = 1, min_n: int = 0) -> float:
    """``sup_{n,m} 2^(-lam n) G_alpha(y_{n,m}, delta_n, k, f)``.

    ``y_{n,m} = -pi + 2 pi m / 2^n`` and ``delta_n = pi / 2^(n+1)``. The
    default ``max_n`` is the deepest level where ``delta_n`` spans 8 samples.
    ``m_start=1`` skips the anchor at ``-pi``; pass 0 to include it.
    """
    f = as_grid(f)
    grid = f.grid
    deepest = int(math.log2(grid.n_points // (4 * MIN_SAMPLES)))
    max_n = deepest if max_n is None else int(max_n)
    if max_n > deepest:
        raise ValueError(f"max_n {max_n} too deep: delta_n would span fewer than 8 samples")
    best = 0.0
    for n in range(min_n, max_n + 1):
        delta = np.pi / 2 ** (n + 1)
        for m in range(m_start, 2**n):
            y = -np.pi + 2 * np.pi * m / 2**n
            g = g_alpha(f, y, delta, k, alpha)
            if math.isinf(g):
                return math.inf
            best = max(best, 2.0 ** (-lam * n) * g)
    return best


# ---------------------------------------------------------------- Hoelder roughness

def holder_roughness(f, alpha: float, max_arc: float = 1.0) -> float:
    """``inf_{y, delta} delta^-alpha sup_{|x-y|<=delta} |f(x) - f(y)|`` on a finite scan.

    ``delta`` runs over dyadic multiples ``8h, 16h, ...`` up to ``max_arc``;
    ``y`` runs over grid points with ``[y, y+delta]`` inside the sampled
    domain. Balls wrap periodically.
    """
    f = as_grid(f)
    v = _real_values(f)
    n = v.size
    h = f.grid.spacing
    best = np.inf
    W = MIN_SAMPLES
    while W * h <= max_arc * (1 + 1e-12) and 2 * W + 1 <= n:
        hi = maximum_filter1d(v, 2 * W + 1, mode="wrap")
        lo = minimum_filter1d(v, 2 * W + 1, mode="wrap")
        spread = np.maximum(hi - v, v - lo)[: n - W + 1]
        best = min(best, float((W * h) ** (-alpha) * spread.min()))
        W *= 2
    if not np.isfinite(best):
        raise ValueError("grid too coarse for the Hoelder scan")
    return best


# ---------------------------------------------------------------- occupation measure

@dataclass(frozen=True)
class OccupationReport:
    xi: np.ndarray
    mu_hat: np.ndarray
    rho: float
    log_c: float


def occupation_fourier(f, J: IntervalRef, xi_grid) -> OccupationReport:
    """Fourier transform of the occupation measure of f on J.

    The decay exponent is fitted on the nonincreasing upper envelope
    ``max_{|xi'| >= |xi|} |mu_hat(xi')|`` over ``|xi|`` in ``[4, max|xi|]``,
    since ``|mu_hat|`` itself can vanish at isolated frequencies.
    """
    f = as_grid(f)
    w = J.values(f)
    h = f.grid.spacing
    xi = np.asarray(xi_grid, dtype=float)
    mu = np.exp(1j * np.outer(xi, w)).sum(axis=1) * h
    a = np.abs(xi)
    sel = a >= 4.0
    if sel.sum() < 8:
        raise ValueError("need at least 8 frequencies with |xi| >= 4 to fit a decay rate")
    order = np.argsort(a[sel])
    mags = np.abs(mu[sel])[order]
    env = np.maximum.accumulate(mags[::-1])[::-1]
    x = np.log1p(a[sel][order])
    with np.errstate(divide="ignore"):
        yv = np.log(env)
    ok = np.isfinite(yv)
    slope, intercept = np.polyfit(x[ok], yv[ok], 1)
    return OccupationReport(xi, mu, float(-slope), float(intercept))


def small_oscillation_fraction(f, J: IntervalRef, a: float) -> float:
    """Fraction of samples of J within ``a`` of the mean of f over J."""
    w = J.values(f)
    return float(np.mean(np.abs(w - w.mean()) <= a))


# ---------------------------------------------------------------- velocity-level indices

def alpha_irregularity(u, alpha: float, max_depth: Optional[int] = None,
                       min_depth: Optional[int] = None) -> LambdaReport:
    """Wei index of ``d_y U`` with parameters ``(alpha + 1, k=1, p=2)``,
    where U is the elliptic regularization of u."""
    from .elliptic import solve_elliptic

    if not -0.5 < alpha < 0:
        raise ValueError("alpha must lie in (-1/2, 0)")
    dU = solve_elliptic(u).dU.to_grid(is_real=True)
    return lambda_index(dU, LambdaParams(alpha + 1.0, 1, 2.0, max_depth, min_depth))


def omega1_profile(dU, delta: float) -> np.ndarray:
    """Squared L2 distance to the best affine fit on the window centred at
    every grid point, as a non-normalized integral."""
    dU = as_grid(dU)
    h = dU.grid.spacing
    D = int(round(delta / h))
    if D < MIN_SAMPLES:
        raise ValueError(f"delta={delta:g} spans {D} grid steps; need at least {MIN_SAMPLES}")
    if 2 * D + 1 > dU.grid.n_points:
        raise ValueError("delta too large for the grid")
    return h * affine_window_rss(np.ascontiguousarray(_real_values(dU)), D)


def omega1(dU, delta: float) -> float:
    """``inf_y inf_{P affine} int_{y-delta}^{y+delta} |dU - P|^2``."""
    return float(omega1_profile(dU, delta).min())
