"""Periodic fields on the torus [-pi, pi) and the velocity generators.

Fourier convention: a field sampled at ``y_j = origin + j*h`` is written
``f(y) = sum_m c_m exp(i m y)`` with ``c_m = (1/N) sum_j f(y_j) exp(-i m y_j)``,
so a constant ``c`` has ``c_0 = c`` and ``cos y`` has ``c_{+1} = c_{-1} = 1/2``.
Parseval then reads ``2*pi * sum |c_m|^2 = h * sum |f_j|^2``.

Spectral coefficients are stored in ascending mode order ``-N/2 .. N/2-1``.
"""
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n_points`` samples on ``[origin, origin + domain_length)``."""

    n_points: int
    domain_length: float = TWO_PI
    origin: float = -np.pi

    def __post_init__(self):
        n = int(self.n_points)
        if n < 16 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 16, got {self.n_points}")
        if not self.domain_length > 0:
            raise ValueError("domain_length must be positive")
        object.__setattr__(self, "n_points", n)

    @property
    def spacing(self):
        return self.domain_length / self.n_points

    @property
    def points(self):
        return self.origin + self.spacing * np.arange(self.n_points)

    @property
    def modes(self):
        """Integer mode numbers in storage order, ``-N/2 .. N/2-1``."""
        n = self.n_points
        return np.arange(-n // 2, n // 2)

    @property
    def wavenumbers(self):
        return TWO_PI / self.domain_length * self.modes

    @property
    def nyquist(self):
        return self.n_points // 2

    def _phase(self):
        # exp(-i k_m origin); exact signs on the canonical torus
        if np.isclose(self.origin, -0.5 * self.domain_length, rtol=0, atol=1e-15):
            return np.where(self.modes % 2 == 0, 1.0, -1.0).astype(complex)
        return np.exp(-1j * self.wavenumbers * self.origin)


def _to_coeffs(grid, values):
    c = sfft.fftshift(sfft.fft(values, axis=-1), axes=-1) / grid.n_points
    return c * grid._phase()


def _to_values(grid, coeffs):
    c = coeffs / grid._phase()
    return sfft.ifft(sfft.ifftshift(c, axes=-1), axis=-1) * grid.n_points


@dataclass(frozen=True)
class GridField:
    grid: Grid
    values: np.ndarray
    is_real: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"values must have shape ({self.grid.n_points},), got {v.shape}")
        if self.is_real:
            v = v.real.astype(complex)
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_function(cls, grid, func, is_real=None):
        v = np.asarray(func(grid.points))
        if is_real is None:
            is_real = not np.iscomplexobj(v)
        return cls(grid, np.broadcast_to(v, (grid.n_points,)), is_real)

    @property
    def real(self):
        return self.values.real

    def to_spectral(self):
        return SpectralField(self.grid, _to_coeffs(self.grid, self.values))

    def l2_norm(self):
        return float(np.sqrt(self.grid.spacing * np.sum(np.abs(self.values) ** 2)))


@dataclass(frozen=True)
class SpectralField:
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n_points,):
            raise ValueError(f"coeffs must have shape ({self.grid.n_points},), got {c.shape}")
        object.__setattr__(self, "coeffs", _frozen(c))

    @property
    def modes(self):
        return self.grid.modes

    def coeff(self, m):
        return complex(self.coeffs[int(m) + self.grid.nyquist])

    def is_conjugate_symmetric(self, tol=1e-12):
        c = self.coeffs
        nyq = self.grid.nyquist
        # mode -N/2 has no partner; it must be real on its own
        mirrored = np.conj(c[:0:-1])
        scale = max(np.max(np.abs(c)), 1.0)
        return bool(np.all(np.abs(c[1:] - mirrored) <= tol * scale)
                    and abs(c[0].imag) <= tol * scale and nyq > 0)

    def to_grid(self, is_real=None):
        v = _to_values(self.grid, self.coeffs)
        if is_real is None:
            is_real = self.is_conjugate_symmetric(1e-12)
        return GridField(self.grid, v, is_real)

    def derivative(self, order=1):
        return SpectralField(self.grid, (1j * self.grid.wavenumbers) ** order * self.coeffs)

    def l2_norm(self):
        return float(np.sqrt(self.grid.domain_length * np.sum(np.abs(self.coeffs) ** 2)))

    def __add__(self, other):
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


def transform(field_: Union[GridField, SpectralField]):
    """Grid samples <-> Fourier coefficients."""
    if isinstance(field_, GridField):
        return field_.to_spectral()
    if isinstance(field_, SpectralField):
        return field_.to_grid()
    raise TypeError(f"expected GridField or SpectralField, got {type(field_).__name__}")


def as_spectral(f):
    return f if isinstance(f, SpectralField) else f.to_spectral()


def as_grid(f):
    return f if isinstance(f, GridField) else f.to_grid()


def truncate_modes(f: SpectralField, M: int) -> SpectralField:
    """Zero every coefficient with ``|m| > M``."""
    if not 0 <= M <= f.grid.nyquist:
        raise ValueError(f"M must lie in [0, {f.grid.nyquist}], got {M}")
    keep = np.abs(f.modes) <= M
    return SpectralField(f.grid, np.where(keep, f.coeffs, 0.0))


# ---------------------------------------------------------------- randomness

def stream_rng(seed, index=0, tag=0):
    """Counter-based generator for the stream ``(seed, tag, index)``.

    Each stream gets its own Philox key, so draws do not depend on the order
    in which streams are consumed or on how work is split across workers.
    """
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    hi = ((int(tag) & 0xFFFF) << 48) | (int(index) & 0xFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=np.array([seed, hi], dtype=np.uint64)))


# ---------------------------------------------------------------- generators

_TAG_FOURIER = 1
_TAG_FBM = 2


@dataclass(frozen=True)
class FieldRecipe:
    """What to generate. Build with the classmethods rather than directly."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    _KINDS = ("random_fourier", "fbm", "weierstrass", "single_mode", "constant", "zero")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        p = self.params
        if self.kind == "random_fourier" and not -0.5 < p["alpha"] < 1.0:
            raise ValueError("random_fourier requires alpha in (-1/2, 1)")
        if self.kind == "fbm" and not 0.0 < p["hurst"] < 1.0:
            raise ValueError("fbm requires H in (0, 1)")
        if self.kind == "weierstrass":
            if not 0.0 < p["a"] < 1.0 or int(p["b"]) < 2 or int(p["terms"]) < 1:
                raise ValueError("weierstrass requires a in (0,1), integer b >= 2, terms >= 1")

    @classmethod
    def random_fourier(cls, alpha, amplitude=1.0, seed=0):
        return cls("random_fourier", {"alpha": float(alpha), "amplitude": float(amplitude)}, int(seed))

    @classmethod
    def fbm(cls, hurst, seed=0):
        return cls("fbm", {"hurst": float(hurst)}, int(seed))

    @classmethod
    def weierstrass(cls, a, b, terms):
        return cls("weierstrass", {"a": float(a), "b": int(b), "terms": int(terms)})

    @classmethod
    def single_mode(cls, m, amplitude=1.0):
        return cls("single_mode", {"m": int(m), "amplitude": complex(amplitude)})

    @classmethod
    def constant(cls, c):
        return cls("constant", {"c": float(c)})

    @classmethod
    def zero(cls):
        return cls("zero")

    def to_dict(self):
        p = dict(self.params)
        if "amplitude" in p and isinstance(p["amplitude"], complex):
            p["amplitude"] = [p["amplitude"].real, p["amplitude"].imag]
        return {"kind": self.kind, "params": p, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        p = dict(d.get("params", {}))
        if d["kind"] == "single_mode" and isinstance(p.get("amplitude"), (list, tuple)):
            p["amplitude"] = complex(*p["amplitude"])
        return cls(d["kind"], p, int(d.get("seed", 0)))


def random_fourier_coeffs(grid, alpha, amplitude=1.0, seed=0):
    """Coefficients ``amplitude * |m|^-(alpha+1/2) * (g + i g') / sqrt(2)``.

    One Philox stream per mode, so the sample at resolution N is exactly the
    mode truncation of the sample at 2N. Mean and Nyquist modes are zero.
    """
    nyq = grid.nyquist
    c = np.zeros(grid.n_points, dtype=complex)
    pos = np.arange(1, nyq)
    g = np.array([stream_rng(seed, m, _TAG_FOURIER).standard_normal(2) for m in pos])
    chat = amplitude * pos ** (-(alpha + 0.5)) * (g[:, 0] + 1j * g[:, 1]) / np.sqrt(2.0)
    c[nyq + pos] = chat
    c[nyq - pos] = np.conj(chat)
    return c


def fbm_path(n_steps, hurst, length, seed=0):
    """Exact fractional Brownian motion on ``[0, length]`` at ``n_steps + 1`` points.

    Davies-Harte circulant embedding of the fractional Gaussian noise
    covariance. Raises if the embedding is not nonnegative definite.
    """
    n = int(n_steps)
    k = np.arange(n + 1, dtype=float)
    two_h = 2.0 * hurst
    gamma = 0.5 * (np.abs(k + 1) ** two_h - 2.0 * k ** two_h + np.abs(k - 1) ** two_h)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = sfft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise ValueError(
            f"circulant embedding not nonnegative definite (min eigenvalue {lam.min():.3e}); "
            "increase n_points")
    lam = np.clip(lam, 0.0, None)
    rng = stream_rng(seed, 0, _TAG_FBM)
    m = row.size
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    w = sfft.fft(np.sqrt(lam / m) * z)
    noise = w.real[:n] * (length / n) ** hurst
    return np.concatenate([[0.0], np.cumsum(noise)])


def generate(recipe: FieldRecipe, grid: Grid) -> GridField:
    kind, p = recipe.kind, recipe.params
    n = grid.n_points
    y = grid.points
    if kind == "zero":
        return GridField(grid, np.zeros(n), True)
    if kind == "constant":
        return GridField(grid, np.full(n, p["c"]), True)
    if kind == "single_mode":
        m, a = p["m"], complex(p["amplitude"])
        if abs(m) > grid.nyquist - 1:
            raise ValueError(f"mode {m} not representable below Nyquist on this grid")
        if m == 0:
            return GridField(grid, np.full(n, a.real), True)
        return GridField(grid, 2.0 * np.real(a * np.exp(1j * m * y)), True)
    if kind == "weierstrass":
        a, b = p["a"], p["b"]
        vals = np.zeros(n)
        for j in range(p["terms"]):
            if b ** j > grid.nyquist:
                break
            vals += a ** j * np.cos(b ** j * y)
        return GridField(grid, vals, True)
    if kind == "random_fourier":
        c = random_fourier_coeffs(grid, p["alpha"], p.get("amplitude", 1.0), recipe.seed)
        v = _to_values(grid, c)
        return GridField(grid, v.real, True)
    if kind == "fbm":
        if not np.isclose(grid.origin, -0.5 * grid.domain_length):
            raise ValueError("fbm reflection needs a grid centred at 0")
        half = n // 2
        path = fbm_path(half, p["hurst"], 0.5 * grid.domain_length, recipe.seed)
        # even reflection f(|y|): sample j sits at |y_j| = |j - N/2| h
        return GridField(grid, path[np.abs(np.arange(n) - half)], True)
    raise ValueError(kind)
