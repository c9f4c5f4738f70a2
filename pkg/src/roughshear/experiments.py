"""Rate sweeps, exponent fits, bound comparison, prevalence studies and reports.

A sweep measures ``r(nu)`` with :func:`roughshear.semigroup.decay_rate` for
every (seed, resolution, nu) cell. Cells are independent jobs with their own
deterministic inputs, so results do not depend on the worker count. A failing
cell is recorded with its error message and the sweep carries on.
"""
import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .fields import FieldRecipe, Grid, SpectralField, as_spectral, generate
from .irregularity import LambdaParams, alpha_irregularity, lambda_index
from .semigroup import SCHEMES, decay_rate

WORKERS_ENV = "ROUGHSHEAR_WORKERS"
EXPONENT_TOL = 0.1


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------- sweep spec

@dataclass(frozen=True)
class SweepSpec:
    """What to sweep. ``recipe.seed`` is ignored; ``seeds`` lists the seeds."""

    recipe: FieldRecipe
    alpha: float
    nu_values: tuple
    k: int = 1
    resolutions: tuple = (1024, 2048)
    seeds: tuple = (0,)
    scheme: str = "etdrk4"
    u_truncation: Optional[int] = None

    def __post_init__(self):
        nus = np.asarray(self.nu_values, dtype=float)
        if nus.size < 4:
            raise ValueError("a sweep needs at least 4 nu values")
        if np.any(nus <= 0) or np.any(nus >= 1):
            raise ValueError("nu values must lie in (0, 1)")
        if math.log10(nus.max() / nus.min()) < 2 - 1e-9:
            raise ValueError("nu values must span at least two decades")
        if len(self.resolutions) < 2:
            raise ValueError("a sweep needs at least two resolutions")
        if len(self.seeds) < 1:
            raise ValueError("a sweep needs at least one seed")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "nu_values", tuple(sorted(float(v) for v in nus)[::-1]))
        object.__setattr__(self, "resolutions", tuple(int(n) for n in self.resolutions))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def with_seed_offset(self, offset: int) -> "SweepSpec":
        return replace(self, seeds=tuple(s + int(offset) for s in self.seeds))

    def to_dict(self):
        d = asdict(self)
        d["recipe"] = self.recipe.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["recipe"] = FieldRecipe.from_dict(d["recipe"])
        for key in ("nu_values", "resolutions", "seeds"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def geometric_grid(start: float, stop: float, count: int) -> tuple:
    """``count`` log-spaced values from ``start`` to ``stop`` inclusive."""
    return tuple(float(v) for v in np.geomspace(start, stop, count))


HEADLINE_AMPLITUDE = 0.03


def headline_spec(amplitude: float = HEADLINE_AMPLITUDE, seeds: Sequence[int] = range(10)) -> SweepSpec:
    """Rough-shear configuration: alpha = -1/4, k = 1, nu from 1e-2 to 1e-5."""
    return SweepSpec(
        recipe=FieldRecipe.random_fourier(-0.25, amplitude),
        alpha=-0.25,
        nu_values=(1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5),
        resolutions=(1024, 2048),
        seeds=tuple(seeds),
        scheme="etdrk4",
    )


def cos_control_spec() -> SweepSpec:
    """Smooth control ``u = cos y`` on the same nu range."""
    return SweepSpec(
        recipe=FieldRecipe.single_mode(1, 0.5),
        alpha=1.0,
        nu_values=(1e-2, 1e-3, 1e-4, 1e-5),
        resolutions=(256, 512),
        seeds=(0,),
        scheme="strang_split",
    )


# ---------------------------------------------------------------- sweep

@dataclass(frozen=True)
class RateCell:
    seed: int
    n_points: int
    nu: float
    r: float = float("nan")
    T1: float = float("nan")
    T2: float = float("nan")
    sigma1: float = float("nan")
    sigma2: float = float("nan")
    dt: float = float("nan")
    flags: tuple = ()
    error: Optional[str] = None

    @property
    def ok(self):
        return self.error is None


CSV_COLUMNS = ("seed", "n_points", "nu", "r", "T1", "T2", "sigma1", "sigma2", "dt", "flags", "error")


@dataclass
class RateTable:
    spec: SweepSpec
    cells: list = field(default_factory=list)

    def series(self, seed: int, n_points: int):
        """``(nu, r)`` arrays of the successful cells, nu decreasing."""
        rows = [(c.nu, c.r) for c in self.cells
                if c.seed == seed and c.n_points == n_points and c.ok]
        rows.sort(key=lambda t: -t[0])
        if not rows:
            return np.empty(0), np.empty(0)
        nu, r = np.array(rows).T
        return nu, r

    def failures(self):
        return [c for c in self.cells if not c.ok]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for c in self.cells:
                w.writerow([c.seed, c.n_points, repr(c.nu), repr(c.r), repr(c.T1), repr(c.T2),
                            repr(c.sigma1), repr(c.sigma2), repr(c.dt), ";".join(c.flags),
                            c.error or ""])


def _run_cell(job):
    spec, seed, n_points, nu = job
    recipe = replace(spec.recipe, seed=seed)
    try:
        u = generate(recipe, Grid(n_points))
        rp = decay_rate(u, nu, spec.k, u_truncation=spec.u_truncation, scheme=spec.scheme)
    except Exception as exc:  # recorded per cell; the sweep continues
        return RateCell(seed, n_points, nu, error=f"{type(exc).__name__}: {exc}")
    return RateCell(seed, n_points, nu, rp.r, rp.T1, rp.T2, rp.sigma1, rp.sigma2, rp.dt, rp.flags)


def rate_sweep(spec: SweepSpec, workers: Optional[int] = None) -> RateTable:
    """Measure every (seed, resolution, nu) cell of ``spec``."""
    jobs = [(spec, s, n, nu) for s in spec.seeds for n in spec.resolutions for nu in spec.nu_values]
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1:
        cells = [_run_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(workers) as pool:
            cells = list(pool.map(_run_cell, jobs))
    return RateTable(spec, cells)


# ---------------------------------------------------------------- fits

@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    intercept: float  # natural log of the prefactor
    r_squared: float
    residuals: np.ndarray
    robust_exponent: float  # Theil-Sen median of pairwise slopes
    n_points: int


def fit_exponent(nu_values, rates) -> ExponentFit:
    """Least-squares fit of ``log r = e log nu + c`` plus its Theil-Sen variant."""
    nu = np.asarray(nu_values, dtype=float)
    r = np.asarray(rates, dtype=float)
    good = np.isfinite(nu) & np.isfinite(r) & (nu > 0) & (r > 0)
    if good.sum() < 4:
        raise ValueError(f"need at least 4 positive points, got {int(good.sum())}")
    x, y = np.log(nu[good]), np.log(r[good])
    res = stats.linregress(x, y)
    resid = y - (res.intercept + res.slope * x)
    robust = stats.theilslopes(y, x)[0]
    r2 = float(min(max(res.rvalue**2, 0.0), 1.0))
    return ExponentFit(float(res.slope), float(res.intercept), r2, resid, float(robust), int(good.sum()))


def bound_exponents(alpha: float):
    """``(upper, lower)`` exponents ``alpha/(alpha+2)`` and ``-(1/2-alpha)/(5/2+alpha)``."""
    return alpha / (alpha + 2), -(0.5 - alpha) / (2.5 + alpha)


@dataclass(frozen=True)
class BoundVerdict:
    passed: bool
    exponent: float
    upper_target: float
    lower_target: float
    margin_upper: float  # upper + tol - e; negative means violated
    margin_lower: float  # e - (lower - tol)
    tol: float


def compare_bounds(fit, alpha: float, tol: float = EXPONENT_TOL) -> BoundVerdict:
    """Check ``lower - tol <= e <= upper + tol`` for the fitted exponent ``e``."""
    if not -0.5 < alpha < 0:
        raise ValueError("alpha must lie in (-1/2, 0)")
    e = fit.exponent if isinstance(fit, ExponentFit) else float(fit)
    upper, lower = bound_exponents(alpha)
    mu, ml = upper + tol - e, e - (lower - tol)
    return BoundVerdict(bool(mu >= 0 and ml >= 0), e, upper, lower, mu, ml, tol)


def strictly_increasing_as_nu_decreases(nu, r) -> bool:
    order = np.argsort(-np.asarray(nu))
    return bool(np.all(np.diff(np.asarray(r)[order]) > 0))


@dataclass(frozen=True)
class SweepSummary:
    n_points: int
    fits: dict  # seed -> ExponentFit, or None when fewer than 4 points
    increasing: dict  # seed -> bool
    fraction_increasing: float
    median_exponent: float
    resolution_gap: float  # |median exponent at N - median at the previous resolution|
    under_resolved: bool


def summarize(table: RateTable, n_points: Optional[int] = None) -> SweepSummary:
    """Per-seed fits and monotonicity at one resolution (default: the finest)."""
    spec = table.spec
    res = sorted(spec.resolutions)
    n_points = res[-1] if n_points is None else int(n_points)

    def medians(n):
        fits, inc = {}, {}
        for s in spec.seeds:
            nu, r = table.series(s, n)
            complete = nu.size == len(spec.nu_values)
            inc[s] = complete and strictly_increasing_as_nu_decreases(nu, r)
            try:
                fits[s] = fit_exponent(nu, r)
            except ValueError:
                fits[s] = None
        exps = [f.exponent for f in fits.values() if f is not None]
        return fits, inc, (float(np.median(exps)) if exps else float("nan"))

    fits, inc, med = medians(n_points)
    gap = float("nan")
    coarser = [n for n in res if n < n_points]
    if coarser:
        gap = abs(med - medians(coarser[-1])[2])
    frac = float(np.mean(list(inc.values())))
    return SweepSummary(n_points, fits, inc, frac, med, gap, bool(gap > EXPONENT_TOL))


# ---------------------------------------------------------------- prevalence

PREVALENCE_DEPTHS = (5, 6, 7)
STABILITY_RATIO = 0.5
POSITIVE_FLOOR = 1e-6


def depth_stable_positive(values, stability: float = STABILITY_RATIO,
                          floor: float = POSITIVE_FLOOR) -> bool:
    """True when the index at the deepest level is above ``floor`` and has lost
    at most a factor ``1/stability`` against the shallowest level."""
    v = np.asarray(values, dtype=float)
    return bool(v[-1] > floor and v[-1] >= stability * v[0])


def wilson_interval(successes: int, trials: int, confidence: float = 0.95):
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


def primitive(f) -> SpectralField:
    """Zero-mean periodic antiderivative of the zero-mean part of ``f``."""
    fs = as_spectral(f)
    kw = fs.grid.wavenumbers
    c = np.zeros_like(fs.coeffs)
    nz = kw != 0
    c[nz] = fs.coeffs[nz] / (1j * kw[nz])
    return SpectralField(fs.grid, c)


@dataclass(frozen=True)
class PrevalenceGroup:
    label: str
    per_depth: np.ndarray  # (n_fields, n_depths) index values at each max depth
    irregular: np.ndarray  # bool per field
    fraction: float
    ci: tuple


@dataclass(frozen=True)
class PrevalenceSummary:
    alpha: float
    depths: tuple
    rough: PrevalenceGroup
    smooth: PrevalenceGroup
    fbm: Optional[PrevalenceGroup]


def _group(label, rows, stability):
    rows = np.asarray(rows, dtype=float)
    flags = np.array([depth_stable_positive(r, stability) for r in rows])
    return PrevalenceGroup(label, rows, flags, float(flags.mean()),
                           wilson_interval(int(flags.sum()), flags.size))


def prevalence_study(alpha: float, n_seeds: int, depths: Sequence[int] = PREVALENCE_DEPTHS, *,
                     n_points: int = 2048, amplitude: float = 1.0,
                     smooth_modes: Sequence[int] = (1, 2, 3, 5, 8),
                     fbm_hurst: Optional[float] = 0.5, fbm_beta: float = 0.6,
                     stability: float = STABILITY_RATIO) -> PrevalenceSummary:
    """Fractions of depth-stable positive irregularity indices.

    Rough fields are ``random_fourier(alpha)`` seeds and smooth controls are
    single modes, both through :func:`alpha_irregularity`. The fBm group uses
    ``Lambda(beta + 1, 1, 2, primitive of fbm(H))``.
    """
    if n_seeds < 30:
        raise ValueError("prevalence studies need at least 30 seeds")
    depths = tuple(int(d) for d in depths)
    grid = Grid(n_points)

    def alpha_row(u):
        return [alpha_irregularity(u, alpha, max_depth=d).value for d in depths]

    rough = [alpha_row(generate(FieldRecipe.random_fourier(alpha, amplitude, s), grid))
             for s in range(n_seeds)]
    smooth = [alpha_row(generate(FieldRecipe.single_mode(m), grid)) for m in smooth_modes]
    fbm_group = None
    if fbm_hurst is not None:
        rows = []
        for s in range(n_seeds):
            prim = primitive(generate(FieldRecipe.fbm(fbm_hurst, s), grid)).to_grid(is_real=True)
            rows.append([lambda_index(prim, LambdaParams(fbm_beta + 1, 1, 2.0, max_depth=d)).value
                         for d in depths])
        fbm_group = _group(f"fbm(H={fbm_hurst}) primitive, beta={fbm_beta}", rows, stability)
    return PrevalenceSummary(alpha, depths, _group(f"random_fourier(alpha={alpha})", rough, stability),
                             _group("single_mode controls", smooth, stability), fbm_group)


# ---------------------------------------------------------------- report

def _fit_record(fit):
    if fit is None:
        return None
    return {"exponent": fit.exponent, "intercept": fit.intercept, "r_squared": fit.r_squared,
            "robust_exponent": fit.robust_exponent, "n_points": fit.n_points,
            "residuals": [float(v) for v in fit.residuals]}


def verdicts(table: RateTable) -> dict:
    """JSON-ready verdict record for every resolution of the sweep."""
    spec = table.spec
    out = {"spec": spec.to_dict(), "resolutions": {}, "failed_cells": len(table.failures())}
    for n in spec.resolutions:
        summ = summarize(table, n)
        entry = {
            "fraction_increasing": summ.fraction_increasing,
            "median_exponent": summ.median_exponent,
            "resolution_gap": summ.resolution_gap,
            "under_resolved": summ.under_resolved,
            "seeds": {str(s): {"increasing": summ.increasing[s], "fit": _fit_record(summ.fits[s])}
                      for s in spec.seeds},
        }
        if -0.5 < spec.alpha < 0 and np.isfinite(summ.median_exponent):
            entry["bounds"] = asdict(compare_bounds(summ.median_exponent, spec.alpha))
        out["resolutions"][str(n)] = entry
    return out


def plot_rates(table: RateTable, path, n_points: Optional[int] = None):
    """Log-log plot of r against nu with the two bound exponents overlaid."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    spec = table.spec
    n_points = max(spec.resolutions) if n_points is None else n_points
    fig, ax = plt.subplots(figsize=(6, 4.5))
    anchor = None
    for s in spec.seeds:
        nu, r = table.series(s, n_points)
        nu, r = nu[r > 0], r[r > 0]
        if nu.size:
            ax.loglog(nu, r, "o-", lw=0.8, ms=3, alpha=0.7)
            anchor = anchor or (nu[0], float(np.median(r)))
    if anchor is not None and -0.5 < spec.alpha < 0:
        nus = np.geomspace(min(spec.nu_values), max(spec.nu_values), 50)
        for e, style, name in zip(bound_exponents(spec.alpha), ("k--", "k:"),
                                  ("upper exponent", "lower exponent")):
            ax.loglog(nus, anchor[1] * (nus / anchor[0]) ** e, style, label=f"{name} {e:.3f}")
        ax.legend()
    if anchor is None:
        ax.text(0.5, 0.5, "no positive rates", ha="center", transform=ax.transAxes)
    else:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel("nu")
    ax.set_ylabel("r(nu)")
    ax.set_title(f"decay rates, N = {n_points}")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def write_report(table: RateTable, out_dir) -> dict:
    """Write ``rates.csv``, ``verdicts.json`` and one SVG per resolution."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table.write_csv(out / "rates.csv")
    record = verdicts(table)
    (out / "verdicts.json").write_text(json.dumps(record, indent=2, default=float))
    for n in table.spec.resolutions:
        plot_rates(table, out / f"rates_N{n}.svg", n)
    return record
