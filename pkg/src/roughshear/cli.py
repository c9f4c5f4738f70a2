"""Command line interface: ``roughshear <subcommand> ...``.

Every subcommand prints a JSON record to stdout (or writes it with ``--out``);
``rate`` and ``parabolic`` can also write CSV tables.
"""
import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import elliptic, experiments, io, irregularity, norms, parabolic, semigroup, stochastic
from .fields import FieldRecipe, Grid, generate


def _emit(record, out=None):
    text = json.dumps(record, indent=2, default=_jsonable)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, irregularity.IntervalRef):
        return {k: v for k, v in asdict(obj).items() if v is not None}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _floats(text):
    return [float(v) for v in text.split(",")]


def nu_grid(text):
    """``a:b:n`` (n log-spaced values from a to b) or a comma list."""
    if ":" in text:
        a, b, n = text.split(":")
        return list(experiments.geometric_grid(float(a), float(b), int(n)))
    return _floats(text)


def depth_range(text):
    a, sep, b = text.partition("..")
    if not sep:
        raise ValueError(f"depth range must look like lo..hi, got {text!r}")
    return int(a), int(b)


# ---------------------------------------------------------------- handlers

def cmd_gen(args):
    params = {
        "random_fourier": lambda: FieldRecipe.random_fourier(args.alpha, args.amplitude, args.seed),
        "fbm": lambda: FieldRecipe.fbm(args.hurst, args.seed),
        "weierstrass": lambda: FieldRecipe.weierstrass(args.a, args.b, args.terms),
        "single_mode": lambda: FieldRecipe.single_mode(args.m, args.amplitude),
        "constant": lambda: FieldRecipe.constant(args.c),
        "zero": FieldRecipe.zero,
    }
    recipe = params[args.kind]()
    f = generate(recipe, Grid(args.n))
    io.save_field(f, args.out)
    _emit({"out": str(args.out), "recipe": recipe.to_dict(), "n_points": args.n})


def cmd_norms(args):
    f = io.load_field(args.input)
    rec = {}
    if args.besov:
        s, p = _floats(args.besov)
        rec["besov"] = {"s": s, "p": p, "value": norms.besov_seminorm(f, norms.BesovParams(s, p))}
    if args.sobolev is not None:
        rec["sobolev"] = {"s": args.sobolev, "value": norms.sobolev_norm(f, args.sobolev)}
    if args.campanato:
        p, alpha, k = _floats(args.campanato)
        params = norms.CampanatoParams(p, alpha, int(k))
        rec["campanato"] = {"p": p, "alpha": alpha, "k": int(k),
                            "value": norms.campanato_seminorm(f, params)}
    _emit(rec, args.out)


def _report_record(rep):
    return {"value": rep.value, "argmin": rep.argmin, "per_depth": rep.per_depth}


def cmd_lambda(args):
    f = io.load_field(args.input)
    lo, hi = depth_range(args.depths) if args.depths else (None, None)
    rep = irregularity.lambda_index(
        f, irregularity.LambdaParams(args.alpha, args.k, args.p, max_depth=hi, min_depth=lo))
    rec = _report_record(rep)
    if args.brute_force:
        value, arg = irregularity.lambda_bruteforce(f, args.alpha, args.k, args.p)
        rec["brute_force"] = {"value": value, "argmin": arg}
    _emit(rec, args.out)


def cmd_irregular(args):
    u = io.load_field(args.input)
    rep = irregularity.alpha_irregularity(u, args.alpha, args.max_depth)
    _emit(_report_record(rep), args.out)


def cmd_elliptic(args):
    u = io.load_field(args.input)
    sol = elliptic.solve_elliptic(u)
    io.save_field(sol.U.to_grid(is_real=True), args.out)
    _emit({"out": str(args.out), "mean_u": sol.mean_u, "residual": elliptic.residual(u, sol)})


def _config(args):
    return semigroup.PropagatorConfig(nu=args.nu, k=args.k, dt=args.dt,
                                      u_truncation=args.truncation, scheme=args.scheme)


def cmd_solve(args):
    u = io.load_field(args.u)
    f0 = io.load_field(args.f0) if args.f0 else u
    ft, traj = semigroup.propagate(f0, u, _config(args), args.t, record=True)
    if args.field_out:
        io.save_field(ft.to_grid(), args.field_out)
    _emit({"t": args.t, "l2_initial": float(traj.l2_norms[0]), "l2_final": float(traj.l2_norms[-1]),
           "gradient_budget": traj.gradient_budget(),
           "budget_limit": float(traj.l2_norms[0] ** 2 / (2 * args.nu))}, args.out)


def cmd_opnorm(args):
    u = io.load_field(args.u)
    est = semigroup.operator_norm(u, _config(args), args.T, zero_mean=args.zero_mean)
    _emit({"T": args.T, "sigma": est.sigma, "iterations": est.iterations,
           "residual": est.residual}, args.out)


RATE_COLUMNS = ("nu", "r", "T1", "T2", "sigma1", "sigma2")


def cmd_rate(args):
    u = io.load_field(args.u)
    points = []
    for nu in nu_grid(args.nu_grid):
        rp = semigroup.decay_rate(u, nu, args.k, dt=args.dt, u_truncation=args.truncation,
                                  scheme=args.scheme)
        points.append(rp)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RATE_COLUMNS)
            for p in points:
                w.writerow([repr(getattr(p, c)) for c in RATE_COLUMNS])
    rec = {"points": [{**{c: getattr(p, c) for c in RATE_COLUMNS}, "flags": list(p.flags),
                       "dt": p.dt, "scheme": p.scheme} for p in points]}
    if len(points) >= 4:
        fit = experiments.fit_exponent([p.nu for p in points], [p.r for p in points])
        rec["fit"] = experiments._fit_record(fit)
    _emit(rec, args.out)


def cmd_weibound(args):
    u = io.load_field(args.u)
    rep = semigroup.wei_bound_report(u, args.nu, args.t, args.delta)
    rec = {"bound": rep.bound, "omega1": rep.omega1, "F": rep.F, "t_star": rep.t_star}
    if args.measure:
        cfg = semigroup.PropagatorConfig(nu=args.nu)
        rec["sigma"] = semigroup.operator_norm(u, cfg, args.t).sigma
    _emit(rec, args.out)


def cmd_fk(args):
    u = io.load_field(args.u)
    f0 = io.load_field(args.f0)
    cfg = stochastic.FKConfig(args.nu, args.xi, args.t, n_paths=args.paths, seed=args.seed)
    rep = stochastic.simulate_variance(f0, u, cfg)
    _emit({"variance_integral": rep.variance_integral, "variance_stderr": rep.variance_stderr,
           "lhs_deficit": rep.lhs_deficit, "residual_sigmas": rep.residual_sigmas}, args.out)


def cmd_parabolic(args):
    u = io.load_field(args.u)
    table = parabolic.appendix_b_check(u, nu_grid(args.nu_grid), nu_grid(args.t_grid))
    cols = ("nu", "t", "lhs", "reference", "ratio")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            w.writerows(table.rows.tolist())
    _emit({"nu_slope": table.nu_slope, "t_slope": table.t_slope,
           "ratio_spread": table.ratio_spread, "max_ratio": table.max_ratio,
           "rows": [dict(zip(cols, r)) for r in table.rows.tolist()]}, args.out)


def cmd_report(args):
    if args.spec:
        spec = experiments.SweepSpec.from_dict(json.loads(Path(args.spec).read_text()))
    else:
        spec = experiments.headline_spec()
    spec = spec.with_seed_offset(args.seed_offset)
    table = experiments.rate_sweep(spec, workers=args.workers)
    record = experiments.write_report(table, args.out)
    _emit({"out": str(args.out), "failed_cells": record["failed_cells"],
           "resolutions": {n: {k: v for k, v in e.items() if k != "seeds"}
                           for n, e in record["resolutions"].items()}})


def cmd_prevalence(args):
    summ = experiments.prevalence_study(args.alpha, args.seeds, depths=tuple(range(*_inclusive(args.depths))),
                                        n_points=args.n)
    groups = [g for g in (summ.rough, summ.smooth, summ.fbm) if g is not None]
    _emit({g.label: {"fraction": g.fraction, "ci": list(g.ci), "per_depth": g.per_depth}
           for g in groups}, args.out)


def _inclusive(text):
    lo, hi = depth_range(text)
    return lo, hi + 1


# ---------------------------------------------------------------- parser

def _solver_args(p):
    p.add_argument("--u", required=True, help="velocity field file")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--k", type=float, default=1)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--truncation", type=int, default=None, help="keep modes |m| <= M of u")
    p.add_argument("--scheme", choices=semigroup.SCHEMES, default="strang_split")


def build_parser():
    parser = argparse.ArgumentParser(prog="roughshear", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a field file")
    p.add_argument("--kind", required=True, choices=FieldRecipe._KINDS)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=-0.25)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--hurst", type=float, default=0.5)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--terms", type=int, default=10)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("norms", help="Besov, Sobolev and Campanato seminorms")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--besov", help="s,p")
    p.add_argument("--sobolev", type=float)
    p.add_argument("--campanato", help="p,alpha,k")
    p.add_argument("--out")
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("lambda", help="dyadic Wei index")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--depths", help="a..b")
    p.add_argument("--brute-force", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("irregular", help="alpha-irregularity index of a velocity")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_irregular)

    p = sub.add_parser("elliptic", help="solve -U'' = u - mean(u)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_elliptic)

    p = sub.add_parser("solve", help="propagate an initial datum")
    _solver_args(p)
    p.add_argument("--f0", help="initial datum file (default: u itself)")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--field-out", help="write f(t) to this field file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("opnorm", help="operator norm of the time-T propagator")
    _solver_args(p)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--zero-mean", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_opnorm)

    p = sub.add_parser("rate", help="decay rates over a nu grid")
    p.add_argument("--u", required=True)
    p.add_argument("--nu-grid", required=True, help="a:b:n or comma list")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--dt", type=float)
    p.add_argument("--truncation", type=int)
    p.add_argument("--scheme", choices=semigroup.SCHEMES, default="strang_split")
    p.add_argument("--csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("weibound", help="explicit semigroup bound")
    p.add_argument("--u", required=True)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--measure", action="store_true", help="also compute the operator norm")
    p.add_argument("--out")
    p.set_defaults(func=cmd_weibound)

    p = sub.add_parser("fk", help="Feynman-Kac Monte Carlo check")
    p.add_argument("--u", required=True)
    p.add_argument("--f0", required=True)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fk)

    p = sub.add_parser("parabolic", help="gradient time integral against its bound")
    p.add_argument("--u", required=True)
    p.add_argument("--nu-grid", required=True)
    p.add_argument("--t-grid", required=True)
    p.add_argument("--csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_parabolic)

    p = sub.add_parser("report", help="rate sweep with CSV, JSON and SVG output")
    p.add_argument("--spec", help="sweep spec JSON (default: headline configuration)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed-offset", type=int, default=0)
    p.add_argument("--workers", type=int, help=f"default from ${experiments.WORKERS_ENV}")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("prevalence", help="fractions of depth-stable irregular fields")
    p.add_argument("--alpha", type=float, default=-0.25)
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--depths", default="5..7")
    p.add_argument("--n", type=int, default=2048)
    p.add_argument("--out")
    p.set_defaults(func=cmd_prevalence)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"roughshear {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
