"""Command line entry point.

Every experiment subcommand writes ``report.json`` plus CSV and SVG files
into ``<out>/<experiment>-<config hash>`` and exits with 0 when its
acceptance checks pass, 2 when they fail and 1 on errors.
"""
import argparse
import csv
import math
import os
import sys

import numpy as np

from . import __version__
from . import experiments as ex
from . import painleve as pl
from .errors import BTFoldError, ConfigError
from .plotting import PLOT_KINDS, PlotError, emit_plot
from .reporting import (SCHEMA_VERSION, ExperimentConfig, load_config, parse_config,
                        run_directory, to_jsonable, write_csv, write_json)

__all__ = ["main", "build_parser", "EXPERIMENTS"]

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


def _check(value, target, passed):
    return {"value": to_jsonable(value), "target": target, "passed": bool(passed)}


# ---------------------------------------------------------------------------
# per experiment: run, checks, files
# ---------------------------------------------------------------------------

def _scaling(cfg, run_dir):
    rep = ex.run_scaling_theorem1(cfg)
    tol = 0.05 if rep.system == "canonical" else 0.07
    checks = {"slope": _check(rep.fitted_slope, f"0.8 +- {tol}", abs(rep.fitted_slope - 0.8) <= tol)}
    if rep.null_ratio_spread is not None:
        checks["null_ratio_spread"] = _check(rep.null_ratio_spread, "< 2", rep.null_ratio_spread < 2)
    rows = [(e, d, d / e ** 0.8) for e, d in zip(rep.eps_grid, rep.distances)]
    write_csv(os.path.join(run_dir, "scaling.csv"), ["eps", "distance", "distance_over_eps45"], rows)
    emit_plot({"x": rep.eps_grid, "y": np.log10(rep.distances).tolist()}, "line",
              os.path.join(run_dir, "scaling.svg"), xlabel="eps", ylabel="log10 distance", log_x=True)
    return rep.to_dict(), checks


def _omega(cfg, run_dir):
    fit = ex.run_omega_limit(cfg)
    by = fit.by_rho1
    checks = {"relative_error": _check(fit.relative_error, "< 0.05", fit.relative_error < 0.05),
              "reference_constant": _check(fit.limit, f"{pl.OMEGA_REFERENCE} +- 0.05",
                                           abs(fit.limit - pl.OMEGA_REFERENCE) < 0.05)}
    lims = [v["limit"] for v in by.values()]
    worst = max(abs(v["relative_error"]) for v in by.values())
    bound = 2 * max(v["spread"] for v in by.values())
    checks["rho1_within_5pct"] = _check(worst, "< 0.05", worst < 0.05)
    checks["rho1_agreement"] = _check(max(lims) - min(lims), f"<= {bound!r}",
                                      max(lims) - min(lims) <= bound)
    rows = []
    for rho, v in sorted(by.items(), key=lambda kv: float(kv[0])):
        for e, s in zip(fit.eps_grid, v["z_out_scaled"]):
            rows.append((float(rho), e, s))
    write_csv(os.path.join(run_dir, "omega.csv"), ["rho1", "eps", "z_out_scaled"], rows)
    series = [{"x": fit.eps_grid, "y": v["z_out_scaled"], "label": f"rho1={float(k):g}"}
              for k, v in sorted(by.items(), key=lambda kv: float(kv[0]))]
    emit_plot({"series": series}, "line", os.path.join(run_dir, "omega.svg"),
              xlabel="eps", ylabel="Z_out / eps^(4/5)", log_x=True)
    return fit.to_dict(), checks


def _orbit(cfg, run_dir):
    res = ex.run_periodic_orbit(cfg)
    po, po2 = res.orbit, res.orbit_half_eps
    mods = [abs(m) for m in po.multipliers]
    checks = {"residual": _check(po.residual, "<= 1e-9", po.residual <= 1e-9),
              "stable": _check(max(po.log_abs_multipliers), "< 0", max(po.log_abs_multipliers) < 0),
              "folds": _check(max(res.fold_distances.values()), "< " + repr(float(cfg["fold_distance"])),
                              max(res.fold_distances.values()) < cfg["fold_distance"]),
              "symmetry": _check(res.symmetry_error, "< " + repr(float(cfg["symmetry_tol"])),
                                 res.symmetry_error < cfg["symmetry_tol"])}
    if po2 is not None:
        dec = all(b < a for a, b in zip(sorted(po.log_abs_multipliers), sorted(po2.log_abs_multipliers)))
        checks["half_eps_decrease"] = _check([list(po.log_abs_multipliers), list(po2.log_abs_multipliers)],
                                             "log|m| decreases", dec)
    write_csv(os.path.join(run_dir, "orbit.csv"), ["x", "y", "z"], [tuple(r) for r in res.samples])
    emit_plot({"x": res.samples[:, 1], "y": res.samples[:, 2]}, "line",
              os.path.join(run_dir, "orbit.svg"), xlabel="y", ylabel="z")
    d = res.to_dict()
    d["multiplier_moduli"] = mods
    return d, checks


def _sweep(cfg, run_dir):
    recs = ex.run_delta_sweep(cfg)
    ok = [r for r in recs if r.attractor_kind != "failed"]
    kinds = [r.attractor_kind for r in recs]
    chaotic = [r.delta for r in ok if r.attractor_kind == "chaotic_candidate"]
    checks = {"large_delta_periodic": _check(kinds[0], "periodic", kinds[0] == "periodic"),
              "chaotic_candidate": _check(len(chaotic), ">= 1", len(chaotic) >= 1)}
    gap = ex.onset_gap(recs)
    if gap is not None:
        checks["onset_order"] = _check(gap, ">= -1", gap >= -1)
    write_csv(os.path.join(run_dir, "sweep.csv"),
              ["delta", "c1", "attractor_kind", "lyapunov", "lyapunov_error", "clusters"],
              [(r.delta, "" if r.c1 is None else r.c1, r.attractor_kind, r.lyapunov,
                r.lyapunov_error, r.clusters) for r in recs])
    pts = [(r.delta, z) for r in recs for z in r.return_samples]
    write_csv(os.path.join(run_dir, "bifurcation.csv"), ["delta", "z"], pts)
    if pts:
        emit_plot({"x": [p[0] for p in pts], "y": [p[1] for p in pts]}, "bifurcation",
                  os.path.join(run_dir, "bifurcation.svg"), xlabel="delta", ylabel="z on section",
                  log_x=True)
    return {"records": [r.to_dict() for r in recs]}, checks


def _horseshoe(cfg, run_dir):
    run = ex.run_horseshoe(cfg)
    rep = run.report
    vals = [float(v) for v in rep.inequality_values]
    consistent = (not rep.certified) or all(v > 0 for v in vals)
    checks = {"certificate_consistent": _check(rep.certified, "certified implies positive margins",
                                               consistent),
              "crossing_or_contraction": _check(rep.crossing_components,
                                                ">= 2 crossings, or image inside the rectangle",
                                                rep.contraction or rep.crossing_components >= 2)}
    tuned = [r for r in run.rotations if r["c2"] == run.tuned_c2]
    if tuned and not rep.contraction:
        t = abs(tuned[-1]["turns"])
        checks["rotation"] = _check(t, "within [0.75, 1.25] turns", 0.75 <= t <= 1.25)
    rows = []
    for side, img in enumerate(rep.boundary_image):
        for x, z in img:
            rows.append((side, x, z))
    write_csv(os.path.join(run_dir, "boundary_image.csv"), ["side", "x", "z"], rows)
    curves = [np.asarray(c)[np.all(np.isfinite(c), axis=1)] for c in rep.boundary_image]
    if any(len(c) for c in curves):
        emit_plot({"curves": curves, "rect": rep.rectangle, "center": run.center}, "ring",
                  os.path.join(run_dir, "ring.svg"), xlabel="x", ylabel="z")
    return run.to_dict(), checks


def _poles(cfg, run_dir):
    res = ex.run_pole_table(cfg)
    conv = res.convergence
    spread = conv[-1]["spread"] if conv and "spread" in conv[-1] else math.nan
    lf = res.laurent
    checks = {"omega_spread": _check(spread, "< 1e-4", spread < 1e-4),
              "omega_reference": _check(res.omega, f"{pl.OMEGA_REFERENCE} +- 0.05",
                                        abs(res.omega - pl.OMEGA_REFERENCE) < 0.05),
              "laurent_order": _check(lf["order"], "2 +- 0.01", abs(lf["order"] - 2) <= 0.01),
              "laurent_coefficient": _check(lf["coefficient"], "6 +- 0.01",
                                            abs(lf["coefficient"] - 6) <= 0.01),
              "laurent_quadratic": _check(lf["quadratic"], "z0/10 +- 1%",
                                          abs(lf["quadratic"] - lf["quadratic_expected"])
                                          <= 0.01 * abs(lf["quadratic_expected"])),
              "pole_time_slope": _check(res.pole_time_slope, "8 +- 1", abs(res.pole_time_slope - 8) <= 1),
              "dz0_dx0": _check(res.dz0_dx0, "> 10 x noise", abs(res.dz0_dx0) > 10 * res.dz0_dx0_noise),
              "smoothness": _check(res.quadratic_residual, "< 1e-8", res.quadratic_residual < 1e-8)}
    write_csv(os.path.join(run_dir, "poles.csv"), ["dx0", "dy0", "x0", "y0", "z0"],
              [(r["dx0"], r["dy0"], r["x0"], r["y0"], r["z0"]) for r in res.rows])
    write_csv(os.path.join(run_dir, "pole_time.csv"),
              ["eta0", "s", "xi0", "tau_numeric", "tau_series", "difference"],
              [(p["eta0"], p["s"], p["xi0"], p["tau_numeric"], p["tau_series"], p["difference"])
               for p in res.pole_time])
    write_csv(os.path.join(run_dir, "crossings.csv"), ["rho3", "z", "scaled"],
              [(c["rho3"], c["z"], c["scaled"]) for c in res.crossings])
    emit_plot({"x": [p["eta0"] for p in res.pole_time],
               "y": [math.log10(p["difference"]) for p in res.pole_time]}, "line",
              os.path.join(run_dir, "pole_time.svg"), xlabel="eta0", ylabel="log10 difference",
              log_x=True)
    return res.to_dict(), checks


EXPERIMENTS = {"scaling": _scaling, "omega": _omega, "orbit": _orbit, "sweep": _sweep,
               "horseshoe": _horseshoe, "poles": _poles}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="btfold", description="Fast-slow fold experiments.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--out", default="runs", help="parent directory of run directories")
    common.add_argument("--threads", type=int, help="worker threads for grid experiments")
    common.add_argument("--rel-tol", type=float, dest="rel_tol", help="integrator relative tolerance")
    common.add_argument("--abs-tol", type=float, dest="abs_tol", help="integrator absolute tolerance")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
        if name == "scaling":
            sp.add_argument("--exponent-null", action="store_true", dest="exponent_null",
                            help="also report the spread of distance / eps^(4/5)")
    pp = sub.add_parser("plot", help="render a CSV column pair to SVG")
    pp.add_argument("csv", help="input CSV with a header row")
    pp.add_argument("--kind", choices=PLOT_KINDS[:3], default="line")
    pp.add_argument("--x", required=True, help="column for the horizontal axis")
    pp.add_argument("--y", required=True, help="column for the vertical axis")
    pp.add_argument("--output", required=True, help="SVG path")
    pp.add_argument("--log-x", action="store_true", dest="log_x")
    pp.add_argument("--title")
    return p


def _config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        over.update(parse_config(item))
    for key in ("threads", "rel_tol", "abs_tol"):
        if getattr(args, key, None) is not None:
            over[key] = getattr(args, key)
    if getattr(args, "exponent_null", False):
        over["exponent_null"] = True
    return ex.config_for(args.command, cfg.merged(over))


def _plot(args):
    with open(args.csv, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    try:
        x = [float(r[args.x]) for r in rows]
        y = [float(r[args.y]) for r in rows]
    except KeyError as exc:
        raise ConfigError(f"column {exc} not in {args.csv}") from exc
    emit_plot({"x": x, "y": y}, args.kind, args.output, title=args.title, xlabel=args.x,
              ylabel=args.y, log_x=args.log_x)
    print(args.output)
    return EXIT_OK


def run_experiment(name, cfg, out):
    """Run one experiment, write its files and return ``(run_dir, report)``."""
    run_dir = run_directory(out, name, cfg)
    results, checks = EXPERIMENTS[name](cfg, run_dir)
    report = {"schema_version": SCHEMA_VERSION, "experiment": name, "version": __version__,
              "config": dict(cfg), "config_hash": cfg.digest(),
              "tolerances": {"rel_tol": cfg.get("rel_tol"), "abs_tol": cfg.get("abs_tol")},
              "results": results,
              "acceptance": {"passed": all(c["passed"] for c in checks.values()), "checks": checks}}
    # execution-only keys do not belong in a reproducible report
    report["config"].pop("threads", None)
    write_json(os.path.join(run_dir, "report.json"), report)
    return run_dir, report


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            return _plot(args)
        cfg = _config(args)
        run_dir, report = run_experiment(args.command, cfg, args.out)
    except (BTFoldError, PlotError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for name, c in report["acceptance"]["checks"].items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}: {c['value']!r} (target {c['target']})")
    print(run_dir)
    return EXIT_OK if report["acceptance"]["passed"] else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
