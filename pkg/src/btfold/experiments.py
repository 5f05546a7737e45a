"""Experiment drivers built on the numerical modules.

Each ``run_*`` function takes an :class:`~btfold.reporting.ExperimentConfig`
(missing keys fall back to :data:`DEFAULTS`) and returns a result object
with a ``to_dict`` method. :func:`btfold.cli.main` writes those to disk.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as _dc_field
from typing import List, Optional

import mpmath as mp
import numpy as np
from scipy.optimize import brentq

from . import painleve as pl
from .errors import BTFoldError, Divergence, NoEvent, NoReturn
from .manifold import jump_orbit, locate_fold
from .models import BasePoint, Params, builtin_canonical_fold, builtin_example
from .ode_core import IntegratorConfig, LinearEvent, integrate, integrate_to_event
from .poincare import (SectionSpec, find_periodic_orbit, horseshoe_test, lyapunov_max,
                       map_config, return_map, return_map_2d, settle)
from .reporting import ExperimentConfig

__all__ = ["DEFAULTS", "ScalingReport", "TransitionFit", "SweepRecord", "OrbitResult",
           "PoleTableResult", "run_scaling_theorem1", "run_omega_limit", "run_periodic_orbit",
           "run_delta_sweep", "run_pole_table", "run_horseshoe", "example_fold",
           "canonical_fold", "alpha_crossing", "fit_slope", "fit_limit", "count_clusters",
           "classify_attractor", "onset_gap", "sweep_section", "HorseshoeRun", "horseshoe_section",
           "slow_manifold_point", "image_rotation"]

DEFAULTS = {
    "scaling": {"system": "canonical", "c1": 1.0, "delta": 1.0, "eps_max": 1e-2, "eps_min": 1e-5,
                "n_eps": 7, "rho1": 2.0, "offset": 0.5, "z_start": 0.5, "rel_tol": 1e-11,
                "abs_tol": 1e-12, "exponent_null": False},
    "omega": {"c1": 1.0, "delta": 1.0, "rho1": 0.3, "rho1_list": (0.2, 0.3, 0.4),
              "eps_max": 1e-3, "eps_min": 1e-10, "n_eps": 8, "rel_tol": 1e-12, "abs_tol": 1e-14,
              "z_init": (20.0, 40.0, 80.0), "tolerance": 0.05},
    "orbit": {"eps": 0.01, "delta": 1.0, "start": (0.5, 0.0, 1.0), "transient_returns": 5,
              "rel_tol": 1e-12, "abs_tol": 1e-14, "newton_tol": 1e-9, "fold_distance": 0.2,
              "symmetry_tol": 1e-5},
    "sweep": {"eps": 0.01, "grid": "delta", "delta_max": 1.0, "delta_min": 0.01, "n_delta": 40,
              "c1_min": 0.2, "c1_max": 2.0, "start": (0.5, 0.0, 1.0), "transient_returns": 10,
              "n_returns": 40, "lyap_horizon": 30000.0, "lyap_interval": 50.0,
              "cluster_tol": 1e-5, "rel_tol": 1e-10, "abs_tol": 1e-12, "threads": 1},
    "horseshoe": {"eps": 0.01, "delta": 0.025, "offset": 0.5, "z_start": 1.0, "c2": 0.0,
                  "c2_ladder": (0.025, 0.05, 0.1, 0.2, 0.4, 0.8), "width": 30.0, "grid": 24,
                  "crossing_ladder": (0.5, 0.8, 1.2), "crossing_width": 3.0,
                  "boundary_points": 48, "rotation_samples": 161, "min_flight_time": 200.0,
                  "rel_tol": 1e-10, "abs_tol": 1e-12, "threads": 1},
    "poles": {"z_init": 20.0, "z_init_list": (20.0, 40.0, 80.0), "dx_step": 1e-4, "n_stencil": 5,
              "eta0": (0.02, 0.01, 0.005), "dps": 40, "rho3_min": 1e-6, "rho3_max": 1e-3,
              "n_rho3": 7, "laurent_s_min": 0.02, "laurent_s_max": 0.4},
}


def config_for(experiment, cfg=None):
    """Defaults of ``experiment`` overlaid with ``cfg``."""
    base = ExperimentConfig(DEFAULTS[experiment])
    return base.merged(cfg or {})


def _grid(hi, lo, n):
    return np.logspace(math.log10(hi), math.log10(lo), int(n))


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------

def example_fold(delta, which="plus"):
    """Fold of the example system located from a bracket on its branch."""
    sys = builtin_example()
    s = 1.0 if which == "plus" else -1.0
    ys = (-0.7 * s, -0.45 * s)
    br = tuple(BasePoint(0.0, y, 3 * (y - y ** 3)) for y in ys)
    return locate_fold(sys, delta, br)


def canonical_fold(delta, c1=1.0):
    sys = builtin_canonical_fold(c1)
    return locate_fold(sys, delta, (BasePoint(0.0, -0.1, 0.01), BasePoint(0.0, 0.1, 0.01)))


def alpha_crossing(sys, delta, fold, level):
    """Point where the jump orbit from ``fold`` first rises through ``y = level``."""
    orbit = jump_orbit(sys, delta, fold)
    hit = orbit.trajectory.first_crossing(LinearEvent.axis(1, level, 3), "rising")
    if hit is None:
        raise NoEvent(f"jump orbit never reaches y={level}")
    return np.asarray(hit.y)


def _example_slow_start(eps, z):
    # point of the attracting upper branch at height z with the first-order x
    y = brentq(lambda v: 3 * (v - v ** 3) - z, -2 / math.sqrt(3), -1 / math.sqrt(3))
    x = -eps * math.sin(2.5 * y) / (3 * (1 - 3 * y * y))
    return np.array([x, y, z])


def _canonical_slow_start(eps, z):
    return np.array([-eps / (2 * math.sqrt(z)), -math.sqrt(z), z])


def fit_slope(eps, dist):
    """Least squares slope of ``log dist`` against ``log eps`` with leave-one-out half-width."""
    le, ld = np.log(eps), np.log(dist)
    slope, icpt = np.polyfit(le, ld, 1)
    loo = []
    for k in range(len(le)):
        m = np.arange(len(le)) != k
        loo.append(np.polyfit(le[m], ld[m], 1)[0])
    return float(slope), float(np.max(np.abs(np.array(loo) - slope))), float(icpt)


# ---------------------------------------------------------------------------
# jump scaling
# ---------------------------------------------------------------------------

@dataclass
class ScalingReport:
    system: str
    eps_grid: List[float]
    distances: List[float]
    fitted_slope: float
    slope_ci: float
    intercept: float
    alpha_point: List[float]
    crossings: List[List[float]]
    failures: List[str] = _dc_field(default_factory=list)
    null_ratio_spread: Optional[float] = None

    def to_dict(self):
        return {"system": self.system, "eps_grid": self.eps_grid, "distances": self.distances,
                "fitted_slope": self.fitted_slope, "slope_ci": self.slope_ci,
                "intercept": self.intercept, "alpha_point": self.alpha_point,
                "crossings": self.crossings, "failures": self.failures,
                "null_ratio_spread": self.null_ratio_spread}


def run_scaling_theorem1(cfg=None):
    """Distance between the perturbed jump and the jump orbit on the exit section.

    ``system = canonical`` uses the normal form with section ``Y = rho1^2``;
    ``system = example`` uses the example system with section
    ``y = y_fold + offset``. Both start on the attracting branch
    ``z_start`` above the fold.
    """
    cfg = config_for("scaling", cfg)
    delta = float(cfg["delta"])
    name = cfg["system"]
    if name == "canonical":
        sys = builtin_canonical_fold(cfg["c1"])
        fold = canonical_fold(delta, cfg["c1"])
        level = cfg["rho1"] ** 2
        start = _canonical_slow_start
    elif name == "example":
        sys = builtin_example()
        fold = example_fold(delta)
        level = fold.point.y + cfg["offset"]
        start = _example_slow_start
    else:
        raise ValueError(f"unknown system {name!r}")
    zf = fold.point.z
    alpha = alpha_crossing(sys, delta, fold, level)
    eps_grid = _grid(cfg["eps_max"], cfg["eps_min"], cfg["n_eps"])
    dist, used, cross, fails = [], [], [], []
    for eps in eps_grid:
        y0 = start(eps, zf + cfg["z_start"])
        if name == "canonical":
            atol = tuple(cfg["abs_tol"] * np.array([eps ** 0.6, eps ** 0.4, eps ** 0.8]))
        else:
            atol = cfg["abs_tol"]
        icfg = IntegratorConfig(rel_tol=cfg["rel_tol"], abs_tol=atol,
                                max_time=10 * cfg["z_start"] / eps)
        try:
            hit = integrate_to_event(sys.field(Params(eps, delta)), y0, 0.0, "forward",
                                     LinearEvent.axis(1, level, 3), "rising", icfg)
        except BTFoldError as exc:
            fails.append(f"eps={eps!r}: {type(exc).__name__}: {exc}")
            continue
        d = math.hypot(hit.y[0] - alpha[0], hit.y[2] - zf)
        dist.append(d)
        used.append(float(eps))
        cross.append([float(v) for v in hit.y])
    slope, ci, icpt = fit_slope(np.array(used), np.array(dist))
    rep = ScalingReport(name, used, dist, slope, ci, icpt, [float(v) for v in alpha], cross, fails)
    if cfg["exponent_null"]:
        r = np.array(dist) / np.array(used) ** 0.8
        rep.null_ratio_spread = float(r.max() / r.min())
    return rep


# ---------------------------------------------------------------------------
# transition constant
# ---------------------------------------------------------------------------

def fit_limit(eps, scaled, log_term=False):
    """Extrapolate ``scaled(eps)`` to ``eps -> 0`` in powers of ``eps^(1/5)``.

    The model is ``L + a e + b e^2`` with ``e = eps^(1/5)``, plus
    ``c e log(eps)`` when ``log_term`` is set.
    """
    e = np.asarray(eps, float) ** 0.2
    cols = [np.ones_like(e), e, e * e]
    if log_term:
        cols.append(e * np.log(np.asarray(eps, float)))
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, np.asarray(scaled, float), rcond=None)
    return float(coef[0])


@dataclass
class TransitionFit:
    eps_grid: List[float]
    z_out_scaled: List[float]
    limit: float
    spread: float
    compared_omega: float
    limit_log: float
    relative_error: float
    rho1: float
    by_rho1: dict = _dc_field(default_factory=dict)
    failures: List[str] = _dc_field(default_factory=list)

    def to_dict(self):
        return {"eps_grid": self.eps_grid, "z_out_scaled": self.z_out_scaled,
                "limit": self.limit, "spread": self.spread, "limit_log": self.limit_log,
                "compared_omega": self.compared_omega, "relative_error": self.relative_error,
                "rho1": self.rho1, "by_rho1": self.by_rho1, "failures": self.failures}


def _z_out_scaled(eps_grid, rho1, delta, c1, rtol, atol0):
    sys = builtin_canonical_fold(c1)
    out, used, fails = [], [], []
    for eps in eps_grid:
        z0 = min(0.5, 400 * eps ** 0.8)
        atol = tuple(atol0 * np.array([eps ** 0.6, eps ** 0.4, eps ** 0.8]))
        icfg = IntegratorConfig(rel_tol=rtol, abs_tol=atol, max_time=10 * z0 / eps)
        try:
            hit = integrate_to_event(sys.field(Params(eps, delta)), _canonical_slow_start(eps, z0),
                                     0.0, "forward", LinearEvent.axis(1, rho1 ** 2, 3), "rising", icfg)
        except BTFoldError as exc:
            fails.append(f"eps={eps!r}: {type(exc).__name__}: {exc}")
            continue
        out.append(float(hit.y[2] / eps ** 0.8))
        used.append(float(eps))
    return used, out, fails


def run_omega_limit(cfg=None):
    """``Z`` on the exit section scaled by ``eps^(-4/5)``, extrapolated to ``eps = 0``.

    Runs every ``rho1`` of ``rho1_list`` (plus ``rho1``) and compares each
    limit with the first tritronquee pole from :func:`btfold.painleve.compute_omega`.
    The reported spread is the largest change of the limit when the
    log-aware model is used or the largest ``eps`` is dropped.
    """
    cfg = config_for("omega", cfg)
    omega, _ = pl.compute_omega(cfg["z_init"])
    grid = _grid(cfg["eps_max"], cfg["eps_min"], cfg["n_eps"])
    rhos = sorted(set([float(cfg["rho1"])] + [float(r) for r in cfg["rho1_list"]]))
    by = {}
    main = None
    for rho in rhos:
        used, sc, fails = _z_out_scaled(grid, rho, cfg["delta"], cfg["c1"], cfg["rel_tol"], cfg["abs_tol"])
        L = fit_limit(used, sc)
        L4 = fit_limit(used, sc, log_term=True)
        Ld = fit_limit(used[1:], sc[1:])
        spread = max(abs(L4 - L), abs(Ld - L))
        by[repr(rho)] = {"limit": L, "limit_log": L4, "spread": spread,
                         "relative_error": abs(L - omega) / abs(omega), "z_out_scaled": sc}
        if rho == float(cfg["rho1"]):
            main = TransitionFit(used, sc, L, spread, omega, L4, abs(L - omega) / abs(omega),
                                 rho, {}, fails)
    main.by_rho1 = by
    return main


# ---------------------------------------------------------------------------
# periodic orbit of the example system
# ---------------------------------------------------------------------------

def sweep_section():
    """Section ``y = 0`` crossed downward with ``z > 0``."""
    return SectionSpec("y", 0.0, "falling", (("z", 0.0, math.inf),))


@dataclass
class OrbitResult:
    orbit: object
    orbit_half_eps: Optional[object]
    fold_distances: dict
    symmetry_error: float
    samples: np.ndarray
    eps: float
    delta: float

    def to_dict(self):
        d = {"eps": self.eps, "delta": self.delta, "orbit": self.orbit.to_dict(),
             "fold_distances": self.fold_distances, "symmetry_error": self.symmetry_error}
        if self.orbit_half_eps is not None:
            d["orbit_half_eps"] = self.orbit_half_eps.to_dict()
        return d


def _orbit_at(sys, sec, params, cfg):
    icfg = IntegratorConfig(rel_tol=cfg["rel_tol"], abs_tol=cfg["abs_tol"],
                            max_time=50.0 / params.eps)
    reps = settle(sys, sec, np.array(cfg["start"], float), params, int(cfg["transient_returns"]), icfg)
    return find_periodic_orbit(sys, sec, reps[-1].image, params, icfg, tol=cfg["newton_tol"])


def run_periodic_orbit(cfg=None, half_eps=True):
    """Relaxation cycle of the example system with multipliers and checks.

    Reports the distance of the cycle to both folds and the symmetry error
    ``max_t |x(t + T_half) + x(t)|``, where ``T_half`` is the time of the
    upward crossing of the section plane.
    """
    cfg = config_for("orbit", cfg)
    sys = builtin_example()
    sec = sweep_section()
    params = Params(cfg["eps"], cfg["delta"])
    po = _orbit_at(sys, sec, params, cfg)
    po2 = _orbit_at(sys, sec, Params(cfg["eps"] / 2, cfg["delta"]), cfg) if half_eps else None
    icfg = IntegratorConfig(rel_tol=cfg["rel_tol"], abs_tol=cfg["abs_tol"], max_time=2 * po.period + 10)
    y0 = po.section_point.as_array()
    traj = integrate(sys.field(params), y0, (0.0, 1.5 * po.period), icfg)
    half = traj.first_crossing(LinearEvent.axis(1, 0.0, 3), "rising")
    ts = np.linspace(0.0, po.period, 4001)
    A = traj(ts)
    B = traj(ts + half.t)
    sym = float(np.max(np.abs(A + B)))
    folds = {}
    for which in ("plus", "minus"):
        fp = example_fold(cfg["delta"], which).point.as_array()
        # distance from the fold to the dense cycle
        tt = np.linspace(0.0, po.period, 200001)
        folds[which] = float(np.min(np.linalg.norm(traj(tt) - fp, axis=1)))
    return OrbitResult(po, po2, folds, sym, A, params.eps, params.delta)


# ---------------------------------------------------------------------------
# delta sweep
# ---------------------------------------------------------------------------

def count_clusters(values, tol):
    """Number of groups of sorted values separated by gaps larger than ``tol``."""
    v = np.sort(np.asarray(values, float))
    if v.size == 0:
        return 0
    return int(1 + np.sum(np.diff(v) > tol * (1 + np.abs(v[1:]))))


def classify_attractor(n_clusters, lyapunov, error, n_samples, certified=False):
    """``chaotic_candidate`` needs a positive exponent with its error bar
    excluding zero (or a certified horseshoe); one cluster is ``periodic``,
    anything else ``multi_periodic``."""
    if certified or (lyapunov - error > 0):
        return "chaotic_candidate"
    if n_clusters == 1:
        return "periodic"
    return "multi_periodic"


@dataclass
class SweepRecord:
    delta: float
    eps: float
    attractor_kind: str
    lyapunov: float
    lyapunov_error: float
    return_samples: List[float]
    clusters: int
    c1: Optional[float] = None
    error: Optional[str] = None

    def to_dict(self):
        return {"delta": self.delta, "eps": self.eps, "c1": self.c1,
                "attractor_kind": self.attractor_kind, "lyapunov": self.lyapunov,
                "lyapunov_error": self.lyapunov_error, "clusters": self.clusters,
                "return_samples": self.return_samples, "error": self.error}


def _sweep_point(args):
    delta, c1, cfg = args
    eps = float(cfg["eps"])
    sys = builtin_example()
    sec = sweep_section()
    params = Params(eps, delta)
    icfg = IntegratorConfig(rel_tol=cfg["rel_tol"], abs_tol=cfg["abs_tol"], max_time=50.0 / eps)
    try:
        reps = settle(sys, sec, np.array(cfg["start"], float), params,
                      int(cfg["transient_returns"]) + int(cfg["n_returns"]), icfg)
        z = [r.image.z for r in reps[int(cfg["transient_returns"]):]]
        ly = lyapunov_max(sys, reps[-1].image, params, cfg["lyap_horizon"], cfg["lyap_interval"])
        nc = count_clusters(z, cfg["cluster_tol"])
        kind = classify_attractor(nc, ly.exponent, ly.error, len(z))
        return SweepRecord(float(delta), eps, kind, ly.exponent, ly.error, [float(v) for v in z], nc, c1)
    except BTFoldError as exc:
        return SweepRecord(float(delta), eps, "failed", math.nan, math.nan, [], 0, c1,
                           f"{type(exc).__name__}: {exc}")


def onset_gap(records):
    """Grid steps from the smallest periodic ``delta`` down to the largest
    chaotic candidate; negative values mean the two overlap.

    ``None`` when either kind is missing.
    """
    chaotic = [r.delta for r in records if r.attractor_kind == "chaotic_candidate"]
    periodic = [r.delta for r in records if r.attractor_kind == "periodic"]
    if not chaotic or not periodic:
        return None
    deltas = sorted((r.delta for r in records), reverse=True)
    return deltas.index(max(chaotic)) - deltas.index(min(periodic))


def run_delta_sweep(cfg=None):
    """Attractor type along a descending grid of ``delta`` at fixed ``eps``.

    With ``grid = c1`` the grid is ``delta = c1 eps sqrt(-log eps)`` over
    ``c1_min .. c1_max``. Grid points are independent and may run on
    ``threads`` workers; records keep grid order.
    """
    cfg = config_for("sweep", cfg)
    eps = float(cfg["eps"])
    if cfg["grid"] == "delta":
        deltas = _grid(cfg["delta_max"], cfg["delta_min"], cfg["n_delta"])
        c1s = [None] * len(deltas)
    elif cfg["grid"] == "c1":
        c1s = list(_grid(cfg["c1_max"], cfg["c1_min"], cfg["n_delta"]))
        deltas = [c * eps * math.sqrt(-math.log(eps)) for c in c1s]
    else:
        raise ValueError("grid must be 'delta' or 'c1'")
    jobs = [(float(d), None if c is None else float(c), cfg) for d, c in zip(deltas, c1s)]
    n = max(1, int(cfg.get("threads", 1) or 1))
    if n == 1:
        return [_sweep_point(j) for j in jobs]
    with ThreadPoolExecutor(n) as ex:
        return list(ex.map(_sweep_point, jobs))


# ---------------------------------------------------------------------------
# Painleve pole table
# ---------------------------------------------------------------------------

@dataclass
class PoleTableResult:
    omega: float
    convergence: list
    rows: list
    dz0_dx0: float
    dz0_dx0_noise: float
    quadratic_residual: float
    laurent: dict
    pole_time: list
    pole_time_slope: float
    crossings: list
    sqrt6_fit: float

    def to_dict(self):
        return {"omega": self.omega, "omega_reference": pl.OMEGA_REFERENCE,
                "omega_discrepancy": self.omega - pl.OMEGA_REFERENCE,
                "convergence": self.convergence, "rows": self.rows,
                "dz0_dx0": self.dz0_dx0, "dz0_dx0_noise": self.dz0_dx0_noise,
                "quadratic_residual": self.quadratic_residual, "laurent": self.laurent,
                "pole_time": self.pole_time, "pole_time_slope": self.pole_time_slope,
                "crossings": self.crossings, "sqrt6_fit": self.sqrt6_fit}


def tritronquee_pole_data(eta0, omega_pole):
    """``(s, xi0)`` where the tritronquee has ``eta = -eta0`` before its pole."""
    tr = omega_pole.trajectory
    ev = LinearEvent.axis(0, -float(eta0), 3)
    hit = tr.first_crossing(ev, "rising")
    if hit is None:
        raise NoEvent(f"tritronquee trajectory does not reach eta={-eta0}")
    return float(hit.y[2]), float(hit.y[1])


def run_pole_table(cfg=None):
    """Pole data of the tritronquee and its perturbations.

    Collects the seed convergence of the first pole, the pole location over
    an ``x0`` stencil at ``z_init``, the Laurent fit, the pole-time series
    error against a high precision solve, and the tritronquee crossings of
    ``y2 = rho3^(-2/5)``.
    """
    cfg = config_for("poles", cfg)
    omega, conv = pl.compute_omega(cfg["z_init_list"])
    n = int(cfg["n_stencil"])
    h = float(cfg["dx_step"])
    dx = [(k - (n - 1) / 2) * h for k in range(n)]
    rows = pl.pole_table(cfg["z_init"], dx=dx)
    z0 = np.array([r["z0"] for r in rows])
    x0 = np.array(dx)
    c = np.polyfit(x0, z0, 2)
    qres = float(np.max(np.abs(np.polyval(c, x0) - z0)))
    mid = n // 2
    d1 = (z0[mid + 1] - z0[mid - 1]) / (2 * h)
    d2 = (z0[mid + 2] - z0[mid - 2]) / (4 * h) if n >= 5 else d1
    noise = abs(d1 - d2) + 1e-12 / h
    base = pl.find_pole(pl.asymptotic_eval(pl.AsymptoticParams(order=1), max(cfg["z_init_list"])))
    lf = pl.laurent_fit(base, (cfg["laurent_s_min"], cfg["laurent_s_max"]))
    lf["quadratic_expected"] = lf["z0"] / 10
    pt = []
    for e in cfg["eta0"]:
        # regularized data of the tritronquee itself, approaching from eta < 0
        s, xi = tritronquee_pole_data(e, base)
        num = pl.pole_time(s, -e, xi, dps=int(cfg["dps"]))
        with mp.workdps(int(cfg["dps"])):
            ser = pl.pole_time_series(mp.mpf(s), -mp.mpf(e), mp.mpf(xi))
            diff = abs(num - ser)
        pt.append({"eta0": float(e), "s": s, "xi0": xi, "tau_numeric": float(num),
                   "tau_series": float(ser), "difference": float(diff)})
    le = np.log([p["eta0"] for p in pt])
    ld = np.log([p["difference"] for p in pt])
    slope = float(np.polyfit(le, ld, 1)[0])
    rhos = _grid(cfg["rho3_max"], cfg["rho3_min"], cfg["n_rho3"])
    cr = []
    for r in rhos:
        z = pl.tritronquee_crossing(r ** -0.4)
        cr.append({"rho3": float(r), "z": z, "scaled": (z - omega) / r ** 0.2})
    rr = np.array([c_["rho3"] for c_ in cr]) ** 0.2
    dz = np.array([c_["z"] for c_ in cr]) - omega
    # dz = a r + b r^5 with r = rho3^(1/5)
    A = np.column_stack([rr, rr ** 5])
    coef, *_ = np.linalg.lstsq(A, dz, rcond=None)
    return PoleTableResult(omega, conv, rows, float(d1), float(noise), qres, lf, pt, slope, cr,
                           float(coef[0]))


# ---------------------------------------------------------------------------
# horseshoe
# ---------------------------------------------------------------------------

@dataclass
class HorseshoeRun:
    report: object
    eps: float
    delta: float
    c1: float
    c2: float
    center: tuple
    rotations: list
    section_level: float
    center_sensitivity: float = math.nan
    tuned_c2: float = math.nan
    tuned_report: object = None

    def to_dict(self):
        return {"eps": self.eps, "delta": self.delta, "c1": self.c1, "c2": self.c2,
                "tuned_c2": self.tuned_c2,
                "tuned_report": self.tuned_report.to_dict() if self.tuned_report is not None else None,
                "center": list(self.center), "center_sensitivity": self.center_sensitivity,
                "rotations": self.rotations,
                "section_level": self.section_level, "report": self.report.to_dict()}


def horseshoe_section(delta, offset=0.5):
    """Section ``y = y_fold + offset`` crossed upward, restricted to ``-3 < z < 0``.

    It sits just past the fold at ``y < 0``, where the jump from that fold
    has left the slow manifold.
    """
    lev = example_fold(delta, "plus").point.y + offset
    return SectionSpec("y", lev, "rising", (("z", -3.0, 0.0),))


def slow_manifold_point(params, section, z_start=1.0, cfg=None):
    """Section coordinates of the orbit started on the upper slow branch at ``z_start``."""
    sys = builtin_example()
    cfg = cfg or IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, max_time=50.0 / params.eps)
    ev = LinearEvent.axis(section.index, section.value, 3)
    hit = integrate_to_event(sys.field(params), _example_slow_start(params.eps, z_start), 0.0,
                             "forward", ev, "rising", cfg)
    return section.coords(hit.y)


def image_rotation(params, section, center, height, n=161, cfg=None, min_flight_time=0.0):
    """Angle swept about ``center`` by the image of the vertical segment of
    ``height`` through it, in turns, and the largest angle step in radians."""
    sys = builtin_example()
    cfg = map_config(params, cfg)
    zs = np.linspace(center[1] - height / 2, center[1] + height / 2, int(n))
    U = np.column_stack([np.full_like(zs, center[0]), zs])
    out = []
    for u in U:
        try:
            out.append(return_map_2d(sys, section, u, params, cfg, min_flight_time)[0])
        except (NoReturn, Divergence):
            continue
    if len(out) < 2:
        return math.nan, math.inf
    P = np.array(out) - center
    ang = np.unwrap(np.arctan2(P[:, 1], P[:, 0]))
    return float((ang[-1] - ang[0]) / (2 * math.pi)), float(np.max(np.abs(np.diff(ang))))


def _tune_height(params, sec, Q, cfg, icfg, mft, rotations):
    # ladder first, then bisection between the entries bracketing one turn
    def measure(c):
        rot, step = image_rotation(params, sec, Q, c * params.eps, cfg["rotation_samples"], icfg, mft)
        rotations.append({"c2": float(c), "turns": rot, "max_step": step})
        return abs(rot) if step < 1.0 else math.nan

    ladder = sorted(float(c) for c in cfg["c2_ladder"])
    vals = [measure(c) for c in ladder]
    good = [(abs(v - 1), c) for c, v in zip(ladder, vals) if math.isfinite(v)]
    if good and min(good)[0] <= 0.25:
        return min(good)[1]
    lo = hi = None
    for (c_a, v_a), (c_b, v_b) in zip(zip(ladder, vals), zip(ladder[1:], vals[1:])):
        if math.isfinite(v_a) and v_a < 1 and (not math.isfinite(v_b) or v_b > 1):
            lo, hi = c_a, c_b
            break
    if lo is None:
        return min(good)[1] if good else ladder[0]
    for _ in range(8):
        mid = math.sqrt(lo * hi)
        v = measure(mid)
        if math.isfinite(v) and abs(v - 1) <= 0.25:
            return mid
        if math.isfinite(v) and v < 1:
            lo = mid
        else:
            hi = mid
    return lo


def _strongest_candidate():
    recs = [r for r in run_delta_sweep() if r.attractor_kind == "chaotic_candidate"]
    if not recs:
        raise NoReturn("the default sweep found no chaotic candidate")
    return max(recs, key=lambda r: r.lyapunov - r.lyapunov_error).delta


def run_horseshoe(cfg=None):
    """Horseshoe test of the example system on a rectangle around the slow
    manifold intersection ``Q``.

    The rectangle has height ``c2 eps`` and width ``width`` times that.
    With ``c2 = 0`` the height is tuned so that the image of the vertical
    segment through ``Q`` turns once about ``Q`` (within a quarter turn):
    the entries of ``c2_ladder`` are tried first, then the bracket around
    one turn is bisected. Measurements whose largest angle step exceeds
    one radian are treated as unresolved. With
    ``delta = none`` the strongest chaotic candidate of the default sweep
    is used.

    If the tuned rectangle is neither mapped inside itself nor crossed at
    least twice, the heights in ``crossing_ladder`` (width ``crossing_width``
    times the height) are tried in turn and the first with two crossings
    is reported; the tuned test is kept as ``tuned_report``.
    """
    cfg = config_for("horseshoe", cfg)
    eps = float(cfg["eps"])
    delta = float(cfg["delta"]) if cfg.get("delta") is not None else _strongest_candidate()
    params = Params(eps, delta)
    icfg = IntegratorConfig(rel_tol=cfg["rel_tol"], abs_tol=cfg["abs_tol"], max_time=50.0 / eps)
    sec = horseshoe_section(delta, cfg["offset"])
    Q = slow_manifold_point(params, sec, cfg["z_start"], icfg)
    # Q should not depend on where on the branch the orbit starts
    Q2 = slow_manifold_point(params, sec, 0.5 * cfg["z_start"], icfg)
    mft = float(cfg["min_flight_time"])
    rotations = []
    c2 = float(cfg["c2"])
    if c2 <= 0:
        c2 = _tune_height(params, sec, Q, cfg, icfg, mft, rotations)
    n = int(cfg["grid"])

    def test(height, width):
        w = width * height * eps
        h = height * eps
        rect = ((Q[0] - w / 2, Q[0] + w / 2), (Q[1] - h / 2, Q[1] + h / 2))
        return horseshoe_test(builtin_example(), rect, params, grid=(n, n), section=sec, center=Q,
                              cfg=icfg, boundary_points=int(cfg["boundary_points"]),
                              min_flight_time=mft)

    tuned_c2 = c2
    rep = test(c2, float(cfg["width"]))
    tuned_rep = None
    if not rep.contraction and rep.crossing_components < 2:
        # the one-turn height can be too small for the folded image to cross twice
        for cand in cfg.get("crossing_ladder") or ():
            r = test(float(cand), float(cfg["crossing_width"]))
            if r.crossing_components >= 2:
                tuned_rep, rep, c2 = rep, r, float(cand)
                break
    c1 = delta / (eps * math.sqrt(-math.log(eps)))
    return HorseshoeRun(rep, eps, delta, c1, c2, (float(Q[0]), float(Q[1])), rotations, sec.value,
                        float(np.linalg.norm(Q2 - Q)), tuned_c2, tuned_rep)
