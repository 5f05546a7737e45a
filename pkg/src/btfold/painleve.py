"""Painleve-I engine: asymptotics, pole regularization and pole location.

The equation is ``y'' = y^2 - z`` written as the first order system
``dx/dz = y^2 - z``, ``dy/dz = x``. Numerically it is integrated as the
autonomous field ``(z - y^2, -x, -1)`` whose forward time runs toward
decreasing ``z``.

Near a pole ``y ~ 6/(z - z0)^2`` the substitution

    x = 2k^2/eta^3 + (k^2 tau/2) eta + (k^2/2) eta^2 - k^2 eta^3 xi,
    y = -k^3/eta^2,    z = k tau,    k = -(6)^(1/5)

turns the pole into a regular crossing ``eta = 0`` of an analytic system in
``(eta, xi)`` with independent variable ``tau``.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit

from . import _kernels as kern
from .errors import (BranchViolation, Divergence, NoEvent, NoPoleFound, OutOfValidity,
                     PoleAt)
from .ode_core import (BuiltinField, IntegratorConfig, LinearEvent, integrate,
                       integrate_to_event)

__all__ = ["KAPPA", "P1State", "RegularizedState", "AsymptoticParams", "PoleResult",
           "asymptotic_eval", "asymptotic_residual", "regularize", "deregularize", "painleve_field",
           "regularized_field", "regularized_rhs", "find_pole", "compute_omega",
           "laurent_fit", "pole_time_series", "pole_time", "tritronquee_crossing",
           "pole_table", "VALIDITY_Z", "OMEGA_REFERENCE"]

#: real fifth root of -6
KAPPA = -6.0 ** 0.2
VALIDITY_Z = 10.0
#: printed 4-digit value of the first real pole of the tritronquee solution
OMEGA_REFERENCE = -3.416
DEFAULT_SWITCH = 20.0


@dataclass(frozen=True)
class P1State:
    """Phase point ``(x2, y2)`` at ``z2`` with ``x2 = dy2/dz2``."""

    x2: float
    y2: float
    z2: float

    def as_array(self):
        return np.array([self.x2, self.y2, self.z2])


@dataclass(frozen=True)
class RegularizedState:
    eta: float
    xi: float
    tau: float
    kappa: float = KAPPA

    def as_array(self):
        return np.array([self.eta, self.xi, self.tau])


@dataclass(frozen=True)
class AsymptoticParams:
    """Coefficients of the oscillatory part; ``C1 = C2 = 0`` is the tritronquee.

    ``order`` 0 keeps the leading power terms, 1 adds the next correction of
    the non-oscillatory part.
    """

    C1: float = 0.0
    C2: float = 0.0
    order: int = 0

    def __post_init__(self):
        if self.order not in (0, 1):
            raise ValueError("order must be 0 or 1")


TRITRONQUEE = AsymptoticParams()


@dataclass
class PoleResult:
    z0: float
    refinement_residual: float
    branch_data: Optional[dict] = None
    trajectory: Optional[object] = None
    switch_state: Optional[P1State] = None


def asymptotic_eval(params, z2):
    """Truncated large-``z2`` expansion of a decaying solution.

    Raises
    ------
    OutOfValidity
        For ``z2 < 10``.
    """
    z = float(z2)
    if z < VALIDITY_Z:
        raise OutOfValidity(f"z2={z} below validity threshold {VALIDITY_Z}")
    phi = 0.8 * math.sqrt(2.0) * z ** 1.25
    c, s = math.cos(phi), math.sin(phi)
    C1, C2 = params.C1, params.C2
    y = -math.sqrt(z) + C1 * z ** -0.125 * c + C2 * z ** -0.125 * s
    x = (-0.5 / math.sqrt(z)
         - (C1 / 8 * z ** -1.125 - math.sqrt(2.0) * C2 * z ** 0.125) * c
         - (C2 / 8 * z ** -1.125 + math.sqrt(2.0) * C1 * z ** 0.125) * s)
    if params.order >= 1:
        y -= 0.125 * z ** -2
        x += 0.25 * z ** -3
    return P1State(x, y, z)


def regularize(p):
    """Map ``(x2, y2, z2)`` with ``y2 > 0`` to ``(eta, xi, tau)``.

    ``eta`` takes the sign of ``x2``, which makes ``eta`` pass through zero
    increasingly in ``tau`` at a pole approached from larger ``z2``.

    Raises
    ------
    BranchViolation
        If ``y2 <= 0``, where ``eta`` would not be real.
    """
    if not p.y2 > 0:
        raise BranchViolation(f"y2={p.y2} must be positive to regularize")
    k2 = KAPPA * KAPPA
    eta = math.sqrt(-KAPPA ** 3 / p.y2)
    if p.x2 < 0:
        eta = -eta
    tau = p.z2 / KAPPA
    e3 = eta ** 3
    xi = (2 * k2 / e3 + 0.5 * k2 * tau * eta + 0.5 * k2 * eta * eta - p.x2) / (k2 * e3)
    return RegularizedState(eta, xi, tau)


def deregularize(r):
    """Inverse of :func:`regularize`.

    Raises
    ------
    PoleAt
        If ``eta == 0``.
    """
    if r.eta == 0:
        raise PoleAt(f"eta = 0 is a pole (z2 = {KAPPA * r.tau})")
    k2 = KAPPA * KAPPA
    e = r.eta
    x2 = 2 * k2 / e ** 3 + 0.5 * k2 * r.tau * e + 0.5 * k2 * e * e - k2 * e ** 3 * r.xi
    y2 = -KAPPA ** 3 / (e * e)
    return P1State(x2, y2, KAPPA * r.tau)


def asymptotic_residual(params, z2):
    """ODE residual of the truncated series at ``z2`` relative to ``z2``.

    Uses ``|dx/dz - (y^2 - z)| + |dy/dz - x|`` with derivatives of the
    series taken by central differences; the tritronquee at order 0 gives
    ``z^(-3/2) / 4`` before normalization.
    """
    z = float(z2)
    h = 1e-4 * z
    a, b = asymptotic_eval(params, z + h), asymptotic_eval(params, z - h)
    p = asymptotic_eval(params, z)
    dx = (a.x2 - b.x2) / (2 * h)
    dy = (a.y2 - b.y2) / (2 * h)
    return (abs(dx - (p.y2 ** 2 - z)) + abs(dy - p.x2)) / z


def painleve_field():
    """Compiled ``(z - y^2, -x, -1)`` on ``(x2, y2, z2)``."""
    return BuiltinField(kern.PAINLEVE, (0.0,), "painleve")


def regularized_field():
    """Compiled regularized system on ``(eta, xi, tau)``."""
    return BuiltinField(kern.PAINLEVE_REG, (0.0,), "painleve-regularized")


def regularized_rhs(eta, xi, tau):
    """``(d eta/d tau, d xi/d tau)`` of the regularized system."""
    e = eta
    deta = 1 + tau / 4 * e ** 4 + e ** 5 / 4 - e ** 6 * xi / 2
    dxi = (tau ** 2 * e / 8 + 3 * tau * e ** 2 / 8 - (tau * xi - 0.25) * e ** 3
           - 1.25 * e ** 4 * xi + 1.5 * e ** 5 * xi ** 2)
    return deta, dxi


def _pcfg(cfg):
    return cfg or IntegratorConfig(rel_tol=1e-13, abs_tol=1e-14, max_time=200.0)


def find_pole(start, direction="decreasing_z", cfg=None, y_switch=DEFAULT_SWITCH,
              horizon=None):
    """Locate the first pole met from ``start`` in the given direction.

    The solution is followed in ``(x2, y2, z2)`` until ``y2`` reaches
    ``y_switch``, then in regularized coordinates until ``eta`` vanishes.

    Parameters
    ----------
    start : P1State
    direction : {'decreasing_z', 'increasing_z'}
    cfg : IntegratorConfig, optional
    y_switch : float
        Level of ``y2`` where the regularized system takes over.
    horizon : float, optional
        Largest ``|z2 - start.z2|`` searched; defaults to ``|z2| + 40``.

    Returns
    -------
    PoleResult
        ``branch_data`` holds the regularized state at the switch.

    Raises
    ------
    NoPoleFound, BranchViolation
    """
    if direction not in ("decreasing_z", "increasing_z"):
        raise ValueError("direction must be 'decreasing_z' or 'increasing_z'")
    if horizon is None:
        horizon = abs(start.z2) + 40.0
    cfg = _pcfg(cfg).with_(max_time=horizon)
    fwd = direction == "decreasing_z"
    tdir = "forward" if fwd else "backward"
    p = start
    if p.y2 < y_switch:
        # rising y2 in the direction of travel
        orient = "rising" if fwd else "falling"
        try:
            hit = integrate_to_event(painleve_field(), p.as_array(), 0.0, tdir,
                                     LinearEvent((0.0, 1.0, 0.0), y_switch), orient, cfg)
        except (NoEvent, Divergence) as exc:
            raise NoPoleFound(f"y2 never reached {y_switch} within horizon {horizon}") from exc
        p = P1State(*hit.y)
    r0 = regularize(p)
    # z decreasing <=> tau increasing since kappa < 0
    rdir = "forward" if fwd else "backward"
    rcfg = cfg.with_(max_time=max(1.0, 2.0 * abs(r0.eta) + 1.0))
    try:
        hit, traj = integrate_to_event(regularized_field(), r0.as_array(), r0.tau, rdir,
                                       LinearEvent((1.0, 0.0, 0.0), 0.0), "any", rcfg, record=True)
    except (NoEvent, Divergence) as exc:
        raise NoPoleFound("eta did not cross zero") from exc
    tau_root = float(hit.y[2])
    return PoleResult(KAPPA * tau_root, abs(float(hit.y[0])),
                      {"switch": r0, "xi_at_pole": float(hit.y[1])}, traj, p)


def compute_omega(z_init_list=(20.0, 40.0, 80.0), order=1, cfg=None):
    """First real pole of the tritronquee solution.

    Each ``z_init`` seeds :func:`find_pole` with the truncated expansion; the
    two largest seeds are Richardson-extrapolated assuming the seed error
    decays like a power of ``z_init`` set by the truncation order.

    Returns
    -------
    omega : float
    table : list of dict
        Per-seed ``z_init``, pole and residual, plus the spread.
    """
    zs = sorted((float(z) for z in z_init_list), reverse=True)
    if any(z < VALIDITY_Z for z in zs):
        raise OutOfValidity("all z_init must be >= 10")
    params = AsymptoticParams(order=order)
    rows = []
    for z in zs:
        res = find_pole(asymptotic_eval(params, z), "decreasing_z", cfg,
                        horizon=z + 20.0)
        rows.append({"z_init": z, "z0": res.z0, "residual": res.refinement_residual})
    z0 = np.array([r["z0"] for r in rows])
    spread = float(z0.max() - z0.min()) if len(z0) > 1 else 0.0
    if len(rows) >= 2:
        # seed error ~ z^-p: neglected series term over the oscillatory amplitude z^(-1/8)
        p = (9.0 / 2.0 - 1.0 / 8.0) if order == 1 else (2.0 - 1.0 / 8.0)
        za, zb = rows[1]["z_init"], rows[0]["z_init"]
        wa, wb = za ** -p, zb ** -p
        omega = (wa * rows[0]["z0"] - wb * rows[1]["z0"]) / (wa - wb)
    else:
        omega = rows[0]["z0"]
    for r in rows:
        r["spread"] = spread
    return float(omega), rows


def laurent_fit(pole, s_range=(0.02, 0.4), n=60):
    """Fit ``y2 = A s^-p + B s^2 + C s^3 + D s^4`` with ``s = |z2 - z0|``.

    Samples come from the regularized trajectory stored in ``pole`` on the
    side the pole was approached from.

    Returns
    -------
    dict
        ``order`` (p), ``coefficient`` (A), ``quadratic`` (B), ``cubic`` (C),
        ``quartic`` (D), ``z0`` and the largest fit residual.
    """
    tr = pole.trajectory
    z0 = pole.z0
    tau0 = z0 / KAPPA
    side = 1.0 if tr.t_start < tau0 else -1.0
    s_max = abs(tau0 - tr.t_start) * abs(KAPPA)
    if s_range[1] > s_max:
        raise OutOfValidity(f"s up to {s_range[1]} requested, trajectory covers {s_max:.3g}")
    s = np.linspace(s_range[0], s_range[1], n)
    taus = tau0 - side * s / abs(KAPPA)
    y = -KAPPA ** 3 / tr(taus)[:, 0] ** 2

    def model(ss, A, pw, B, C, D):
        return A * ss ** (-pw) + B * ss ** 2 + C * ss ** 3 + D * ss ** 4

    popt, _ = curve_fit(model, s, y, p0=(6.0, 2.0, z0 / 10, 1 / 6, 0.0), maxfev=20000)
    resid = float(np.max(np.abs(model(s, *popt) - y)))
    return {"z0": z0, "coefficient": float(popt[0]), "order": float(popt[1]),
            "quadratic": float(popt[2]), "cubic": float(popt[3]), "quartic": float(popt[4]),
            "residual": resid}


def pole_time_series(s, eta0, xi0):
    """Small-``eta0`` expansion of the pole time from ``(eta0, xi0)`` at ``tau = s``."""
    return s - eta0 + s / 20 * eta0 ** 5 + eta0 ** 6 / 30 - xi0 / 14 * eta0 ** 7


def pole_time(s, eta0, xi0, dps=None):
    """Time ``tau1`` where ``eta`` vanishes, starting from ``(eta0, xi0)`` at ``s``.

    Parameters
    ----------
    dps : int, optional
        If given, solve with a Taylor-series integrator in that many decimal
        digits (mpmath); otherwise use the double precision integrator.
    """
    if dps is None:
        cfg = IntegratorConfig(rel_tol=1e-14, abs_tol=1e-16, max_time=10.0)
        direction = "backward" if eta0 > 0 else "forward"
        hit = integrate_to_event(regularized_field(), [eta0, xi0, s], s, direction,
                                 LinearEvent((1.0, 0.0, 0.0), 0.0), "any", cfg)
        return float(hit.y[2])
    import mpmath as mp
    with mp.workdps(dps):
        s_m, e_m, x_m = mp.mpf(s), mp.mpf(eta0), mp.mpf(xi0)

        # eta is monotone near the pole; follow eta = eta0 (1 - u) for u in [0, 1]
        def rhs(u, w):
            tau, xi = w
            de, dx = regularized_rhs(e_m * (1 - u), xi, tau)
            return [-e_m / de, -e_m * dx / de]

        sol = mp.odefun(rhs, 0, [s_m, x_m], tol=mp.mpf(10) ** (-dps + 5), degree=30)
        return sol(mp.mpf(1))[0]


def tritronquee_crossing(level, z_init=80.0, order=1, cfg=None):
    """``z2`` where the tritronquee first rises through ``y2 = level``."""
    cfg = _pcfg(cfg).with_(max_time=z_init + 20.0, divergence_bound=1e12)
    p = asymptotic_eval(AsymptoticParams(order=order), z_init)
    hit = integrate_to_event(painleve_field(), p.as_array(), 0.0, "forward",
                             LinearEvent((0.0, 1.0, 0.0), float(level)), "rising", cfg)
    return float(hit.y[2])


def pole_table(z_init=20.0, dx=(-2e-4, -1e-4, 0.0, 1e-4, 2e-4), dy=(0.0,), order=1, cfg=None):
    """Pole location for perturbed tritronquee data at ``z_init``.

    Returns
    -------
    list of dict
        Rows with ``dx0``, ``dy0``, ``x0``, ``y0``, ``z0``.
    """
    base = asymptotic_eval(AsymptoticParams(order=order), z_init)
    rows = []
    for b in dy:
        for a in dx:
            st = P1State(base.x2 + a, base.y2 + b, base.z2)
            res = find_pole(st, "decreasing_z", cfg, horizon=z_init + 20.0)
            rows.append({"dx0": a, "dy0": b, "x0": st.x2, "y0": st.y2, "z0": res.z0})
    return rows
