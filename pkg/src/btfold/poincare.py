"""Sections, return maps, periodic orbits, Lyapunov exponents and horseshoes.

Sections are axis-aligned planes crossed with a fixed orientation. Points
on a section are described by the two remaining coordinates, in increasing
axis order (``(x, z)`` for a ``y`` section).

Return maps of relaxation oscillations contract by factors like
``exp(-c/eps)``, far below what finite differences of the map can resolve.
Multiplier moduli are therefore carried as logarithms through a tangent
flow that is renormalized along the orbit, with the flow direction split off
at every renormalization.
"""
import math
from dataclasses import dataclass, field as _dc_field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import ndimage

from .errors import Divergence, NewtonDivergence, NoEvent, NoReturn, Timeout
from .models import BasePoint, Params
from .ode_core import IntegratorConfig, LinearEvent, integrate, integrate_to_event, variational_flow

__all__ = ["SectionSpec", "ReturnMapReport", "PeriodicOrbit", "MapDerivative",
           "LyapunovEstimate", "HorseshoeReport", "return_map", "return_map_2d",
           "settle", "return_map_derivative", "find_periodic_orbit", "floquet_log_moduli",
           "lyapunov_exponent", "lyapunov_max", "horseshoe_test", "winding_number",
           "inequality_margins", "map_config"]

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class SectionSpec:
    """Plane ``axis = value`` crossed with a given orientation.

    Parameters
    ----------
    axis : {'x', 'y', 'z'}
    value : float
    orientation : {'rising', 'falling'}
    window : tuple of (axis, lo, hi), optional
        Crossings outside any of these bounds are not counted as returns.
    """

    axis: str
    value: float
    orientation: str = "rising"
    window: Optional[Tuple[Tuple[str, float, float], ...]] = None

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(f"axis must be one of x, y, z, got {self.axis!r}")
        if self.orientation not in ("rising", "falling"):
            raise ValueError("orientation must be 'rising' or 'falling'")
        if self.window is not None:
            w = tuple((str(a), float(lo), float(hi)) for a, lo, hi in self.window)
            for a, lo, hi in w:
                if a not in _AXES or not lo < hi:
                    raise ValueError(f"bad window entry {(a, lo, hi)}")
            object.__setattr__(self, "window", w)

    @property
    def index(self):
        return _AXES[self.axis]

    @property
    def free(self):
        """Indices of the two in-section coordinates."""
        return [i for i in range(3) if i != self.index]

    def in_window(self, y):
        if self.window is None:
            return True
        return all(lo <= y[_AXES[a]] <= hi for a, lo, hi in self.window)

    def coords(self, p):
        """In-section coordinates of a 3-vector or BasePoint."""
        y = p.as_array() if isinstance(p, BasePoint) else np.asarray(p, float)
        return y[self.free].copy()

    def point(self, u):
        """3-vector on the plane with in-section coordinates ``u``."""
        y = np.empty(3)
        y[self.index] = self.value
        y[self.free] = u
        return y

    def flipped(self):
        o = "falling" if self.orientation == "rising" else "rising"
        return SectionSpec(self.axis, self.value, o, self.window)


@dataclass
class ReturnMapReport:
    start: BasePoint
    image: BasePoint
    flight_time: float
    intermediate_crossings: int
    params: Params
    trajectory: Optional[object] = None

    def to_dict(self):
        return {"start": [self.start.x, self.start.y, self.start.z],
                "image": [self.image.x, self.image.y, self.image.z],
                "flight_time": self.flight_time,
                "intermediate_crossings": self.intermediate_crossings,
                "eps": self.params.eps, "delta": self.params.delta}


def map_config(params, cfg=None):
    """Default integrator settings for return maps at ``params``.

    The time limit covers about five relaxation loops.
    """
    if cfg is not None:
        return cfg
    return IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13,
                            max_time=50.0 / max(params.eps, 1e-6))


def _crossing_filter(section, f, counter, min_time=0.0):
    want = 1.0 if section.orientation == "rising" else -1.0

    def accept(t, y):
        v = f(y)[section.index]
        ok = v * want > 0 and section.in_window(y) and t >= min_time
        if not ok:
            counter[0] += 1
        return ok
    return accept


def return_map(sys, section, p, params, cfg=None, record=False, min_flight_time=0.0):
    """Follow the orbit of ``p`` to its next valid crossing of ``section``.

    Parameters
    ----------
    sys : FastSlowSystem
    section : SectionSpec
    p : BasePoint or array_like
        Must lie on the section plane within ``1e-10``.
    params : Params
    cfg : IntegratorConfig, optional
    record : bool
        Keep the dense trajectory in the report.
    min_flight_time : float
        Crossings earlier than this are not returns; skips the ringing of
        weakly damped jumps back through a section placed just past a fold.

    Returns
    -------
    ReturnMapReport
        ``intermediate_crossings`` counts plane crossings rejected for their
        orientation or window on the way.

    Raises
    ------
    NoReturn
        No valid crossing within ``cfg.max_time``.
    Divergence
    """
    y0 = p.as_array() if isinstance(p, BasePoint) else np.asarray(p, dtype=float)
    if abs(y0[section.index] - section.value) > 1e-10:
        raise ValueError("start point is not on the section")
    y0 = y0.copy()
    y0[section.index] = section.value
    cfg = map_config(params, cfg)
    f = sys.field(params)
    count = [0]
    ev = LinearEvent.axis(section.index, section.value, 3)
    try:
        out = integrate_to_event(f, y0, 0.0, "forward", ev, "any", cfg, skip_initial=True,
                                 record=record,
                                 accept=_crossing_filter(section, f, count, min_flight_time))
    except NoEvent as exc:
        raise NoReturn(f"no return within t={cfg.max_time:g}") from exc
    hit, traj = out if record else (out, None)
    y = np.array(hit.y)
    y[section.index] = section.value
    return ReturnMapReport(BasePoint.from_array(y0), BasePoint.from_array(y), float(hit.t),
                           count[0], params, traj)


def return_map_2d(sys, section, u, params, cfg=None, min_flight_time=0.0):
    """Return map in in-section coordinates; returns ``(u_image, flight_time)``."""
    r = return_map(sys, section, section.point(u), params, cfg, min_flight_time=min_flight_time)
    return section.coords(r.image), r.flight_time


def settle(sys, section, p, params, n_returns=20, cfg=None, min_flight_time=0.0):
    """Iterate the return map ``n_returns`` times to discard transients.

    Returns
    -------
    list of ReturnMapReport
    """
    reports = []
    y = p.as_array() if isinstance(p, BasePoint) else np.asarray(p, dtype=float)
    for _ in range(n_returns):
        r = return_map(sys, section, y, params, cfg, min_flight_time=min_flight_time)
        reports.append(r)
        y = r.image.as_array()
    return reports


class MapDerivative(NamedTuple):
    """Central difference Jacobian of a 2D map with a step-halving error."""

    matrix: np.ndarray
    error: np.ndarray
    step: np.ndarray


def _fd_jacobian(F, u, h):
    J = np.empty((2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h[k]
        J[:, k] = (F(u + e) - F(u - e)) / (2 * h[k])
    return J


def return_map_derivative(sys, section, p, params, h_fd=1e-6, cfg=None, scale=None,
                          min_flight_time=0.0):
    """Central difference derivative of the return map at ``p``.

    Parameters
    ----------
    h_fd : float
        Step relative to ``scale``.
    scale : array_like of 2, optional
        Coordinate scales; defaults to ``1 + |u|``.
    min_flight_time : float
        Passed to `return_map`.

    Returns
    -------
    MapDerivative
        ``error`` is ``|J(h) - J(h/2)|`` entrywise.
    """
    u = section.coords(p)
    scale = np.abs(u) + 1.0 if scale is None else np.asarray(scale, float)
    h = h_fd * scale

    def F(v):
        return return_map_2d(sys, section, v, params, cfg, min_flight_time)[0]

    J1 = _fd_jacobian(F, u, h)
    J2 = _fd_jacobian(F, u, h / 2)
    return MapDerivative(J2, np.abs(J1 - J2), h)


# ---------------------------------------------------------------------------
# tangent flow with the flow direction split off
# ---------------------------------------------------------------------------

def _complete_basis(v):
    """Orthonormal basis with first column along ``v``."""
    n = v.size
    A = np.eye(n)
    A[:, 0] = v
    Q, R = np.linalg.qr(A)
    if R[0, 0] < 0:
        Q = -Q
    return Q


def _tangent_steps(f, jac, y0, Q0, t_total, interval, cfg, keep_flow):
    """Propagate columns of ``Q0`` along the orbit with QR renormalization.

    Yields ``(t, y, Q, R)`` after each interval. With ``keep_flow`` the first
    column is reset to the flow direction before the factorization, which
    removes its neutral growth from the transverse columns.
    """
    n_int = max(1, int(math.ceil(t_total / interval - 1e-9)))
    dt = t_total / n_int
    y = np.asarray(y0, float)
    Q = Q0
    t = 0.0
    k = Q0.shape[1]
    for _ in range(n_int):
        M0 = np.zeros((y.size, y.size))
        M0[:, :k] = Q
        y, M = variational_flow(f, jac, y, (0.0, dt), cfg, M0=M0)
        W = M[:, :k]
        if keep_flow:
            fv = np.asarray(f(y), float)
            nf = np.linalg.norm(fv)
            if nf > 0:
                # transverse parts orthogonal to the new flow direction
                u = fv / nf
                W = np.column_stack([u, W[:, 1:] - np.outer(u, u @ W[:, 1:])])
        Q, R = np.linalg.qr(W)
        s = np.sign(np.diag(R))
        s[s == 0] = 1.0
        Q = Q * s
        R = s[:, None] * R
        t += dt
        yield t, y, Q, R


class LyapunovEstimate(NamedTuple):
    exponent: float
    error: float
    windows: np.ndarray


def lyapunov_exponent(field, jacobian, y0, horizon, renorm_interval, transverse=True,
                      cfg=None, n_windows=None):
    """Largest Lyapunov exponent by tangent-vector renormalization.

    Parameters
    ----------
    field : callable or BuiltinField
    jacobian : callable or None
        ``None`` selects the compiled tangent system of built-in fields.
    y0 : array_like
    horizon : float
        Total averaging time.
    renorm_interval : float
    transverse : bool
        Split off the flow direction, so a periodic orbit gives its leading
        multiplier's ``log|lambda| / period`` instead of zero. Ignored at
        equilibria.
    n_windows : int, optional
        Number of consecutive windows for the error bar; default 6.

    Returns
    -------
    LyapunovEstimate
        ``error`` is half the range of the last three window estimates.
    """
    cfg = cfg or IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, max_time=2 * renorm_interval + 1)
    y0 = np.asarray(y0, float)
    n = y0.size
    fv = np.asarray(field(y0), float)
    use_flow = transverse and np.linalg.norm(fv) > 1e-12 and n > 1
    if use_flow:
        Q0 = _complete_basis(fv / np.linalg.norm(fv))[:, :2]
    else:
        Q0 = np.zeros((n, 1))
        Q0[0, 0] = 1.0
        Q0[:, 0] = 1.0 / math.sqrt(n)
    col = 1 if use_flow else 0
    n_windows = n_windows or 6
    logs = []
    for t, y, Q, R in _tangent_steps(field, jacobian, y0, Q0, horizon, renorm_interval, cfg, use_flow):
        logs.append(math.log(abs(R[col, col])))
    logs = np.array(logs)
    dt = horizon / len(logs)
    total = logs.sum() / horizon
    w = np.array_split(logs, min(n_windows, len(logs)))
    win = np.array([c.sum() / (len(c) * dt) for c in w])
    last = win[-3:]
    err = 0.5 * float(last.max() - last.min()) if len(last) > 1 else float("inf")
    return LyapunovEstimate(float(total), err, win)


def lyapunov_max(sys, p0, params, horizon, renorm_interval, transient=0.0, cfg=None):
    """Largest Lyapunov exponent transverse to the flow for a fast-slow system.

    Parameters
    ----------
    sys : FastSlowSystem
    p0 : BasePoint or array_like
    params : Params
    horizon, renorm_interval : float
    transient : float
        Time integrated and discarded before averaging.
    """
    f = sys.field(params)
    jac = None if sys.code is not None else sys.jacobian(params)
    y0 = p0.as_array() if isinstance(p0, BasePoint) else np.asarray(p0, float)
    if transient > 0:
        y0 = integrate(f, y0, (0.0, transient), IntegratorConfig(
            rel_tol=1e-10, abs_tol=1e-12, max_time=transient + 1)).y_end
    return lyapunov_exponent(f, jac, y0, horizon, renorm_interval, True, cfg)


def _eig_log_moduli(logscale, B):
    """Log moduli of the eigenvalues of ``exp(logscale) * B`` for 2x2 ``B``."""
    lam = np.linalg.eigvals(B)
    det = abs(np.linalg.det(B))
    big = max(abs(lam[0]), abs(lam[1]))
    lb = math.log(big) + logscale
    # the small one from the determinant keeps its relative accuracy
    ls = (math.log(det) - math.log(big) + logscale) if det > 0 else -math.inf
    return np.array([lb, ls]), lam


def floquet_log_moduli(sys, point, period, params, renorm_interval=10.0, n_periods=1, cfg=None):
    """Log moduli of the two nontrivial Floquet multipliers of a periodic orbit.

    The tangent flow is propagated with a basis whose first vector follows
    the flow; the remaining 2x2 block of the accumulated triangular factors,
    mapped back to the starting basis, is the linearized return map up to a
    change of coordinates on the section.

    Returns
    -------
    log_moduli : ndarray, shape (2,)
        Sorted in decreasing order.
    ratio : complex ndarray, shape (2,)
        Multipliers divided by ``exp(log_scale)``; their arguments are the
        multiplier phases.
    log_det : float
        ``log |lambda1 lambda2|`` from the triangular factors.
    """
    f = sys.field(params)
    jac = None if sys.code is not None else sys.jacobian(params)
    y0 = point.as_array() if isinstance(point, BasePoint) else np.asarray(point, float)
    fv = np.asarray(f(y0), float)
    Q0 = _complete_basis(fv / np.linalg.norm(fv))
    cfg = cfg or IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, max_time=4 * renorm_interval + 10)
    out = None
    yy, Q = y0, Q0
    for _ in range(n_periods):
        B = np.eye(2)
        logscale = 0.0
        for t, yy, Q, R in _tangent_steps(f, jac, yy, Q, period, renorm_interval, cfg, True):
            B = R[1:, 1:] @ B
            s = np.abs(B).max()
            B /= s
            logscale += math.log(s)
        # express the final transverse basis in the starting one
        U = Q0[:, 1:].T @ Q[:, 1:]
        Bt = U @ B
        logs, lam = _eig_log_moduli(logscale, Bt)
        out = (np.sort(logs)[::-1], lam, logscale + math.log(abs(np.linalg.det(Bt))))
        Q0 = Q
    return out


@dataclass
class PeriodicOrbit:
    """Fixed point of a return map with its stability data.

    ``multipliers`` are the Floquet multipliers reconstructed from the
    log-moduli and phases of the renormalized tangent flow (underflowing
    moduli appear as 0). ``fd_multipliers`` are the eigenvalues of the
    finite-difference Jacobian of the section map, which resolve only
    multipliers above the finite-difference noise.
    """

    section_point: BasePoint
    period: float
    multipliers: np.ndarray
    residual: float
    log_abs_multipliers: np.ndarray = None
    fd_multipliers: np.ndarray = None
    fd_jacobian: np.ndarray = None
    liouville_log_det: float = float("nan")
    residual_history: List[float] = _dc_field(default_factory=list)
    iterations: int = 0

    def to_dict(self):
        return {"section_point": [self.section_point.x, self.section_point.y, self.section_point.z],
                "period": self.period,
                "multipliers_abs": [float(abs(m)) for m in self.multipliers],
                "log_abs_multipliers": [float(v) for v in self.log_abs_multipliers],
                "fd_multipliers_abs": [float(abs(m)) for m in self.fd_multipliers],
                "liouville_log_det": self.liouville_log_det,
                "residual": self.residual,
                "residual_history": list(self.residual_history),
                "iterations": self.iterations}


def _liouville(sys, params, y0, period, cfg):
    # integral of the Jacobian trace along the orbit
    f = sys.field(params)
    jac = sys.jacobian(params)
    tr = integrate(f, y0, (0.0, period), cfg)
    ts = np.linspace(0.0, period, int(period * 40) + 1)
    ys = tr(ts)
    vals = np.array([np.trace(jac(y)) for y in ys])
    from scipy.integrate import simpson
    return float(simpson(vals, x=ts))


def find_periodic_orbit(sys, section, guess, params, cfg=None, h_fd=1e-6, tol=1e-9,
                        max_iter=30, renorm_interval=10.0):
    """Newton iteration on ``P(u) - u`` for the section return map ``P``.

    Parameters
    ----------
    sys : FastSlowSystem
    section : SectionSpec
    guess : BasePoint or array_like
        Point on the section inside the basin of the orbit.
    params : Params
    h_fd : float
        Relative finite-difference step for the map Jacobian.
    tol : float
        Target residual ``|P(u) - u|``.

    Raises
    ------
    NoReturn
        Orbit leaves (including escape to infinity) without returning.
    NewtonDivergence
        Residual fails to reach ``tol`` within ``max_iter`` iterations.
    """
    cfg = map_config(params, cfg).with_(rel_tol=1e-12, abs_tol=1e-14)
    u = section.coords(guess)

    def P(v):
        try:
            return return_map_2d(sys, section, v, params, cfg)
        except Divergence as exc:
            raise NoReturn("orbit escaped before returning") from exc

    hist = []
    Pu, T = P(u)
    res = float(np.linalg.norm(Pu - u))
    hist.append(res)
    it = 0
    J = None
    while res > tol:
        if it >= max_iter:
            raise NewtonDivergence(f"residual {res:.3g} after {it} iterations")
        J = _fd_jacobian(lambda v: P(v)[0], u, h_fd * (np.abs(u) + 1.0))
        A = J - np.eye(2)
        try:
            step = np.linalg.solve(A, -(Pu - u))
        except np.linalg.LinAlgError:
            step = Pu - u
        u_new = u + step
        Pn, Tn = P(u_new)
        rn = float(np.linalg.norm(Pn - u_new))
        if not rn < res:
            # fall back to plain iteration, which contracts near stable orbits
            u_new = Pu
            Pn, Tn = P(u_new)
            rn = float(np.linalg.norm(Pn - u_new))
        u, Pu, T, res = u_new, Pn, Tn, rn
        hist.append(res)
        it += 1
    if J is None:
        J = _fd_jacobian(lambda v: P(v)[0], u, h_fd * (np.abs(u) + 1.0))
    y0 = section.point(u)
    logs, lam, logdet = floquet_log_moduli(sys, y0, T, params, renorm_interval)
    # multipliers with phases from the scaled block and moduli from the logs
    ph = np.angle(lam)
    order = np.argsort(-np.abs(lam))
    mult = np.array([np.exp(logs[i]) * np.exp(1j * ph[order[i]]) for i in range(2)])
    if np.all(np.abs(mult.imag) <= 1e-12 * np.abs(mult) + 1e-300):
        mult = mult.real.astype(complex)
    liou = _liouville(sys, params, y0, T, cfg)
    return PeriodicOrbit(BasePoint.from_array(y0), float(T), mult, res, logs,
                         np.linalg.eigvals(J), J, liou, hist, it)


# ---------------------------------------------------------------------------
# horseshoe
# ---------------------------------------------------------------------------

def winding_number(points, center):
    """Winding number of a closed polyline about ``center`` by angle accumulation."""
    P = np.asarray(points, float) - np.asarray(center, float)
    ang = np.arctan2(P[:, 1], P[:, 0])
    d = np.diff(np.append(ang, ang[0]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return float(d.sum() / (2 * np.pi))


def inequality_margins(J):
    """Margins of the four hyperbolicity inequalities for a 2x2 map derivative.

    With section coordinates ``(x, z)`` and ``a = |dP1/dx|``,
    ``b = 1/|dP2/dz|``, ``c = |dP1/dz|``, ``d = |dP2/dx|`` the margins are

    ``1 - a``, ``1 - b``, ``1 - a b - 2 sqrt(c d b^2)`` and
    ``(1 - a)(1 - b) - c d b^2``.

    All four positive makes ``x`` contracting and ``z`` expanding in a
    cone-invariant way. Works on stacked arrays of shape ``(..., 2, 2)``.
    """
    J = np.asarray(J, float)
    a = np.abs(J[..., 0, 0])
    c = np.abs(J[..., 0, 1])
    d = np.abs(J[..., 1, 0])
    # a vanishing expansion gives infinite b and margins of -inf
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        b = 1.0 / np.abs(J[..., 1, 1])
        m1 = 1 - a
        m2 = 1 - b
        m3 = 1 - a * b - 2 * np.sqrt(c * d * b * b)
        m4 = 1 - (a + b) + a * b - d * c * b * b
    return np.stack([m1, m2, m3, m4], axis=-1)


@dataclass
class HorseshoeReport:
    """Outcome of a horseshoe test on a rectangle of a section.

    ``inequality_values`` holds the smallest margin of each of the four
    inequalities over the sampled points of the strips (``nan`` when no
    strips were found); ``contraction`` flags a boundary image that lies
    inside the rectangle, which includes an image collapsed to a point.
    """

    rectangle: Tuple[Tuple[float, float], Tuple[float, float]]
    boundary_image: List[np.ndarray]
    ring_detected: bool
    crossing_components: int
    strips: Optional[List[Tuple[Tuple[float, float], Tuple[float, float]]]]
    inequality_values: np.ndarray
    certified: bool
    winding: float = 0.0
    contraction: bool = False
    center: Optional[Tuple[float, float]] = None
    failed_points: int = 0
    masked_points: int = 0
    grid_margins: Optional[np.ndarray] = None

    def to_dict(self):
        return {"rectangle": [list(self.rectangle[0]), list(self.rectangle[1])],
                "ring_detected": self.ring_detected,
                "crossing_components": self.crossing_components,
                "strips": None if self.strips is None else [[list(a), list(b)] for a, b in self.strips],
                "inequality_values": [None if not np.isfinite(v) else float(v) for v in self.inequality_values],
                "certified": self.certified, "winding": self.winding,
                "contraction": self.contraction,
                "center": None if self.center is None else list(self.center),
                "failed_points": self.failed_points, "masked_points": self.masked_points}


def _map_many(sys, section, U, params, cfg, min_flight_time=0.0):
    out = np.full(U.shape, np.nan)
    for i, u in enumerate(U):
        try:
            out[i] = return_map_2d(sys, section, u, params, cfg, min_flight_time)[0]
        except (NoReturn, Divergence, Timeout):
            pass
    return out


def horseshoe_test(sys, rect, params, grid=(24, 24), section=None, center=None, cfg=None,
                   boundary_points=64, h_fd=None, min_flight_time=0.0):
    """Test a rectangle of a section for a two-strip horseshoe of the return map.

    Parameters
    ----------
    sys : FastSlowSystem
    rect : ((x_lo, x_hi), (z_lo, z_hi))
        Rectangle in the section coordinates, first interval contracting.
    params : Params
    grid : (int, int)
        Sample counts along the two sides for the preimage and inequality grid.
    section : SectionSpec
    center : (float, float), optional
        Point the image ring should surround; defaults to the rectangle centre.
    boundary_points : int
        Samples per side of the boundary polyline.
    h_fd : float, optional
        Finite-difference step relative to the rectangle size; default 1e-3
        of the grid spacing.
    min_flight_time : float
        Crossings earlier than this are ignored, see `return_map`.

    Returns
    -------
    HorseshoeReport
        ``certified`` needs a ring around ``center``, at least two full
        vertical crossings and all four margins positive at every sampled
        point of the two strips outside the masked degenerate rows.
    """
    if section is None:
        raise ValueError("a section is required")
    (xl, xh), (zl, zh) = rect
    rect = ((float(xl), float(xh)), (float(zl), float(zh)))
    nan4 = np.full(4, np.nan)
    if not (xh > xl and zh > zl):
        return HorseshoeReport(rect, [], False, 0, None, nan4, False)
    cfg = map_config(params, cfg)
    ctr = np.array(center if center is not None else ((xl + xh) / 2, (zl + zh) / 2), float)
    # boundary of the rectangle, counter-clockwise
    s = np.linspace(0, 1, boundary_points, endpoint=False)
    sides = [np.column_stack([xl + (xh - xl) * s, np.full_like(s, zl)]),
             np.column_stack([np.full_like(s, xh), zl + (zh - zl) * s]),
             np.column_stack([xh - (xh - xl) * s, np.full_like(s, zh)]),
             np.column_stack([np.full_like(s, xl), zh - (zh - zl) * s])]
    images = [_map_many(sys, section, S, params, cfg, min_flight_time) for S in sides]
    ring = np.vstack(images)
    ok = np.all(np.isfinite(ring), axis=1)
    failed = int((~ok).sum())
    wind = winding_number(ring[ok], ctr) if ok.sum() > 3 else 0.0
    ring_detected = abs(round(wind)) >= 1
    inside = bool(np.all((ring[ok, 0] >= xl) & (ring[ok, 0] <= xh)
                         & (ring[ok, 1] >= zl) & (ring[ok, 1] <= zh))) if ok.any() else False
    # preimage grid: points whose image lands back in the rectangle
    nx, nz = grid
    xs = np.linspace(xl, xh, nx)
    zs = np.linspace(zl, zh, nz)
    XX, ZZ = np.meshgrid(xs, zs, indexing="ij")
    U = np.column_stack([XX.ravel(), ZZ.ravel()])
    img = _map_many(sys, section, U, params, cfg, min_flight_time).reshape(nx, nz, 2)
    failed += int(np.isnan(img[..., 0]).sum())
    inR = ((img[..., 0] >= xl) & (img[..., 0] <= xh) & (img[..., 1] >= zl) & (img[..., 1] <= zh))
    # 8-connectivity keeps thin diagonal strips in one piece
    labels, nlab = ndimage.label(inR, structure=np.ones((3, 3), int))
    strips = []
    comps = 0
    for k in range(1, nlab + 1):
        m = labels == k
        zimg = img[..., 1][m]
        span = (zimg.max() - zimg.min()) / (zh - zl)
        # a full crossing reaches both horizontal sides up to one grid cell
        if span >= 1 - 2.0 / (nz - 1):
            comps += 1
            ii, jj = np.nonzero(m)
            strips.append((int(m.sum()), ((float(xs[ii.min()]), float(xs[ii.max()])),
                                          (float(zs[jj.min()]), float(zs[jj.max()])))))
    strips_out = None
    values = nan4
    certified = False
    masked = 0
    gm = None
    if comps >= 2:
        # the two largest strips, in grid order
        strips.sort(key=lambda t: -t[0])
        strips_out = sorted(b for _, b in strips[:2])
        hx = (h_fd or 1e-3) * (xh - xl) / (nx - 1)
        hz = (h_fd or 1e-3) * (zh - zl) / (nz - 1)
        margins = []
        for (sx, sz) in strips_out:
            sel = np.nonzero((XX >= sx[0]) & (XX <= sx[1]) & (ZZ >= sz[0]) & (ZZ <= sz[1]) & inR)
            for i, j in zip(*sel):
                u = np.array([xs[i], zs[j]])
                try:
                    F = lambda v: return_map_2d(sys, section, v, params, cfg, min_flight_time)[0]
                    J1 = _fd_jacobian(F, u, np.array([hx, hz]))
                    J2 = _fd_jacobian(F, u, np.array([hx, hz]) / 2)
                except (NoReturn, Divergence, Timeout):
                    masked += 1
                    continue
                err = np.abs(J1 - J2).max()
                if abs(J2[1, 1]) < 10 * err:
                    # degenerate expansion rows are excluded
                    masked += 1
                    continue
                margins.append(inequality_margins(J2))
        if margins:
            gm = np.array(margins)
            values = gm.min(axis=0)
            certified = bool(ring_detected and np.all(gm > 0))
    return HorseshoeReport(rect, images, bool(ring_detected), comps, strips_out, values,
                           certified, wind, inside,
                           tuple(ctr), failed, masked, gm)
