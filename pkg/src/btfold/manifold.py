"""Critical manifold, fold points, reduced slow flow and jump orbits.

The critical manifold is the zero set of the fast field ``(f1, f2)``; it is
traced as a graph over ``z`` by a secant predictor and Newton corrector.
"""
import csv
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import (Divergence, NewtonDivergence, NoDeparture, NoEvent, NoFoldInBracket,
                     NotBTFold, SignChange, SingularJacobian, Timeout)
from .models import BasePoint, Params
from .ode_core import IntegratorConfig, integrate, integrate_to_event

__all__ = ["ManifoldSample", "CriticalBranch", "FoldPoint", "JumpOrbit", "classify",
           "trace_branch", "locate_fold", "reduced_slow_flow", "jump_orbit",
           "equilibrium", "branch_to_csv", "FOLD_TOL", "NEWTON_TOL", "BASIN_TOL", "CUSP_OFFSET"]

FOLD_TOL = 1e-8
NEWTON_TOL = 1e-11
BASIN_TOL = 0.05
CUSP_OFFSET = 1e-6
MIN_DZ = 1e-6
ESCAPE_RADIUS = 0.05

KINDS = ("StableFocus", "StableNode", "UnstableFocus", "UnstableNode", "Saddle", "Degenerate")


@dataclass(frozen=True)
class ManifoldSample:
    point: BasePoint
    eigenvalues: tuple
    kind: str


@dataclass
class CriticalBranch:
    samples: List[ManifoldSample]
    delta: float
    label: str
    stopped: tuple = (False, False)

    @property
    def z(self):
        return np.array([s.point.z for s in self.samples])

    @property
    def points(self):
        return np.array([s.point.as_array() for s in self.samples])


@dataclass(frozen=True)
class FoldPoint:
    point: BasePoint
    delta: float
    bt_certificate: tuple
    is_bt: bool


def classify(eigs, fold_tol=FOLD_TOL):
    """Stability type of a 2x2 fast Jacobian from its eigenvalues."""
    l1, l2 = complex(eigs[0]), complex(eigs[1])
    det = (l1 * l2).real
    remax = max(l1.real, l2.real)
    if abs(det) < fold_tol or abs(remax) < fold_tol:
        return "Degenerate"
    if abs(l1.imag) > 0:
        return "StableFocus" if remax < 0 else "UnstableFocus"
    if det < 0:
        return "Saddle"
    return "StableNode" if remax < 0 else "UnstableNode"


def _sample(sys, delta, xy, z, fold_tol):
    J = sys.fast_jacobian(xy[0], xy[1], z, 0.0, delta)
    eigs = np.linalg.eigvals(J)
    eigs = tuple(sorted((complex(e) for e in eigs), key=lambda c: (c.real, c.imag)))
    return ManifoldSample(BasePoint(float(xy[0]), float(xy[1]), float(z)), eigs, classify(eigs, fold_tol))


def _newton_xy(sys, delta, xy, z, tol=NEWTON_TOL, max_iter=30):
    xy = np.array(xy, dtype=float)
    for _ in range(max_iter):
        F = np.array(sys.fast(xy[0], xy[1], z, 0.0, delta), dtype=float)
        if np.max(np.abs(F)) <= tol:
            return xy
        J = sys.fast_jacobian(xy[0], xy[1], z, 0.0, delta)
        if abs(np.linalg.det(J)) < 1e-14:
            raise SingularJacobian(f"fast Jacobian singular at {xy}, z={z}")
        xy = xy - np.linalg.solve(J, F)
        if not np.all(np.isfinite(xy)):
            break
    F = np.array(sys.fast(xy[0], xy[1], z, 0.0, delta), dtype=float)
    if np.all(np.isfinite(F)) and np.max(np.abs(F)) <= tol:
        return xy
    raise NewtonDivergence(f"corrector failed at z={z}")


def _label(samples):
    kinds = {s.kind for s in samples}
    side = "plus" if np.mean([s.point.y for s in samples]) < 0 else "minus"
    if kinds <= {"StableFocus", "StableNode"}:
        return f"S_a_{side}"
    if kinds <= {"Saddle"}:
        return f"S_r_{side}"
    return "other"


def trace_branch(sys, delta, seed, z_range, step=0.05, fold_tol=FOLD_TOL, on_fail="raise"):
    """Continue the critical manifold in ``z`` across ``z_range``.

    Parameters
    ----------
    sys : FastSlowSystem
    delta : float
    seed : BasePoint
        Approximate manifold point with ``z`` inside ``z_range``.
    z_range : (float, float)
    step : float
        Initial continuation step; halved on corrector failure down to 1e-6.
    on_fail : {'raise', 'stop'}
        Whether a failing corrector (typically at a fold) raises
        ``NewtonDivergence`` or ends the branch there.

    Returns
    -------
    CriticalBranch
        Samples ordered by increasing ``z``.
    """
    z_lo, z_hi = sorted(map(float, z_range))
    if not (z_lo <= seed.z <= z_hi):
        raise ValueError("seed z outside z_range")
    F0 = np.array(sys.fast(seed.x, seed.y, seed.z, 0.0, delta), dtype=float)
    if np.max(np.abs(F0)) >= 0.1:
        raise ValueError("seed too far from the critical manifold")
    xy0 = _newton_xy(sys, delta, (seed.x, seed.y), seed.z)
    det_sign = np.sign(np.linalg.det(sys.fast_jacobian(xy0[0], xy0[1], seed.z, 0.0, delta)))
    halves = []
    stopped = []
    for sgn, z_end in ((-1.0, z_lo), (1.0, z_hi)):
        pts = [(seed.z, xy0)]
        dz = step
        hit_wall = False
        while sgn * (z_end - pts[-1][0]) > 1e-14:
            z_prev, xy_prev = pts[-1]
            dz_try = min(dz, abs(z_end - z_prev))
            z_new = z_prev + sgn * dz_try
            if len(pts) >= 2:
                slope = (pts[-1][1] - pts[-2][1]) / (pts[-1][0] - pts[-2][0])
                guess = xy_prev + slope * (z_new - z_prev)
            else:
                guess = xy_prev
            try:
                xy = _newton_xy(sys, delta, guess, z_new)
                # guard against jumping to another branch
                det = np.linalg.det(sys.fast_jacobian(xy[0], xy[1], z_new, 0.0, delta))
                if np.sign(det) != det_sign or np.linalg.norm(xy - guess) > 0.25:
                    raise NewtonDivergence("branch switch")
                pts.append((z_new, xy))
                dz = min(step, 1.5 * dz_try)
            except (NewtonDivergence, SingularJacobian) as exc:
                dz = dz_try / 2
                if dz < MIN_DZ:
                    if on_fail == "raise":
                        raise NewtonDivergence(
                            f"continuation stalled at z={z_prev:.10g}; a fold is likely nearby") from exc
                    hit_wall = True
                    break
        halves.append(pts)
        stopped.append(hit_wall)
    lo_pts = halves[0][::-1]
    hi_pts = halves[1][1:]
    samples = [_sample(sys, delta, xy, z, fold_tol) for z, xy in lo_pts + hi_pts]
    return CriticalBranch(samples, float(delta), _label(samples), tuple(stopped))


def _det_trace(sys, delta, u):
    J = sys.fast_jacobian(u[0], u[1], u[2], 0.0, delta)
    return float(np.linalg.det(J)), float(np.trace(J))


def locate_fold(sys, delta, bracket, fold_tol=FOLD_TOL, max_iter=40):
    """Solve ``f1 = f2 = det(J) = 0`` between two manifold points.

    Parameters
    ----------
    sys : FastSlowSystem
    delta : float
    bracket : (BasePoint, BasePoint)
        Points on the branch on both sides of the fold (``det J`` differs in
        sign) or with one of them already close to it.

    Returns
    -------
    FoldPoint
    """
    a, b = (p.as_array() for p in bracket)
    da, _ = _det_trace(sys, delta, a)
    db, _ = _det_trace(sys, delta, b)
    if np.sign(da) == np.sign(db) and min(abs(da), abs(db)) > 1e-3:
        raise NoFoldInBracket(f"det J has the same sign at both ends ({da:.3g}, {db:.3g})")

    def G(u):
        f1, f2 = sys.fast(u[0], u[1], u[2], 0.0, delta)
        return np.array([f1, f2, _det_trace(sys, delta, u)[0]], dtype=float)

    # bisection on det along the chord (projected to the manifold) for a start point
    u = 0.5 * (a + b)
    lo, hi = a, b
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        try:
            xy = _newton_xy(sys, delta, mid[:2], mid[2], tol=1e-10)
            mid = np.array([xy[0], xy[1], mid[2]])
        except (NewtonDivergence, SingularJacobian):
            pass
        dm = _det_trace(sys, delta, mid)[0]
        if np.sign(dm) == np.sign(da):
            lo = mid
        else:
            hi = mid
        u = mid
        if np.linalg.norm(hi - lo) < 1e-3:
            break
    for _ in range(max_iter):
        g = G(u)
        if np.max(np.abs(g)) < 1e-15:
            break
        J = np.empty((3, 3))
        for k in range(3):
            h = 1e-7 * (1 + abs(u[k]))
            up = u.copy()
            um = u.copy()
            up[k] += h
            um[k] -= h
            J[:, k] = (G(up) - G(um)) / (2 * h)
        try:
            du = np.linalg.solve(J, g)
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergence("extended system is singular") from exc
        u = u - du
        if np.max(np.abs(du)) < 1e-15 * (1 + np.max(np.abs(u))):
            break
    g = G(u)
    if not np.all(np.isfinite(g)) or np.max(np.abs(g)) > 1e-10:
        raise NewtonDivergence(f"fold Newton did not converge (residual {np.max(np.abs(g)):.3g})")
    det, tr = _det_trace(sys, delta, u)
    is_bt = abs(det) <= fold_tol and abs(tr) <= fold_tol
    return FoldPoint(BasePoint.from_array(u), float(delta), (det, tr), bool(is_bt))


def reduced_slow_flow(branch, sys, strict=True):
    """Slow field ``g`` with ``eps = 0`` along the samples of ``branch``.

    Returns
    -------
    z, g : ndarray
        Sample ``z`` values and the slow velocity there.

    Raises
    ------
    SignChange
        When ``strict`` and ``g`` changes sign on an attracting branch; the
        sampled values are attached.
    """
    pts = branch.points
    g = np.array([sys.slow(p[0], p[1], p[2], 0.0, branch.delta) for p in pts], dtype=float)
    z = pts[:, 2]
    if strict and branch.label.startswith("S_a") and (np.any(g > 0) and np.any(g < 0) or np.any(g == 0)):
        raise SignChange(f"slow flow changes sign on {branch.label}", values=(z, g))
    return z, g


def equilibrium(sys, delta, guess, z):
    """Equilibrium of the frozen fast field near ``guess`` at level ``z``."""
    xy = _newton_xy(sys, delta, guess[:2], z)
    return BasePoint(float(xy[0]), float(xy[1]), float(z))


@dataclass
class JumpOrbit:
    """Jump orbit leaving a fold, with convergence metadata."""

    trajectory: object
    fold: FoldPoint
    departure: np.ndarray
    offset: float
    target: Optional[BasePoint]
    converged: bool
    reason: str

    def __getattr__(self, name):
        # behave like the underlying DenseTrajectory
        return getattr(self.__dict__["trajectory"], name)

    def __call__(self, t):
        return self.trajectory(t)


def _departure(sys, delta, fold, h0):
    """Outgoing unit direction of the frozen fast flow at a cusp.

    The two separatrices of a cusp are tangent to the kernel of the nilpotent
    Jacobian; the flow is sampled on the circle of radius ``h0`` at both
    kernel directions; the direction whose orbit leaves the circle of radius
    ``10 h0`` on the same side is the outgoing one.
    """
    J = sys.fast_jacobian(fold.point.x, fold.point.y, fold.point.z, 0.0, delta)
    w, V = np.linalg.eig(J)
    k = int(np.argmin(np.abs(w)))
    v = np.real(V[:, k])
    v /= np.linalg.norm(v)
    f = sys.field(Params(0.0, delta))
    p0 = fold.point.as_array()
    out = []
    for s in (1.0, -1.0):
        d = s * v
        start = p0 + h0 * np.array([d[0], d[1], 0.0])
        ring = lambda y: float(np.hypot(y[0] - p0[0], y[1] - p0[1]) - 10.0 * h0)
        cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-3 * h0, max_time=50.0 / np.sqrt(h0))
        try:
            hit = integrate_to_event(f, start, 0.0, "forward", ring, "rising", cfg)
        except (NoEvent, Divergence):
            continue
        if np.dot(hit.y[:2] - p0[:2], d) > 0:
            out.append(d)
    if len(out) != 1:
        raise NoDeparture(f"found {len(out)} outgoing directions at offset {h0:g}")
    return out[0]


def jump_orbit(sys, delta, fold, arc_time=200.0, h0=CUSP_OFFSET, basin_tol=BASIN_TOL,
               target_guess=None, cfg=None):
    """Orbit of the frozen fast flow leaving a BT fold.

    Parameters
    ----------
    sys : FastSlowSystem
    delta : float
    fold : FoldPoint
    arc_time : float
        Integration time after the orbit has left a small disc around the fold.
    h0 : float
        Offset from the fold along the departure direction.
    basin_tol : float
        Stop once within this distance of a stable equilibrium of the frozen
        fast flow at the fold level.
    target_guess : array_like, optional
        Guess ``(x, y)`` of that equilibrium; if absent the orbit end point is
        polished into one when possible.

    Returns
    -------
    JumpOrbit
    """
    if not fold.is_bt:
        raise NotBTFold(f"fold certificate {fold.bt_certificate} is not of BT type")
    cfg = cfg or IntegratorConfig(rel_tol=1e-12, abs_tol=1e-15, divergence_bound=1e6)
    d = _departure(sys, delta, fold, h0)
    start = fold.point.as_array() + h0 * np.array([d[0], d[1], 0.0])
    f = sys.field(Params(0.0, delta))
    p0 = fold.point.as_array()
    ring = lambda y: float(np.hypot(y[0] - p0[0], y[1] - p0[1]) - ESCAPE_RADIUS)
    esc_cfg = cfg.with_(max_time=100.0 / np.sqrt(h0) + arc_time)
    try:
        _, traj = integrate_to_event(f, start, 0.0, "forward", ring, "rising", esc_cfg, record=True)
    except NoEvent as exc:
        raise NoDeparture(f"orbit did not leave the fold within radius {ESCAPE_RADIUS}") from exc
    reason = "arc_time"
    try:
        rest = integrate(f, traj.y_end, (traj.t_end, traj.t_end + arc_time), cfg)
    except Divergence as exc:
        rest = exc.trajectory
        reason = "diverged"
    if rest.n_segments:
        traj = traj.concatenate(rest)
    target = None
    converged = False
    z = fold.point.z
    guess = target_guess if target_guess is not None else traj.y_end[:2]
    try:
        eq = equilibrium(sys, delta, np.asarray(guess, float), z)
        eigs = np.linalg.eigvals(sys.fast_jacobian(eq.x, eq.y, z, 0.0, delta))
        if classify(eigs) in ("StableFocus", "StableNode") and np.linalg.norm(eq.as_array() - fold.point.as_array()) > 10 * basin_tol:
            target = eq
    except (NewtonDivergence, SingularJacobian):
        target = None
    if target is not None:
        ys = traj.ys
        dist = np.linalg.norm(ys[:, :2] - np.array([target.x, target.y]), axis=1)
        inside = np.nonzero(dist < basin_tol)[0]
        if inside.size:
            k = int(inside[0])
            traj = traj.truncate(traj.ts[k])
            converged = True
            reason = "basin"
    return JumpOrbit(traj, fold, d, h0, target, converged, reason)


def branch_to_csv(branch, path):
    """Write a branch as CSV: z, x, y, eigenvalue parts and kind."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["z", "x", "y", "re_l1", "im_l1", "re_l2", "im_l2", "kind"])
        for s in branch.samples:
            l1, l2 = s.eigenvalues
            w.writerow([repr(s.point.z), repr(s.point.x), repr(s.point.y), repr(l1.real),
                        repr(l1.imag), repr(l2.real), repr(l2.imag), s.kind])
