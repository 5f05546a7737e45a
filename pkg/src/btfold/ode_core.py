"""Adaptive DOP853 integration with dense output, events and tangent flows.

Two execution paths share one set of data structures:

* :class:`BuiltinField` instances run through a compiled loop
  (:mod:`btfold._kernels`). Linear events ``c . y - v`` are detected inside
  the loop so long runs never leave compiled code.
* Any other callable ``f(y) -> dy/dt`` is stepped with
  ``scipy.integrate.DOP853``. Both paths use the same tableau and step
  controller, so on identical problems they take identical steps up to
  rounding.

All event roots are polished on the dense interpolant of the bracketing step.
"""
from dataclasses import dataclass, field as _dc_field, replace
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from . import _kernels as kern
from .errors import Divergence, NoEvent, NonFinite, StepUnderflow, Timeout

__all__ = [
    "IntegratorConfig", "BuiltinField", "LinearEvent", "EventRecord", "Stats",
    "DenseTrajectory", "EventHit", "integrate", "integrate_to_event",
    "variational_flow", "ORIENTATIONS",
]

ORIENTATIONS = {"rising": kern.EV_RISING, "falling": kern.EV_FALLING, "any": kern.EV_ANY}


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and limits for one integration.

    Parameters
    ----------
    rel_tol, abs_tol : float
        Local error tolerances. ``abs_tol`` may be a per-component sequence.
    max_step : float
        Largest allowed step.
    max_time : float
        Largest allowed integration span ``|t - t0|``; exceeding it raises
        :class:`~btfold.errors.Timeout` (or ``NoEvent`` while hunting events).
    event_tol : float
        Absolute tolerance on the event function at reported roots.
    divergence_bound : float
        Max-norm of the state that signals blow-up.
    batch_steps : int
        Steps handed to the compiled loop per call.
    """

    rel_tol: float = 1e-10
    abs_tol: Union[float, tuple] = 1e-12
    max_step: float = np.inf
    max_time: float = 1e7
    event_tol: float = 1e-12
    divergence_bound: float = 1e8
    batch_steps: int = 20000

    def __post_init__(self):
        atol = np.atleast_1d(np.asarray(self.abs_tol, dtype=float))
        if isinstance(self.abs_tol, (list, np.ndarray)):
            object.__setattr__(self, "abs_tol", tuple(float(a) for a in atol))
        if not (self.rel_tol > 0 and np.all(atol > 0) and self.event_tol > 0):
            raise ValueError("tolerances must be strictly positive")
        if not np.isfinite(self.max_time) or self.max_time <= 0:
            raise ValueError("max_time must be finite and positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")

    def atol_vector(self, n):
        atol = np.asarray(self.abs_tol, dtype=float)
        if atol.ndim == 0:
            return np.full(n, float(atol))
        if atol.size != n:
            raise ValueError(f"abs_tol has {atol.size} components, state has {n}")
        return atol.copy()

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class BuiltinField:
    """A compiled vector field selected by integer code.

    Use the constructors in :mod:`btfold.models`, :mod:`btfold.painleve` and
    :mod:`btfold.blowup` rather than building these by hand.
    """

    code: int
    params: tuple
    name: str = ""

    @property
    def dim(self):
        return kern.FIELD_DIMS[self.code]

    def param_array(self):
        return np.asarray(self.params, dtype=np.float64)

    def __call__(self, y):
        y = np.ascontiguousarray(y, dtype=np.float64)
        return kern.eval_rhs(self.code, y, self.param_array())


@dataclass(frozen=True)
class LinearEvent:
    """Event function ``coeffs . y - level``; detected inside compiled loops."""

    coeffs: tuple
    level: float = 0.0

    @classmethod
    def axis(cls, index, level, dim):
        c = [0.0] * dim
        c[index] = 1.0
        return cls(tuple(c), float(level))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return y[..., : len(self.coeffs)] @ np.asarray(self.coeffs) - self.level


class EventRecord(NamedTuple):
    t: float
    state: np.ndarray
    event_id: str


@dataclass
class Stats:
    steps: int = 0
    rejected: int = 0
    rhs_evals: int = 0

    def add(self, steps, rejected, nfev):
        self.steps += int(steps)
        self.rejected += int(rejected)
        self.rhs_evals += int(nfev)


class EventHit(NamedTuple):
    t: float
    y: np.ndarray


class DenseTrajectory:
    """Piecewise polynomial solution.

    Each accepted step is one segment ``[t_old, t_old + h]`` stored as the
    DOP853 interpolant coefficients ``(y_old, F)``.

    Attributes
    ----------
    t_old, h : ndarray, shape (m,)
    y_old : ndarray, shape (m, n)
    F : ndarray, shape (m, 7, n)
    events : list of EventRecord
    stats : Stats
    """

    def __init__(self, t0, y0, t_old, h, y_old, F, events=None, stats=None):
        self.t0 = float(t0)
        self.y0 = np.array(y0, dtype=float)
        self.t_old = np.asarray(t_old, dtype=float)
        self.h = np.asarray(h, dtype=float)
        self.y_old = np.asarray(y_old, dtype=float).reshape(len(self.t_old), -1)
        self.F = np.asarray(F, dtype=float).reshape(len(self.t_old), kern.N_POWER, -1)
        self.events = list(events or [])
        self.stats = stats or Stats()

    # construction helpers -------------------------------------------------
    @classmethod
    def _from_chunks(cls, t0, y0, chunks, events, stats):
        n = len(y0)
        if chunks:
            t_old = np.concatenate([c[0] for c in chunks])
            h = np.concatenate([c[1] for c in chunks])
            y_old = np.concatenate([c[2] for c in chunks])
            F = np.concatenate([c[3] for c in chunks])
        else:
            t_old = np.empty(0)
            h = np.empty(0)
            y_old = np.empty((0, n))
            F = np.empty((0, kern.N_POWER, n))
        return cls(t0, y0, t_old, h, y_old, F, events, stats)

    # basic geometry -------------------------------------------------------
    @property
    def n_segments(self):
        return len(self.t_old)

    @property
    def direction(self):
        if self.n_segments == 0:
            return 1.0
        return 1.0 if self.h[0] > 0 else -1.0

    @property
    def t_start(self):
        return self.t0

    @property
    def t_end(self):
        if self.n_segments == 0:
            return self.t0
        return float(self.t_old[-1] + self.h[-1])

    @property
    def ts(self):
        """Step endpoint times, length ``m + 1``."""
        return np.append(self.t_old, self.t_end) if self.n_segments else np.array([self.t0])

    @property
    def ys(self):
        """States at step endpoints, shape ``(m + 1, n)``."""
        if self.n_segments == 0:
            return self.y0[None, :].copy()
        return np.vstack([self.y_old, self.y_old[-1] + self.F[-1, 0]])

    @property
    def y_end(self):
        return self.ys[-1]

    @property
    def segments(self):
        """List of ``(t_start, t_end, (y_old, F))`` tuples."""
        return [(float(a), float(a + b), (yo, f))
                for a, b, yo, f in zip(self.t_old, self.h, self.y_old, self.F)]

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        if self.direction > 0:
            k = np.searchsorted(self.t_old, t, side="right") - 1
        else:
            k = np.searchsorted(-self.t_old, -t, side="right") - 1
        return np.clip(k, 0, self.n_segments - 1)

    def __call__(self, t):
        """Evaluate the interpolant at scalar or array ``t``."""
        if self.n_segments == 0:
            raise ValueError("trajectory has no segments")
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        k = self._locate(tt)
        x = ((tt - self.t_old[k]) / self.h[k])[:, None]
        y = np.zeros((tt.size, self.y_old.shape[1]))
        for i in range(kern.N_POWER):
            y += self.F[k, kern.N_POWER - 1 - i]
            y *= x if i % 2 == 0 else (1.0 - x)
        y += self.y_old[k]
        return y[0] if scalar else y

    def sample(self, num):
        """States at ``num`` equally spaced times over the whole span."""
        t = np.linspace(self.t_start, self.t_end, num)
        return t, self(t)

    def concatenate(self, other):
        """Join ``other``, which must start where this trajectory ends."""
        if abs(other.t0 - self.t_end) > 1e-9 * (1 + abs(self.t_end)):
            raise ValueError("trajectories are not contiguous")
        st = Stats(self.stats.steps + other.stats.steps, self.stats.rejected + other.stats.rejected,
                   self.stats.rhs_evals + other.stats.rhs_evals)
        return DenseTrajectory(self.t0, self.y0, np.concatenate([self.t_old, other.t_old]),
                               np.concatenate([self.h, other.h]),
                               np.concatenate([self.y_old, other.y_old]),
                               np.concatenate([self.F, other.F]), self.events + other.events, st)

    def first_crossing(self, event, orientation="any", tol=1e-12):
        """First time the stored orbit crosses ``event = 0``, or ``None``.

        Orientation refers to increasing ``t``. Returns ``EventHit``.
        """
        if self.n_segments == 0:
            return None
        mode = ORIENTATIONS[orientation]
        if self.direction < 0 and mode != kern.EV_ANY:
            mode = kern.EV_FALLING if mode == kern.EV_RISING else kern.EV_RISING
        vals = np.asarray(event(self.ys), dtype=float) if isinstance(event, LinearEvent) \
            else np.array([float(event(y)) for y in self.ys])
        a, b = vals[:-1], vals[1:]
        up = (a < 0) & (b >= 0)
        down = (a > 0) & (b <= 0)
        sel = {kern.EV_RISING: up, kern.EV_FALLING: down}.get(mode, up | down)
        idx = np.nonzero(sel)[0]
        if idx.size == 0:
            return None
        k = int(idx[0])
        t, y = _polish(self.t_old[k], self.h[k], self.y_old[k], self.F[k], event, tol)
        return EventHit(t, y)

    def truncate(self, t_stop):
        """Copy restricted to ``[t0, t_stop]``; the last segment is kept whole."""
        k = int(self._locate(t_stop)) + 1
        return DenseTrajectory(self.t0, self.y0, self.t_old[:k], self.h[:k],
                               self.y_old[:k], self.F[:k], self.events, self.stats)


# ---------------------------------------------------------------------------
# step drivers
# ---------------------------------------------------------------------------

class _Batch(NamedTuple):
    status: int
    t: float
    y: np.ndarray
    h_abs: float
    steps: int
    rejected: int
    nfev: int
    t_old: np.ndarray
    h: np.ndarray
    y_old: np.ndarray
    F: np.ndarray


def _initial_step(fun, t0, y0, f0, t_end, max_step, rtol, atol):
    # Hairer-Wanner starting step, as used by scipy for order-7 error estimates
    span = abs(t_end - t0)
    if span == 0:
        return 0.0
    direction = 1.0 if t_end >= t0 else -1.0
    scale = atol + np.abs(y0) * rtol
    rms = lambda v: np.linalg.norm(v) / np.sqrt(v.size)
    d0 = rms(y0 / scale)
    d1 = rms(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = fun(y0 + h0 * direction * f0)
    d2 = rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100 * h0, h1, span, max_step)


class _Driver:
    """Feeds batches of accepted steps for one field."""

    def __init__(self, field, y0, t0, t_end, cfg):
        self.field = field
        self.cfg = cfg
        self.y = np.array(y0, dtype=np.float64)
        self.n = self.y.size
        self.t = float(t0)
        self.t_end = float(t_end)
        self.atol = cfg.atol_vector(self.n)
        self.builtin = isinstance(field, BuiltinField)
        if self.builtin:
            if field.dim != self.n:
                raise ValueError(f"field {field.name!r} has dimension {field.dim}, state has {self.n}")
            self.p = field.param_array()
            fun = field
        else:
            fun = lambda y: np.asarray(field(y), dtype=float)
        f0 = fun(self.y)
        if f0.shape != self.y.shape:
            raise ValueError("field output shape does not match the state")
        if not np.all(np.isfinite(f0)):
            raise NonFinite(f"field is not finite at the initial state {self.y}")
        self.h_abs = _initial_step(fun, self.t, self.y, f0, self.t_end, cfg.max_step,
                                   cfg.rel_tol, self.atol)
        self._scipy = None
        self._fun = fun

    def batch(self, store, ev=None, skip_tol=0.0):
        if self.builtin:
            return self._batch_builtin(store, ev, skip_tol)
        return self._batch_scipy(ev, skip_tol)

    def _batch_builtin(self, store, ev, skip_tol):
        if ev is None:
            c, v, mode = np.zeros(self.n), 0.0, kern.EV_OFF
        else:
            c, v, mode = ev
        out = kern.run(self.field.code, self.p, self.t, self.y, self.t_end, self.h_abs,
                       self.cfg.rel_tol, self.atol, self.cfg.max_step, self.cfg.divergence_bound,
                       c, v, mode, skip_tol, self.cfg.batch_steps, store,
                       kern.TAB_A, kern.TAB_B, kern.TAB_C, kern.TAB_E3, kern.TAB_E5, kern.TAB_D)
        status, t, y, _f, h_abs, steps, rej, nfev, T, H, Y, F, m = out
        self.t, self.y, self.h_abs = float(t), y.copy(), float(h_abs)
        return _Batch(status, self.t, self.y, self.h_abs, steps, rej, nfev,
                      T[:m].copy(), H[:m].copy(), Y[:m].copy(), F[:m].copy())

    def _batch_scipy(self, ev, skip_tol):
        if self._scipy is None:
            self._scipy = DOP853(lambda t, y: self._fun(y), self.t, self.y, self.t_end,
                                 rtol=self.cfg.rel_tol, atol=self.atol,
                                 max_step=self.cfg.max_step, first_step=self.h_abs or None)
        s = self._scipy
        T, H, Y, F = [], [], [], []
        nfev0 = s.nfev
        status = kern.BATCH_FULL
        steps = 0
        g_old = None if ev is None else float(ev[0] @ s.y - ev[1])
        while steps < self.cfg.batch_steps:
            if s.status == "finished":
                status = kern.DONE
                break
            y_prev = s.y.copy()
            msg = s.step()
            if s.status == "failed":
                if not np.all(np.isfinite(s.y)) or "small" not in str(msg):
                    status = kern.DIVERGED
                else:
                    status = kern.UNDERFLOW
                break
            if (not np.all(np.isfinite(s.y))) or np.max(np.abs(s.y)) > self.cfg.divergence_bound:
                status = kern.DIVERGED
                # roll back to the last good state
                s.y = y_prev
                break
            steps += 1
            d = s.dense_output()
            T.append(d.t_old)
            H.append(d.h)
            Y.append(d.y_old.copy())
            F.append(d.F.copy())
            if ev is not None:
                g_new = float(ev[0] @ s.y - ev[1])
                mode = ev[2]
                hit = ((mode in (kern.EV_RISING, kern.EV_ANY) and g_old < 0 <= g_new)
                       or (mode in (kern.EV_FALLING, kern.EV_ANY) and g_old > 0 >= g_new))
                if hit and steps == 1 and abs(g_old) <= skip_tol:
                    hit = False
                g_old = g_new
                if hit:
                    status = kern.EVENT
                    break
            if s.status == "finished":
                status = kern.DONE
                break
        if status == kern.DIVERGED:
            self.t = float(T[-1] + H[-1]) if T else self.t
        else:
            self.t = float(s.t)
            self.y = s.y.copy()
        self.h_abs = float(s.h_abs) if s.h_abs is not None else self.h_abs
        n = self.n
        return _Batch(status, self.t, self.y, self.h_abs, steps, 0, s.nfev - nfev0,
                      np.array(T), np.array(H), np.array(Y).reshape(-1, n),
                      np.array(F).reshape(-1, kern.N_POWER, n))


def _raise_for(status, drv, chunks=None):
    if status == kern.DIVERGED:
        raise Divergence(f"state norm exceeded {drv.cfg.divergence_bound:g} near t={drv.t:.12g}",
                         t=drv.t, y=drv.y.copy())
    if status == kern.UNDERFLOW:
        raise StepUnderflow(f"step size underflow at t={drv.t:.12g}")


def _check_span(t0, t1, cfg):
    if t1 == t0:
        raise ValueError("t_span must be nondegenerate")
    if abs(t1 - t0) > cfg.max_time:
        return t0 + np.sign(t1 - t0) * cfg.max_time, True
    return t1, False


def integrate(field, y0, t_span, cfg=None):
    """Integrate ``dy/dt = field(y)`` over ``t_span`` with dense output.

    Parameters
    ----------
    field : BuiltinField or callable
        Autonomous vector field.
    y0 : array_like
    t_span : (float, float)
        May run backward.
    cfg : IntegratorConfig, optional

    Returns
    -------
    DenseTrajectory

    Raises
    ------
    Divergence, StepUnderflow, Timeout
        ``Divergence`` and ``Timeout`` carry the partial trajectory in the
        ``trajectory`` attribute.
    """
    cfg = cfg or IntegratorConfig()
    t0, t1 = float(t_span[0]), float(t_span[1])
    t1, clipped = _check_span(t0, t1, cfg)
    drv = _Driver(field, y0, t0, t1, cfg)
    stats = Stats(rhs_evals=2)
    chunks = []
    while True:
        b = drv.batch(store=True)
        stats.add(b.steps, b.rejected, b.nfev)
        if b.steps:
            chunks.append((b.t_old, b.h, b.y_old, b.F))
        if b.status == kern.BATCH_FULL:
            continue
        traj = DenseTrajectory._from_chunks(t0, np.asarray(y0, float), chunks, [], stats)
        if b.status in (kern.DIVERGED, kern.UNDERFLOW):
            try:
                _raise_for(b.status, drv)
            except (Divergence, StepUnderflow) as exc:
                exc.trajectory = traj
                raise
        if clipped:
            exc = Timeout(f"integration span exceeds max_time={cfg.max_time:g}")
            exc.trajectory = traj
            raise exc
        return traj


def _event_spec(event, orientation, n):
    mode = ORIENTATIONS[orientation]
    if isinstance(event, LinearEvent):
        c = np.zeros(n)
        c[: len(event.coeffs)] = event.coeffs
        return (c, float(event.level), mode), None
    return None, (event, mode)


def _polish(t_old, h, y_old, F, g, tol):
    """Root of ``g`` on one dense segment, bracketed on ``[0, 1]`` in step units."""
    def gx(x):
        return float(g(kern.dense_eval(t_old, h, y_old, F, t_old + x * h)))

    g0, g1 = gx(0.0), gx(1.0)
    if g0 == 0.0:
        x = 0.0
    elif g1 == 0.0:
        x = 1.0
    elif np.sign(g0) == np.sign(g1):
        # interpolant disagrees with the step-end sign by rounding; take the nearer end
        x = 0.0 if abs(g0) < abs(g1) else 1.0
    else:
        x = brentq(gx, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    t = t_old + x * h
    y = kern.dense_eval(t_old, h, y_old, F, t)
    return float(t), y


def _scan_callable(g, mode, y_start, batch, first, skip_tol):
    """First bracketing segment index for a Python event function, or ``None``."""
    if len(batch.t_old) == 0:
        return None
    ends = batch.y_old + batch.F[:, 0]
    pts = np.vstack([batch.y_old[:1], ends])
    vals = np.array([float(g(p)) for p in pts])
    for k in range(len(ends)):
        a, b = vals[k], vals[k + 1]
        hit = ((mode in (kern.EV_RISING, kern.EV_ANY) and a < 0 <= b)
               or (mode in (kern.EV_FALLING, kern.EV_ANY) and a > 0 >= b))
        if hit and first and k == 0 and abs(a) <= skip_tol:
            continue
        if hit:
            return k
    return None


def integrate_to_event(field, y0, t0, direction, event, orientation="any", cfg=None,
                       skip_initial=False, record=False, accept=None):
    """Integrate until ``event(y)`` changes sign with the requested orientation.

    Parameters
    ----------
    field : BuiltinField or callable
    y0 : array_like
    t0 : float
    direction : {'forward', 'backward'}
    event : LinearEvent or callable
        Linear events on built-in fields are detected in compiled code.
    orientation : {'rising', 'falling', 'any'}
        Sign of ``d event / dt`` at the crossing, measured along increasing t.
    cfg : IntegratorConfig, optional
    skip_initial : bool
        Ignore a crossing in the very first step when ``|event(y0)|`` is
        within ``event_tol``; used when starting on the section itself.
    record : bool
        If true also return the dense trajectory up to the hit.
    accept : callable, optional
        ``accept(t, y) -> bool``; rejected crossings are skipped and the
        search continues from the end of the bracketing step.

    Returns
    -------
    EventHit or (EventHit, DenseTrajectory)

    Raises
    ------
    NoEvent
        If ``cfg.max_time`` elapses without a crossing.
    Divergence, StepUnderflow
    """
    cfg = cfg or IntegratorConfig()
    y0 = np.array(y0, dtype=np.float64)
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    sign = 1.0 if direction == "forward" else -1.0
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {sorted(ORIENTATIONS)}")
    mode = ORIENTATIONS[orientation]
    # in backward time the observed sign change is reversed
    if sign < 0 and mode != kern.EV_ANY:
        mode = kern.EV_FALLING if mode == kern.EV_RISING else kern.EV_RISING
    t_end = t0 + sign * cfg.max_time
    lin, call = _event_spec(event, orientation, y0.size)
    if lin is not None:
        lin = (lin[0], lin[1], mode)
    else:
        call = (call[0], mode)
    g = event if callable(event) else None
    drv = _Driver(field, y0, t0, t_end, cfg)
    stats = Stats(rhs_evals=2)
    chunks = []
    first = True
    skip_tol = cfg.event_tol if skip_initial else 0.0
    while True:
        store = record or lin is None
        b = drv.batch(store=store, ev=lin, skip_tol=skip_tol if first else 0.0)
        stats.add(b.steps, b.rejected, b.nfev)
        seg = None
        if lin is not None and b.status == kern.EVENT:
            seg = len(b.t_old) - 1
        elif lin is None:
            seg = _scan_callable(call[0], call[1], None, b, first, skip_tol)
        if record and b.steps:
            keep = len(b.t_old) if seg is None else seg + 1
            chunks.append((b.t_old[:keep], b.h[:keep], b.y_old[:keep], b.F[:keep]))
        if seg is not None:
            t_hit, y_hit = _polish(b.t_old[seg], b.h[seg], b.y_old[seg], b.F[seg], g, cfg.event_tol)
            if accept is None or accept(t_hit, y_hit):
                hit = EventHit(t_hit, y_hit)
                if record:
                    traj = DenseTrajectory._from_chunks(t0, y0, chunks, [EventRecord(t_hit, y_hit, "event")], stats)
                    return hit, traj
                return hit
            if lin is None:
                # restart after the rejected segment
                t_next = float(b.t_old[seg] + b.h[seg])
                y_next = b.y_old[seg] + b.F[seg, 0]
                h_keep = drv.h_abs
                drv = _Driver(field, y_next, t_next, t_end, cfg)
                drv.h_abs = h_keep
            first = False
            continue
        if b.status == kern.BATCH_FULL or b.status == kern.EVENT:
            first = False
            continue
        if b.status == kern.DONE:
            raise NoEvent(f"no {orientation} crossing within max_time={cfg.max_time:g}")
        _raise_for(b.status, drv)


def _tangent_code(field):
    return {kern.EXAMPLE: kern.EXAMPLE_TANGENT,
            kern.CANONICAL: kern.CANONICAL_TANGENT}.get(field.code)


def variational_flow(field, jacobian, y0, t_span, cfg=None, M0=None):
    """Propagate the state together with the fundamental matrix.

    Parameters
    ----------
    field : BuiltinField or callable
    jacobian : callable or None
        ``jacobian(y) -> (n, n)``. May be ``None`` for the built-in
        three-dimensional fields, which carry a compiled tangent system.
    y0 : array_like
    t_span : (float, float)
    cfg : IntegratorConfig, optional
    M0 : ndarray, optional
        Initial tangent matrix, identity by default.

    Returns
    -------
    y_final : ndarray
    M : ndarray, shape (n, n)
    """
    cfg = cfg or IntegratorConfig()
    y0 = np.asarray(y0, dtype=float)
    n = y0.size
    M0 = np.eye(n) if M0 is None else np.asarray(M0, dtype=float)
    Y0 = np.concatenate([y0, M0.ravel()])
    code = _tangent_code(field) if isinstance(field, BuiltinField) else None
    if code is not None and jacobian is None:
        aug = BuiltinField(code, field.params, field.name + "+tangent")
    else:
        if jacobian is None:
            raise ValueError("jacobian required for this field")

        def aug(Y):
            y = Y[:n]
            M = Y[n:].reshape(n, n)
            return np.concatenate([np.asarray(field(y), float), (np.asarray(jacobian(y), float) @ M).ravel()])

    atol = np.asarray(cfg.abs_tol, dtype=float)
    if atol.ndim:
        cfg = cfg.with_(abs_tol=tuple(np.concatenate([atol, np.full(n * n, atol.min())])))
    traj = integrate(aug, Y0, t_span, cfg)
    Yf = traj.y_end
    return Yf[:n].copy(), Yf[n:].reshape(n, n).copy()
