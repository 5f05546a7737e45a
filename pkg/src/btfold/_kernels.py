"""Compiled right-hand sides and the DOP853 stepping loop.

Everything here is ``numba.njit(cache=True)``. The built-in vector fields are
selected by an integer code so a single compiled loop serves all of them; the
loop calls :func:`rhs` as a module global, which is what keeps the on-disk
cache valid between processes.

The Butcher tableau and dense-output weights are the Dormand-Prince 8(5,3)
tables shipped with scipy; the step-size controller reproduces
``scipy.integrate.DOP853`` so the compiled path and the generic scipy path
agree to rounding.
"""
import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

# field codes
EXAMPLE = 0
CANONICAL = 1
EXAMPLE_TANGENT = 2
CANONICAL_TANGENT = 3
PAINLEVE = 4
PAINLEVE_REG = 5
CHART_K1 = 6
CHART_K2 = 7
CHART_K3 = 8

FIELD_DIMS = {
    EXAMPLE: 3, CANONICAL: 3, EXAMPLE_TANGENT: 12, CANONICAL_TANGENT: 12,
    PAINLEVE: 3, PAINLEVE_REG: 3, CHART_K1: 4, CHART_K2: 4, CHART_K3: 4,
}

# kernel status codes
DONE = 0
BATCH_FULL = 1
EVENT = 2
DIVERGED = 3
UNDERFLOW = 4

# event modes
EV_OFF = 0
EV_RISING = 1
EV_FALLING = 2
EV_ANY = 3

N_STAGES = _dop.N_STAGES
N_POWER = _dop.INTERPOLATOR_POWER
TAB_A = np.ascontiguousarray(_dop.A, dtype=np.float64)
TAB_B = np.ascontiguousarray(_dop.B, dtype=np.float64)
TAB_C = np.ascontiguousarray(_dop.C, dtype=np.float64)
TAB_E3 = np.ascontiguousarray(_dop.E3, dtype=np.float64)
TAB_E5 = np.ascontiguousarray(_dop.E5, dtype=np.float64)
TAB_D = np.ascontiguousarray(_dop.D, dtype=np.float64)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1.0 / 8.0


@njit(cache=True)
def _example(y, p, out):
    eps = p[0]
    d = p[1]
    x = y[0]
    v = y[1]
    out[0] = y[2] + 3.0 * (v * v * v - v) + d * x * (1.0 / 3.0 - v * v)
    out[1] = -x
    out[2] = eps * math.sin(2.5 * v)


@njit(cache=True)
def _canonical(y, p, out):
    eps = p[0]
    a = p[1] * p[2]
    out[0] = y[2] - y[1] * y[1] + a * y[0] * y[1]
    out[1] = -y[0]
    out[2] = -eps


@njit(cache=True)
def _tangent(J, y, out):
    # out[3:] = J @ M with M stored row-major in y[3:12]
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += J[i, k] * y[3 + 3 * k + j]
            out[3 + 3 * i + j] = acc


@njit(cache=True)
def rhs(code, y, p, out):
    """Evaluate built-in field ``code`` at ``y`` with parameters ``p`` into ``out``."""
    if code == EXAMPLE:
        _example(y, p, out)
    elif code == CANONICAL:
        _canonical(y, p, out)
    elif code == EXAMPLE_TANGENT:
        _example(y, p, out)
        d = p[1]
        x = y[0]
        v = y[1]
        J = np.zeros((3, 3))
        J[0, 0] = d * (1.0 / 3.0 - v * v)
        J[0, 1] = 9.0 * v * v - 3.0 - 2.0 * d * x * v
        J[0, 2] = 1.0
        J[1, 0] = -1.0
        J[2, 1] = 2.5 * p[0] * math.cos(2.5 * v)
        _tangent(J, y, out)
    elif code == CANONICAL_TANGENT:
        _canonical(y, p, out)
        a = p[1] * p[2]
        J = np.zeros((3, 3))
        J[0, 0] = a * y[1]
        J[0, 1] = -2.0 * y[1] + a * y[0]
        J[0, 2] = 1.0
        J[1, 0] = -1.0
        _tangent(J, y, out)
    elif code == PAINLEVE:
        # state (x2, y2, z2); forward time runs toward decreasing z2
        out[0] = y[2] - y[1] * y[1]
        out[1] = -y[0]
        out[2] = -1.0
    elif code == PAINLEVE_REG:
        # state (eta, xi, tau); the independent variable is tau itself
        e = y[0]
        xi = y[1]
        tau = y[2]
        e2 = e * e
        e3 = e2 * e
        e4 = e3 * e
        e5 = e4 * e
        out[0] = 1.0 + 0.25 * tau * e4 + 0.25 * e5 - 0.5 * e5 * e * xi
        out[1] = (0.125 * tau * tau * e + 0.375 * tau * e2
                  - (tau * xi - 0.25) * e3 - 1.25 * e4 * xi + 1.5 * e5 * xi * xi)
        out[2] = 1.0
    elif code == CHART_K1:
        a = p[0] * p[1]
        x1 = y[0]
        y1 = y[1]
        r1 = y[2]
        e1 = y[3]
        out[0] = 1.0 - y1 * y1 + a * r1 * x1 * y1 + 0.75 * x1 * e1
        out[1] = -x1 + 0.5 * y1 * e1
        out[2] = -0.25 * r1 * e1
        out[3] = 1.25 * e1 * e1
    elif code == CHART_K2:
        a = p[0] * p[1]
        out[0] = y[2] - y[1] * y[1] + a * y[3] * y[0] * y[1]
        out[1] = -y[0]
        out[2] = -1.0
        out[3] = 0.0
    elif code == CHART_K3:
        a = p[0] * p[1]
        x3 = y[0]
        r3 = y[1]
        z3 = y[2]
        e3 = y[3]
        out[0] = -1.0 + z3 + a * r3 * x3 + 1.5 * x3 * x3
        out[1] = -0.5 * r3 * x3
        out[2] = -e3 + 2.0 * z3 * x3
        out[3] = 2.5 * e3 * x3
    else:
        for i in range(out.size):
            out[i] = np.nan


@njit(cache=True)
def _error_norm(K, E3, E5, h, y, y_new, rtol, atol):
    n = y.size
    e5 = 0.0
    e3 = 0.0
    for i in range(n):
        sc = atol[i] + max(abs(y[i]), abs(y_new[i])) * rtol
        a5 = 0.0
        a3 = 0.0
        for j in range(N_STAGES + 1):
            a5 += K[j, i] * E5[j]
            a3 += K[j, i] * E3[j]
        a5 /= sc
        a3 /= sc
        e5 += a5 * a5
        e3 += a3 * a3
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * n)


@njit(cache=True)
def _dense(code, p, t_old, h, y_old, y_new, f_new, K, A, C, D, ytmp, Fout):
    n = y_old.size
    K[N_STAGES, :] = f_new
    for s in range(N_STAGES + 1, 16):
        for i in range(n):
            acc = 0.0
            for j in range(s):
                acc += A[s, j] * K[j, i]
            ytmp[i] = y_old[i] + h * acc
        rhs(code, ytmp, p, K[s])
    for i in range(n):
        dy = y_new[i] - y_old[i]
        Fout[0, i] = dy
        Fout[1, i] = h * K[0, i] - dy
        Fout[2, i] = 2.0 * dy - h * (f_new[i] + K[0, i])
        for r in range(4):
            acc = 0.0
            for j in range(16):
                acc += D[r, j] * K[j, i]
            Fout[3 + r, i] = h * acc


@njit(cache=True)
def dense_eval(t_old, h, y_old, F, t):
    """Evaluate one DOP853 dense-output segment at time ``t``."""
    x = (t - t_old) / h
    n = y_old.size
    out = np.zeros(n)
    for k in range(N_POWER):
        f = F[N_POWER - 1 - k]
        for i in range(n):
            out[i] += f[i]
            if k % 2 == 0:
                out[i] *= x
            else:
                out[i] *= 1.0 - x
    for i in range(n):
        out[i] += y_old[i]
    return out


@njit(cache=True)
def run(code, p, t0, y0, t_end, h_abs, rtol, atol, max_step, bound,
        ev_c, ev_v, ev_mode, ev_skip_tol, max_steps, store,
        A, B, C, E3, E5, D):
    """Advance a built-in field with DOP853 for at most ``max_steps`` steps.

    Returns
    -------
    tuple
        ``(status, t, y, f, h_abs, steps, rejected, nfev, T_old, H, Y_old, F, n_seg)``.
        With ``store`` every accepted step's dense coefficients are kept;
        otherwise only the step that brackets an event is written (slot 0).
    """
    n = y0.size
    direction = 1.0 if t_end >= t0 else -1.0
    K = np.empty((16, n))
    ytmp = np.empty(n)
    y = y0.copy()
    y_new = np.empty(n)
    f = np.empty(n)
    f_new = np.empty(n)
    rhs(code, y, p, f)
    nfev = 1
    cap = max_steps if store else 1
    T_old = np.empty(cap)
    H = np.empty(cap)
    Y_old = np.empty((cap, n))
    F = np.empty((cap, N_POWER, n))
    n_seg = 0
    steps = 0
    rejected = 0
    t = t0
    g_old = 0.0
    g_new = 0.0
    if ev_mode != EV_OFF:
        for i in range(n):
            g_old += ev_c[i] * y[i]
        g_old -= ev_v
    status = DONE
    while True:
        if direction * (t - t_end) >= 0.0:
            status = DONE
            break
        if steps >= max_steps:
            status = BATCH_FULL
            break
        min_step = 10.0 * abs(np.nextafter(t, direction * np.inf) - t)
        if h_abs > max_step:
            h_abs = max_step
        elif h_abs < min_step:
            h_abs = min_step
        accepted = False
        was_rejected = False
        h = 0.0
        t_new = t
        while not accepted:
            if h_abs < min_step:
                break
            h = h_abs * direction
            t_new = t + h
            if direction * (t_new - t_end) > 0.0:
                t_new = t_end
            h = t_new - t
            h_abs = abs(h)
            K[0, :] = f
            for s in range(1, N_STAGES):
                for i in range(n):
                    acc = 0.0
                    for j in range(s):
                        acc += A[s, j] * K[j, i]
                    ytmp[i] = y[i] + h * acc
                rhs(code, ytmp, p, K[s])
            for i in range(n):
                acc = 0.0
                for j in range(N_STAGES):
                    acc += B[j] * K[j, i]
                y_new[i] = y[i] + h * acc
            rhs(code, y_new, p, f_new)
            K[N_STAGES, :] = f_new
            nfev += N_STAGES
            err = _error_norm(K, E3, E5, h, y, y_new, rtol, atol)
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err ** ERR_EXP)
                if was_rejected:
                    factor = min(1.0, factor)
                h_abs *= factor
                accepted = True
            else:
                if math.isfinite(err):
                    h_abs *= max(MIN_FACTOR, SAFETY * err ** ERR_EXP)
                else:
                    h_abs *= MIN_FACTOR
                was_rejected = True
                rejected += 1
        if not accepted:
            status = UNDERFLOW
            break
        big = 0.0
        finite = True
        for i in range(n):
            if not math.isfinite(y_new[i]):
                finite = False
            elif abs(y_new[i]) > big:
                big = abs(y_new[i])
        if (not finite) or big > bound:
            status = DIVERGED
            break
        steps += 1
        bracket = False
        if ev_mode != EV_OFF:
            g_new = 0.0
            for i in range(n):
                g_new += ev_c[i] * y_new[i]
            g_new -= ev_v
            if (ev_mode == EV_RISING or ev_mode == EV_ANY) and g_old < 0.0 and g_new >= 0.0:
                bracket = True
            if (ev_mode == EV_FALLING or ev_mode == EV_ANY) and g_old > 0.0 and g_new <= 0.0:
                bracket = True
            if bracket and steps == 1 and abs(g_old) <= ev_skip_tol:
                bracket = False
        if store or bracket:
            slot = n_seg if store else 0
            _dense(code, p, t, h, y, y_new, f_new, K, A, C, D, ytmp, F[slot])
            nfev += 3
            T_old[slot] = t
            H[slot] = h
            Y_old[slot, :] = y
            if store:
                n_seg += 1
            else:
                n_seg = 1
        t = t_new
        for i in range(n):
            y[i] = y_new[i]
            f[i] = f_new[i]
        g_old = g_new
        if bracket:
            status = EVENT
            break
    return (status, t, y, f, h_abs, steps, rejected, nfev,
            T_old, H, Y_old, F, n_seg)


@njit(cache=True)
def eval_rhs(code, y, p):
    out = np.empty(y.size)
    rhs(code, y, p, out)
    return out
