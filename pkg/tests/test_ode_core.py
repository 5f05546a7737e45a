import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from btfold.errors import Divergence, NoEvent, Timeout
from btfold.models import Params, builtin_canonical_fold
from btfold.ode_core import (IntegratorConfig, LinearEvent, integrate, integrate_to_event,
                             variational_flow)
from btfold import painleve as pl


def harmonic(y):
    return np.array([y[1], -y[0]])


def test_harmonic_period():
    tr = integrate(harmonic, [1.0, 0.0], (0.0, 2 * math.pi))
    assert np.allclose(tr.y_end, [1.0, 0.0], atol=1e-8)


def test_exponential_decay():
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-14)
    tr = integrate(lambda y: -y, [1.0], (0.0, 1.0), cfg)
    assert abs(tr.y_end[0] - math.exp(-1)) <= 1e-10 * 10 * math.exp(-1)


def test_painleve_diverges_near_pole():
    start = pl.asymptotic_eval(pl.TRITRONQUEE, 20.0)
    y0 = [start.x2, start.y2, start.z2]
    with pytest.raises(Divergence) as exc:
        # the Painleve field runs toward decreasing z
        integrate(pl.painleve_field(), y0, (0.0, 40.0))
    z_stop = exc.value.trajectory.y_end[2]
    omega = pl.compute_omega()[0]
    assert abs(z_stop - omega) < 0.05


def test_event_linear_motion():
    hit = integrate_to_event(lambda y: np.array([1.0, 0.0]), [0.0, 0.0], 0.0, "forward",
                             LinearEvent((1.0, 0.0), 1.0))
    assert hit.t == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(hit.y, [1.0, 0.0], atol=1e-12)


def test_event_full_revolution():
    hit = integrate_to_event(lambda y: np.array([-y[1], y[0]]), [1.0, 0.0], 0.0, "forward",
                             LinearEvent((0.0, 1.0)), "rising", skip_initial=True)
    assert hit.t == pytest.approx(2 * math.pi, abs=1e-8)


def test_canonical_exit_below_fold():
    eps = 1e-3
    sys = builtin_canonical_fold(1.0)
    y0 = [-eps / (2 * math.sqrt(0.5)), -math.sqrt(0.5), 0.5]
    ev = LinearEvent.axis(1, 0.09, 3)
    cfg = IntegratorConfig(max_time=1e4)
    hit = integrate_to_event(sys.field(Params(eps, 1.0)), y0, 0.0, "forward", ev, "rising", cfg)
    assert hit.y[2] < 0
    # the same crossing from a dense trajectory with a step cap
    tr = integrate(sys.field(Params(eps, 1.0)), y0, (0.0, hit.t + 1.0), cfg.with_(max_step=0.05))
    assert tr.first_crossing(ev, "rising").y[2] == pytest.approx(hit.y[2], abs=1e-7)


def test_no_event_raises():
    with pytest.raises(NoEvent):
        integrate_to_event(lambda y: -y, [1.0], 0.0, "forward", LinearEvent((1.0,), 2.0),
                           cfg=IntegratorConfig(max_time=5.0))


def test_timeout():
    with pytest.raises(Timeout):
        integrate(lambda y: -y, [1.0], (0.0, 10.0), IntegratorConfig(max_time=1.0))


def test_bad_config():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(max_time=math.inf)


def test_variational_linear():
    A = np.array([[0.1, 1.0], [-2.0, -0.3]])
    yf, M = variational_flow(lambda y: A @ y, lambda y: A, [1.0, 0.5], (0.0, 1.5))
    w, V = np.linalg.eig(A)
    expA = (V @ np.diag(np.exp(1.5 * w)) @ np.linalg.inv(V)).real
    assert np.allclose(M, expA, atol=1e-8)


def test_variational_flow_direction():
    sys = builtin_canonical_fold(1.0)
    p = Params(0.01, 0.5)
    f = sys.field(p)
    y0 = np.array([0.1, -0.3, 0.2])
    yf, M = variational_flow(f, None, y0, (0.0, 1.0))
    assert np.allclose(M @ f(y0), f(yf), atol=1e-6)


def test_liouville_frozen_fast_system():
    sys = builtin_canonical_fold(1.0)
    p = Params(0.0, 0.5)
    f = sys.field(p)
    y0 = np.array([0.05, -0.4, 0.25])
    yf, M = variational_flow(f, sys.jacobian(p), y0, (0.0, 1.0))
    tr = integrate(f, y0, (0.0, 1.0))
    t = np.linspace(0.0, 1.0, 2001)
    Y = tr(t)
    trace = np.array([np.trace(sys.jacobian(p)(y)) for y in Y])
    from scipy.integrate import simpson
    assert np.linalg.det(M) == pytest.approx(math.exp(simpson(trace, x=t)), rel=1e-6)


def test_dense_output_continuity():
    tr = integrate(harmonic, [1.0, 0.0], (0.0, 10.0), IntegratorConfig(rel_tol=1e-8))
    ends = tr.t_old[1:]
    left = np.array([yo + F[0] for yo, F in zip(tr.y_old[:-1], tr.F[:-1])])
    assert np.max(np.abs(left - tr(ends))) < 10 * 1e-8


def test_step_halving_order():
    # loose tolerances so that the step cap sets the error; DOP853 is order 8
    errs = []
    steps = [0.8, 0.4, 0.2, 0.1]
    for h in steps:
        cfg = IntegratorConfig(rel_tol=1e-1, abs_tol=1e-1, max_step=h)
        tr = integrate(harmonic, [1.0, 0.0], (0.0, 8.0), cfg)
        errs.append(np.abs(tr.y_end - [math.cos(8.0), -math.sin(8.0)]).max())
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert abs(slope - 8) <= 0.5


@given(st.floats(0.1, 3.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_time_reversal(T, a, b):
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
    fw = integrate(harmonic, [a, b], (0.0, T), cfg)
    bw = integrate(harmonic, fw.y_end, (T, 0.0), cfg)
    assert np.allclose(bw.y_end, [a, b], atol=100 * 1e-10 * (1 + abs(a) + abs(b)))


@given(st.floats(0.2, 2.0))
def test_event_idempotence(level):
    f = lambda y: np.array([-y[1], y[0]])
    ev = LinearEvent((0.0, 1.0), 0.0)
    hit = integrate_to_event(f, [level, -0.5], 0.0, "forward", ev, "rising")
    again = integrate_to_event(f, hit.y, hit.t, "forward", ev, "any",
                               IntegratorConfig(max_time=10.0))
    assert again.t >= hit.t - 1e-12


@given(st.floats(0.5, 2.0))
def test_recorded_event_on_level(level):
    f = lambda y: np.array([1.0, y[0]])
    ev = LinearEvent((1.0, 0.0), level)
    hit, tr = integrate_to_event(f, [0.0, 0.0], 0.0, "forward", ev, record=True)
    assert abs(ev(tr.events[0].state)) <= 1e-12
    assert tr.t_end == pytest.approx(hit.t, abs=1e-9) or tr.t_end >= hit.t
