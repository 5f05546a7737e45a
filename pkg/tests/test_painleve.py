import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from btfold import painleve as pl
from btfold.errors import BranchViolation, OutOfValidity, PoleAt
from btfold.experiments import tritronquee_pole_data
from btfold.ode_core import IntegratorConfig, integrate


@pytest.fixture(scope="module")
def omega():
    return pl.compute_omega()


@pytest.fixture(scope="module")
def base_pole():
    return pl.find_pole(pl.asymptotic_eval(pl.AsymptoticParams(order=1), 80.0))


def test_kappa():
    assert pl.KAPPA ** 5 == pytest.approx(-6.0)
    assert pl.KAPPA == pytest.approx(-1.431, abs=1e-3)


def test_tritronquee_leading_terms():
    p = pl.asymptotic_eval(pl.TRITRONQUEE, 100.0)
    assert p.y2 == pytest.approx(-10.0, abs=1e-14)
    assert p.x2 == pytest.approx(-0.05, abs=1e-14)


def test_tiny_oscillation_is_continuous():
    a = pl.asymptotic_eval(pl.TRITRONQUEE, 100.0)
    b = pl.asymptotic_eval(pl.AsymptoticParams(1e-30, 1e-30), 100.0)
    assert abs(a.x2 - b.x2) < 1e-25 and abs(a.y2 - b.y2) < 1e-25


def test_validity_region():
    with pytest.raises(OutOfValidity):
        pl.asymptotic_eval(pl.TRITRONQUEE, 9.9)
    with pytest.raises(ValueError):
        pl.AsymptoticParams(order=2)


def test_series_residual_decay():
    z = np.geomspace(20.0, 80.0, 7)
    r = [pl.asymptotic_residual(pl.TRITRONQUEE, v) for v in z]
    slope = np.polyfit(np.log(z), np.log(r), 1)[0]
    assert slope == pytest.approx(-2.5, abs=0.1)


def test_first_order_residual_is_smaller():
    for z in (20.0, 40.0, 80.0):
        assert (pl.asymptotic_residual(pl.AsymptoticParams(order=1), z)
                < pl.asymptotic_residual(pl.TRITRONQUEE, z))


@given(st.floats(-5.0, 5.0), st.floats(0.05, 50.0), st.floats(-20.0, 20.0))
def test_regularize_round_trip(x2, y2, z2):
    p = pl.P1State(x2, y2, z2)
    q = pl.deregularize(pl.regularize(p))
    assert q.x2 == pytest.approx(x2, rel=1e-12, abs=1e-12 * (1 + abs(y2) ** 1.5))
    assert q.y2 == pytest.approx(y2, rel=1e-12)
    assert q.z2 == pytest.approx(z2, rel=1e-12, abs=1e-12)


def test_regularize_branch_errors():
    with pytest.raises(BranchViolation):
        pl.regularize(pl.P1State(-0.05, -10.0, 100.0))
    with pytest.raises(PoleAt):
        pl.deregularize(pl.RegularizedState(0.0, 0.1, 1.0))


@given(st.floats(1e-4, 1e-1))
def test_y2_blows_up_positive(eta):
    y = pl.deregularize(pl.RegularizedState(eta, 0.3, 2.0)).y2
    assert y == pytest.approx(-pl.KAPPA ** 3 / eta ** 2)
    assert y > 0


@given(st.floats(0.05, 0.6), st.floats(-2.0, 2.0), st.floats(-3.0, 3.0),
       st.sampled_from([-1.0, 1.0]))
def test_regularized_field_is_pushforward(eta, xi, tau, sgn):
    eta *= sgn
    # chain rule through deregularize with the regularized velocity
    deta, dxi = pl.regularized_rhs(eta, xi, tau)
    u = np.array([eta, xi, tau])
    v = np.array([deta, dxi, 1.0])
    h = 1e-3 * abs(eta)
    f = lambda w: pl.deregularize(pl.RegularizedState(*w)).as_array()
    dP = (8 * (f(u + h * v) - f(u - h * v)) - (f(u + 2 * h * v) - f(u - 2 * h * v))) / (12 * h)
    p = f(u)
    # d/dtau = kappa d/dz2 for the Painleve system x' = y^2 - z, y' = x
    expect = pl.KAPPA * np.array([p[1] ** 2 - p[2], p[0], 1.0])
    assert np.all(np.abs(dP - expect) / (np.abs(expect) + 1) < 1e-9)


def test_regularized_rhs_matches_compiled():
    F = pl.regularized_field()
    for eta, xi, tau in [(0.1, 0.2, -2.0), (-0.3, 1.0, 3.0)]:
        a = F(np.array([eta, xi, tau]))
        assert np.allclose(a[:2], pl.regularized_rhs(eta, xi, tau), atol=1e-14)
        assert a[2] == 1.0


def test_find_pole_from_tritronquee(omega):
    res = pl.find_pole(pl.asymptotic_eval(pl.TRITRONQUEE, 20.0))
    assert res.refinement_residual <= 1e-12
    assert res.z0 == pytest.approx(omega[0], abs=1e-3)


def test_pole_independent_of_seed_position():
    start = pl.asymptotic_eval(pl.AsymptoticParams(order=1), 40.0)
    cfg = IntegratorConfig(rel_tol=1e-13, abs_tol=1e-14)
    tr = integrate(pl.painleve_field(), start.as_array(), (0.0, 10.0), cfg)
    mid = pl.P1State(*tr.y_end)
    a = pl.find_pole(start).z0
    b = pl.find_pole(mid).z0
    assert abs(a - b) < 1e-9


def test_omega_convergence(omega):
    value, rows = omega
    assert rows[0]["spread"] < 1e-4
    assert abs(value - pl.OMEGA_REFERENCE) < 0.05


def test_laurent_structure(base_pole):
    fit = pl.laurent_fit(base_pole)
    assert fit["order"] == pytest.approx(2.0, abs=0.01)
    assert fit["coefficient"] == pytest.approx(6.0, rel=1e-3)
    assert fit["quadratic"] == pytest.approx(base_pole.z0 / 10, rel=0.01)


@settings(max_examples=6)
@given(st.floats(-1e-3, 1e-3))
def test_perturbed_poles_are_double(dx):
    s = pl.asymptotic_eval(pl.AsymptoticParams(order=1), 20.0)
    res = pl.find_pole(pl.P1State(s.x2 + dx, s.y2, s.z2))
    fit = pl.laurent_fit(res)
    assert 1.99 <= fit["order"] <= 2.01
    assert 5.99 <= fit["coefficient"] <= 6.01


@pytest.mark.parametrize("eta0", [0.02, 0.01, 0.005])
def test_pole_time_series(base_pole, eta0):
    s, xi = tritronquee_pole_data(eta0, base_pole)
    num = pl.pole_time(s, -eta0, xi, dps=40)
    with mp.workdps(40):
        ser = pl.pole_time_series(mp.mpf(s), -mp.mpf(eta0), mp.mpf(xi))
        assert abs(num - ser) < 10 * eta0 ** 8
    # double precision path agrees with the high precision one
    assert pl.pole_time(s, -eta0, xi) == pytest.approx(float(num), abs=1e-12)


def test_sqrt6_intercept(omega):
    r = np.geomspace(1e-6, 1e-3, 5)
    z = np.array([pl.tritronquee_crossing(v ** -0.4) for v in r])
    rr = r ** 0.2
    coef, *_ = np.linalg.lstsq(np.column_stack([rr, rr ** 5]), z - omega[0], rcond=None)
    assert coef[0] == pytest.approx(math.sqrt(6), rel=0.02)


def test_pole_table_smooth():
    rows = pl.pole_table(20.0)
    x = np.array([r["dx0"] for r in rows])
    z = np.array([r["z0"] for r in rows])
    c = np.polyfit(x, z, 2)
    assert np.max(np.abs(np.polyval(c, x) - z)) < 1e-8
    assert abs(c[1]) > 1e-3
