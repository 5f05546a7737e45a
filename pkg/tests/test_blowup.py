import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from btfold.blowup import (ChartPoint, blow_down, chart_field, chart_field_numeric,
                           chart_transition, chart_vector_field, lift, radial_index)
from btfold.errors import OutOfChart, OutOfOverlap
from btfold.models import Params, builtin_canonical_fold
from btfold.ode_core import IntegratorConfig, integrate

pos = st.floats(0.05, 3.0)
real = st.floats(-3.0, 3.0)
CANON = builtin_canonical_fold(1.0)


def rel_close(a, b, tol=1e-12):
    a, b = np.asarray(a), np.asarray(b)
    return np.all(np.abs(a - b) <= tol * np.maximum(1.0, np.abs(b)))


def test_k2_lift_example():
    p = lift("K2", ChartPoint("Base", (0.008, 0.04, 0.0016, 1e-5)))
    assert rel_close(p.coords, (8.0, 4.0, 16.0, 0.1))


def test_k1_lift_on_entry_section():
    rho, eps = 0.3, 1e-4
    p = lift("K1", ChartPoint("Base", (0.0, 0.0, rho ** 4, eps)))
    assert rel_close(p.coords, (0.0, 0.0, rho, eps / rho ** 5))


def random_base(rng, n):
    B = rng.uniform(-2, 2, size=(n, 4))
    B[:, 2] = np.abs(B[:, 2]) + 1e-3
    B[:, 1] = np.abs(B[:, 1]) + 1e-3
    B[:, 3] = np.abs(B[:, 3]) + 1e-3
    return B


@pytest.mark.parametrize("chart", ["K1", "K2", "K3"])
def test_lift_blow_down_round_trip(chart, rng):
    for b in random_base(rng, 1000):
        p = ChartPoint("Base", b)
        assert rel_close(blow_down(lift(chart, p)).coords, b, 1e-13)


def test_lift_errors():
    with pytest.raises(OutOfChart):
        lift("K1", ChartPoint("Base", (0.0, 0.0, 0.0, 1.0)))
    with pytest.raises(OutOfChart):
        lift("K2", ChartPoint("Base", (0.0, 0.0, 1.0, 0.0)))
    with pytest.raises(OutOfChart):
        lift("K3", ChartPoint("Base", (0.0, -1.0, 1.0, 1.0)))
    with pytest.raises(OutOfChart):
        ChartPoint("K2", (0.0, 0.0, 0.0, -1.0))


@given(real, real, real)
def test_exceptional_fiber(x, z, e):
    assert blow_down(ChartPoint("K3", (x, 0.0, z, e))).coords == (0.0, 0.0, 0.0, 0.0)


@given(real, real, real, st.floats(0.0, 2.0))
def test_k2_image_has_nonnegative_eps(x, y, z, r):
    assert blow_down(ChartPoint("K2", (x, y, z, r))).coords[3] >= 0


def test_transition_round_trips(rng):
    for _ in range(1000):
        x, y, r = rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 2)
        p1 = ChartPoint("K1", (x, y, r, rng.uniform(0.05, 3)))
        assert rel_close(chart_transition("K2", "K1", chart_transition("K1", "K2", p1)).coords, p1.coords)
        p3 = ChartPoint("K3", (x, r, y, rng.uniform(0.05, 3)))
        assert rel_close(chart_transition("K2", "K3", chart_transition("K3", "K2", p3)).coords, p3.coords)
        p2 = ChartPoint("K2", (x, abs(y) + 0.05, abs(r) + 0.05, r))
        assert rel_close(chart_transition("K1", "K2", chart_transition("K2", "K1", p2)).coords, p2.coords)
        assert rel_close(chart_transition("K3", "K2", chart_transition("K2", "K3", p2)).coords, p2.coords)


@given(real, real, pos)
def test_k12_unit_scaling(x, y, r):
    q = chart_transition("K1", "K2", ChartPoint("K1", (x, y, r, 1.0)))
    assert rel_close(q.coords, (x, y, 1.0, r))


@given(real, real, st.floats(0.01, 2.0), pos)
def test_transition_factors_through_base(x, y, r, e):
    for i, p in (("K1", ChartPoint("K1", (x, y, r, e))), ("K3", ChartPoint("K3", (x, r, y, e)))):
        q = chart_transition(i, "K2", p)
        assert rel_close(blow_down(q).coords, blow_down(p).coords)
        if i == "K1" and y > 1e-3:
            direct = chart_transition("K1", "K3", p)
            assert rel_close(blow_down(direct).coords, blow_down(p).coords, 1e-11)


def test_overlap_errors():
    with pytest.raises(OutOfOverlap):
        chart_transition("K2", "K3", ChartPoint("K2", (0.0, 1e-240, 1.0, 1.0)))
    with pytest.raises(OutOfOverlap):
        chart_transition("K1", "K2", ChartPoint("K1", (1.0, 1.0, 1.0, 0.0)))
    with pytest.raises(OutOfOverlap):
        chart_transition("K2", "K3", ChartPoint("K2", (1.0, -1.0, 1.0, 1.0)))
    with pytest.raises(OutOfOverlap):
        chart_transition("Base", "K1", ChartPoint("Base", (1.0, 1.0, -1.0, 1.0)))


@given(real, real, real, st.floats(0.0, 1.0), st.floats(0.0, 2.0))
def test_k2_at_zero_radius_is_painleve(x, y, z, delta, c1):
    v = chart_field("K2", ChartPoint("K2", (x, y, z, 0.0)), delta, c1)
    assert tuple(v) == (z - y * y, -x, -1.0, 0.0)


@pytest.mark.parametrize("sgn", [1.0, -1.0])
def test_k1_fixed_points(sgn):
    assert np.all(chart_field("K1", ChartPoint("K1", (0.0, sgn, 0.0, 0.0)), 1.0, 1.0) == 0.0)


def test_k3_fixed_point():
    v = chart_field("K3", ChartPoint("K3", (-math.sqrt(2 / 3), 0.0, 0.0, 0.0)), 1.0, 1.0)
    assert np.allclose(v, 0.0, atol=1e-15)


@pytest.mark.parametrize("chart", ["K1", "K2", "K3"])
def test_closed_form_matches_pushforward(chart, rng):
    for _ in range(200):
        u = rng.uniform(-2, 2, 4)
        u[radial_index(chart)] = rng.uniform(0.05, 1.5)
        delta, c1 = rng.uniform(0, 1), rng.uniform(0, 2)
        p = ChartPoint(chart, u)
        a = chart_field(chart, p, delta, c1)
        b = chart_field_numeric(chart, p, builtin_canonical_fold(c1), Params(0.0, delta))
        assert np.all(np.abs(a - b) <= 1e-10 * np.maximum(1, np.abs(a)))


@pytest.mark.parametrize("chart", ["K1", "K2", "K3"])
def test_zero_radius_extrapolation(chart, rng):
    for _ in range(20):
        u = rng.uniform(-1, 1, 4)
        u[radial_index(chart)] = 0.0
        p = ChartPoint(chart, u)
        a = chart_field(chart, p, 0.7, 1.0)
        b = chart_field_numeric(chart, p, CANON, Params(0.0, 0.7))
        assert np.allclose(a, b, atol=1e-8)


def test_desingularization():
    # the base field vanishes to first order at the fold; the K2 field does not
    base = CANON.fast(0.0, 0.0, 0.0, 0.0, 1.0)
    assert np.allclose(base, 0.0)
    J = CANON.fast_jacobian(0.0, 0.0, 0.0, 0.0, 1.0)
    assert np.allclose(np.linalg.eigvals(J), 0.0)
    assert np.linalg.norm(chart_field("K2", ChartPoint("K2", (0.3, 0.2, 0.1, 0.0)), 1.0, 1.0)) > 0.1


def test_k2_orbit_blows_down_to_base_orbit():
    u = np.array([0.3, -0.5, 1.2, 0.2])
    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    k2 = integrate(chart_vector_field("K2", 1.0, 1.0), u, (0.0, 0.1), cfg)
    X, Y, Z, e = blow_down(ChartPoint("K2", u)).coords
    # K2 time is the base time times r2
    base = integrate(CANON.field(Params(e, 1.0)), [X, Y, Z], (0.0, 0.1 / u[3]), cfg)
    end = blow_down(ChartPoint("K2", k2.y_end)).coords
    assert np.allclose(end[:3], base.y_end, atol=1e-8)


@given(real, st.floats(-1.5, 1.5), st.floats(0.05, 1.0), st.floats(0.1, 2.0))
def test_k1_flow_transported_to_k2(x, y, r, e):
    # velocities agree up to a positive time factor
    p = ChartPoint("K1", (x, y, r, e))
    v1 = chart_field("K1", p, 1.0, 1.0)
    h = 1e-6
    fw = chart_transition("K1", "K2", ChartPoint("K1", p.as_array() + h * v1)).as_array()
    bw = chart_transition("K1", "K2", ChartPoint("K1", p.as_array() - h * v1)).as_array()
    w = (fw - bw) / (2 * h)
    v2 = chart_field("K2", chart_transition("K1", "K2", p), 1.0, 1.0)
    lam = np.dot(w, v2) / np.dot(v2, v2)
    assert lam > 0
    assert np.allclose(w, lam * v2, atol=1e-6 * (1 + np.abs(w).max()))


def test_monomial_identities(rng):
    for _ in range(100):
        x, y, z, r = rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 2)
        X, Y, Z, e = blow_down(ChartPoint("K2", (x, y, z, r))).coords
        assert Z ** 3 == pytest.approx(z ** 3 * r ** 12, rel=1e-12, abs=1e-300)
        assert X ** 4 == pytest.approx(x ** 4 * r ** 12, rel=1e-12, abs=1e-300)
