import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from btfold import experiments as ex
from btfold import poincare as pc
from btfold.errors import NoReturn
from btfold.models import Params, builtin_canonical_fold, builtin_example


EXAMPLE = builtin_example()


@pytest.fixture(scope="module")
def orbit():
    sec = ex.sweep_section()
    params = Params(0.01, 1.0)
    return ex._orbit_at(EXAMPLE, sec, params, ex.config_for("orbit")), sec, params


# -- sections ----------------------------------------------------------------

def test_section_validation():
    with pytest.raises(ValueError):
        pc.SectionSpec("w", 0.0)
    with pytest.raises(ValueError):
        pc.SectionSpec("y", 0.0, "sideways")
    with pytest.raises(ValueError):
        pc.SectionSpec("y", 0.0, "rising", (("z", 1.0, 0.0),))


def test_section_coordinates_round_trip():
    sec = pc.SectionSpec("y", 0.3)
    y = sec.point([1.5, -2.0])
    assert y[1] == 0.3
    np.testing.assert_array_equal(sec.coords(y), [1.5, -2.0])
    assert sec.flipped().orientation == "falling"
    assert sec.flipped().flipped() == sec


def test_start_off_section_rejected(orbit):
    _, sec, params = orbit
    with pytest.raises(ValueError):
        pc.return_map(EXAMPLE, sec, np.array([0.5, 1e-6, 1.0]), params)


# -- return map ----------------------------------------------------------------

def test_periodic_point_maps_to_itself(orbit):
    orb, sec, params = orbit
    r = pc.return_map(EXAMPLE, sec, orb.section_point, params)
    assert np.linalg.norm(r.image.as_array() - orb.section_point.as_array()) < 1e-8
    assert r.flight_time > 0
    assert r.image.y == sec.value


def test_one_loop_has_one_rejected_crossing(orbit):
    # a relaxation loop crosses y = 0 twice; the rising crossing is rejected
    orb, sec, params = orbit
    r = pc.return_map(EXAMPLE, sec, orb.section_point, params)
    assert r.intermediate_crossings == 1
    assert r.flight_time == pytest.approx(orb.period, rel=1e-9)


def test_half_return_symmetry():
    params = Params(0.01, 1.0)
    sec = ex.sweep_section()
    lower = pc.SectionSpec("y", 0.0, "rising", (("z", -math.inf, 0.0),))
    q = np.array([0.5, 0.0, 1.0])
    half = pc.return_map(EXAMPLE, lower, q, params).image.as_array()
    mirrored = pc.return_map(EXAMPLE, sec, -q, params).image.as_array()
    assert np.abs(half + mirrored).max() < 1e-7


def test_recorded_trajectory_ends_on_image(orbit):
    orb, sec, params = orbit
    r = pc.return_map(EXAMPLE, sec, orb.section_point, params, record=True)
    np.testing.assert_allclose(r.trajectory(r.flight_time), r.image.as_array(), atol=1e-8)


def test_min_flight_time_skips_early_crossings(orbit):
    orb, sec, params = orbit
    r = pc.return_map(EXAMPLE, sec, orb.section_point, params, min_flight_time=1.5 * orb.period)
    assert r.flight_time == pytest.approx(2 * orb.period, rel=1e-8)


# -- periodic orbit ------------------------------------------------------------

def test_orbit_is_stable(orbit):
    orb, _, _ = orbit
    assert orb.residual <= 1e-9
    assert np.all(np.abs(orb.multipliers) < 1)
    # volume contraction of the section map
    assert np.prod(np.abs(orb.multipliers)) < 1
    assert orb.liouville_log_det < 0


def test_log_determinant_matches_liouville(orbit):
    orb, _, _ = orbit
    assert orb.log_abs_multipliers.sum() == pytest.approx(orb.liouville_log_det, rel=1e-3)


def test_derivative_eigenvalues_match_multipliers(orbit):
    orb, sec, params = orbit
    D = pc.return_map_derivative(EXAMPLE, sec, orb.section_point, params)
    lam = np.sort(np.abs(np.linalg.eigvals(D.matrix)))
    mult = np.sort(np.abs(orb.multipliers))
    assert np.abs(lam - mult).max() < 1e-4
    assert np.all(np.isfinite(D.error))


def test_newton_converges_quadratically(orbit):
    orb, sec, params = orbit
    guess = orb.section_point.as_array() + np.array([2e-3, 0.0, -3e-3])
    res = pc.find_periodic_orbit(EXAMPLE, sec, guess, params, tol=1e-9)
    h = res.residual_history
    assert res.residual <= 1e-9
    assert len(h) >= 2
    tail = h[-3:]
    for prev, cur in zip(tail[:-1], tail[1:]):
        assert cur <= 0.1 * prev
    assert np.linalg.norm(res.section_point.as_array() - orb.section_point.as_array()) < 1e-7


def test_multipliers_shrink_with_eps(orbit):
    orb, _, _ = orbit
    half = ex._orbit_at(EXAMPLE, ex.sweep_section(), Params(0.005, 1.0), ex.config_for("orbit"))
    assert half.log_abs_multipliers[0] < orb.log_abs_multipliers[0]


def test_canonical_model_has_no_orbit():
    sec = pc.SectionSpec("y", 0.0, "falling")
    with pytest.raises(NoReturn):
        pc.find_periodic_orbit(builtin_canonical_fold(1.0), sec, np.array([0.0, 0.0, 0.5]),
                               Params(0.01, 1.0))


def test_exponential_sensitivity_near_transition():
    # delta = eps sqrt(-log eps)
    eps = 0.01
    delta = eps * math.sqrt(-math.log(eps))
    params = Params(eps, delta)
    sec = ex.horseshoe_section(delta)
    Q = ex.slow_manifold_point(params, sec)
    D = pc.return_map_derivative(EXAMPLE, sec, sec.point(Q), params, min_flight_time=200.0)
    assert np.abs(np.linalg.eigvals(D.matrix)).max() > 1


# -- Lyapunov exponents --------------------------------------------------------

def test_lyapunov_linear_contraction():
    est = pc.lyapunov_exponent(lambda y: -y, lambda y: -np.eye(2), np.zeros(2), 50.0, 5.0)
    assert est.exponent == pytest.approx(-1.0, abs=1e-3)


def test_lyapunov_matches_multiplier(orbit):
    orb, _, params = orbit
    est = pc.lyapunov_max(EXAMPLE, orb.section_point, params, 3000.0, 50.0)
    expect = orb.log_abs_multipliers[0] / orb.period
    assert est.exponent < 0
    assert abs(est.exponent - expect) <= 0.2 * abs(expect)


# -- horseshoe -----------------------------------------------------------------

def test_degenerate_rectangle():
    sec = ex.horseshoe_section(1.0)
    rep = pc.horseshoe_test(EXAMPLE, ((-0.7, -0.6), (-1.2, -1.2)), Params(0.01, 1.0), section=sec)
    assert not rep.ring_detected
    assert not rep.certified
    assert rep.crossing_components == 0


def test_periodic_regime_contracts():
    eps = 0.01
    params = Params(eps, 1.0)
    sec = ex.horseshoe_section(1.0)
    Q = ex.slow_manifold_point(params, sec)
    h = 0.2 * eps
    w = 30 * h
    rep = pc.horseshoe_test(EXAMPLE, ((Q[0] - w / 2, Q[0] + w / 2), (Q[1] - h / 2, Q[1] + h / 2)),
                            params, grid=(6, 6), section=sec, center=Q, boundary_points=8,
                            min_flight_time=200.0)
    assert rep.contraction
    assert not rep.certified
    assert rep.crossing_components == 0


def test_crossings_found_by_transition_scan():
    eps = 0.01
    found = []
    for c1 in (1.165, 0.93):
        delta = c1 * eps * math.sqrt(-math.log(eps))
        params = Params(eps, delta)
        sec = ex.horseshoe_section(delta)
        Q = ex.slow_manifold_point(params, sec)
        h = 0.8 * eps
        w = 3 * h
        rep = pc.horseshoe_test(EXAMPLE, ((Q[0] - w / 2, Q[0] + w / 2), (Q[1] - h / 2, Q[1] + h / 2)),
                                params, grid=(24, 24), section=sec, center=Q, boundary_points=24,
                                min_flight_time=200.0)
        found.append(rep.crossing_components)
        if rep.certified:
            assert np.all(rep.inequality_values > 0)
        if rep.crossing_components >= 2:
            assert rep.strips is not None and len(rep.strips) == 2
            break
    assert max(found) >= 2


def test_winding_number_of_circle():
    t = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    circle = np.column_stack([np.cos(t), np.sin(t)])
    assert pc.winding_number(circle, (0, 0)) == pytest.approx(1.0)
    assert pc.winding_number(circle[::-1], (0, 0)) == pytest.approx(-1.0)
    assert pc.winding_number(circle, (3, 0)) == pytest.approx(0.0, abs=1e-12)


entry = st.floats(-5, 5, allow_nan=False)


@given(st.lists(entry, min_size=4, max_size=4))
def test_margins_ignore_signs(v):
    J = np.array(v).reshape(2, 2)
    if J[1, 1] == 0:
        J[1, 1] = 1.0
    m = pc.inequality_margins(J)
    np.testing.assert_allclose(pc.inequality_margins(-J), m)
    np.testing.assert_allclose(pc.inequality_margins(J * [[1, -1], [-1, 1]]), m)


@given(st.floats(0, 0.99), st.floats(1.01, 50))
def test_margins_positive_for_diagonal_saddle(a, e):
    m = pc.inequality_margins(np.diag([a, e]))
    assert np.all(m > 0)
    assert m[3] == pytest.approx(m[0] * m[1])


@given(st.lists(st.lists(entry, min_size=4, max_size=4), min_size=1, max_size=5))
def test_margins_vectorize(rows):
    Js = np.array(rows).reshape(-1, 2, 2)
    Js[:, 1, 1] = np.where(Js[:, 1, 1] == 0, 1.0, Js[:, 1, 1])
    stacked = pc.inequality_margins(Js)
    for J, m in zip(Js, stacked):
        np.testing.assert_allclose(pc.inequality_margins(J), m)
