import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoloop.stability import (
    Classification,
    Reach,
    analyze_fixed_points,
    calibrate_leakage_prefactor,
    critical_power,
    find_roots,
    fixed_point_function,
    fixed_point_slope,
    from_auxiliary,
    scan_domain,
    time_to_fixed_point,
    time_to_temperature,
    to_auxiliary,
)
from thermoloop.thermal import DEFAULT_P_G, DomainError, ThermalParams, integrate

# mpmath findroot at 40 digits on F(theta) for P = 2 W
STABLE_2W = 321.0931883501056
UNSTABLE_2W = 410.7636853442145
# tangency of F: with G = R * P_g, G * theta^2 * exp(-theta) = B, then A = G * exp(-theta) * (theta - 1)
TANGENT_THETA = 17.248314309047122


def tangency_critical_power(params):
    G = params.R * params.P_g
    # log form, bracketed on the concave branch theta > 2
    g = lambda t: mpmath.log(G) - mpmath.log(params.B) + 2 * mpmath.log(t) - t  # noqa: E731
    theta = mpmath.findroot(g, (2.0, 40.0), solver="anderson")
    A = G * mpmath.exp(-theta) * (theta - 1)
    return float((A - params.T_amb) / params.R), float(theta)


def dense_sign_changes(params, P, n=1_000_000):
    lo, hi = scan_domain(params)
    th = np.linspace(lo, hi, n)
    v = fixed_point_function(params, P, th)
    return int(np.count_nonzero(np.sign(v[:-1]) != np.sign(v[1:])))


def test_auxiliary_examples():
    p = ThermalParams()
    assert to_auxiliary(p, 6500.0) == 1.0
    assert to_auxiliary(p, 325.0) == 20.0


@given(st.floats(250.0, 450.0))
def test_auxiliary_round_trip(T):
    p = ThermalParams()
    assert math.isclose(from_auxiliary(p, to_auxiliary(p, T)), T, rel_tol=0, abs_tol=math.ulp(T))


def test_auxiliary_rejects_non_positive():
    with pytest.raises(DomainError):
        to_auxiliary(ThermalParams(), 0.0)


def test_linear_without_leakage(no_leak):
    th = np.linspace(3, 21, 50)
    assert np.allclose(fixed_point_function(no_leak, 2.0, th), 6500 - 320 * th)
    assert find_roots(no_leak, 2.0) == [pytest.approx(6500 / 320, abs=1e-8)]


def test_two_sign_changes_at_2w(defaults):
    assert dense_sign_changes(defaults, 2.0) == 2


def test_negative_everywhere_at_8w(defaults):
    lo, hi = scan_domain(defaults)
    assert np.all(fixed_point_function(defaults, 8.0, np.linspace(lo, hi, 100_000)) < 0)


def test_roots_at_2w_match_oracle(defaults):
    fp = analyze_fixed_points(defaults, 2.0)
    assert fp.root_count == 2
    assert fp.classification is Classification.STABLE
    assert fp.stable_T == pytest.approx(STABLE_2W, abs=1e-6)
    assert fp.unstable_T == pytest.approx(UNSTABLE_2W, abs=1e-6)


def test_no_roots_at_8w(defaults):
    fp = analyze_fixed_points(defaults, 8.0)
    assert (fp.root_count, fp.classification) == (0, Classification.UNSTABLE)
    assert fp.stable_T is None and fp.unstable_T is None


def test_no_leakage_closed_form(no_leak):
    fp = analyze_fixed_points(no_leak, 2.0)
    assert (fp.root_count, fp.stable_T, fp.unstable_T) == (1, 320.0, None)


def test_negative_power_rejected(defaults):
    with pytest.raises(DomainError):
        analyze_fixed_points(defaults, -1.0)


def test_critical_power_matches_tangency(defaults):
    expected, theta = tangency_critical_power(defaults)
    assert theta == pytest.approx(TANGENT_THETA, abs=1e-9)
    assert critical_power(defaults) == pytest.approx(expected, abs=1e-5)
    assert critical_power(defaults) == pytest.approx(5.5, abs=0.05)


def test_critical_power_tangency_is_marginal(defaults):
    fp = analyze_fixed_points(defaults, critical_power(defaults))
    assert fp.classification is Classification.MARGINAL
    assert fp.root_count == 1
    assert fp.stable_T == pytest.approx(6500 / TANGENT_THETA, abs=1e-3)


def test_no_critical_power_without_leakage(no_leak):
    assert critical_power(no_leak) is None


def test_larger_resistance_lowers_critical_power(defaults):
    doubled = ThermalParams(R=2 * defaults.R)
    assert critical_power(doubled) < critical_power(defaults)
    assert critical_power(doubled) == pytest.approx(tangency_critical_power(doubled)[0], abs=1e-5)


def test_root_counts_around_critical_power(defaults):
    p_crit = critical_power(defaults)
    assert analyze_fixed_points(defaults, p_crit - 1e-3).root_count == 2
    assert analyze_fixed_points(defaults, p_crit + 1e-3).root_count == 0


def test_near_tangent_pair_found_between_grid_points(defaults):
    p_crit = critical_power(defaults)
    roots = find_roots(defaults, p_crit - 1e-5, grid=16)
    assert len(roots) == 2


def test_calibration_reproduces_default_prefactor():
    assert calibrate_leakage_prefactor(5.5) == pytest.approx(DEFAULT_P_G, rel=1e-9)


def test_calibration_unattainable_target():
    with pytest.raises(DomainError):
        calibrate_leakage_prefactor(1e6)


@pytest.mark.parametrize("P", [0.0, 2.0, 5.5, 8.0])
def test_concave_on_scan_domain(defaults, P):
    lo, hi = scan_domain(defaults)
    th = np.linspace(lo, hi, 2000)
    h = 1e-3
    second = (
        fixed_point_function(defaults, P, th + h)
        - 2 * fixed_point_function(defaults, P, th)
        + fixed_point_function(defaults, P, th - h)
    ) / h**2
    assert np.all(second < 0)


@settings(max_examples=50)
@given(st.floats(0.0, 10.0), st.floats(0.01, 5.0), st.floats(2.5, 21.6))
def test_function_decreasing_in_power(P, dP, theta):
    p = ThermalParams()
    assert fixed_point_function(p, P + dP, theta) < fixed_point_function(p, P, theta)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 5.4))
def test_stable_root_is_attracting(P):
    p = ThermalParams()
    fp = analyze_fixed_points(p, P)
    assert fp.root_count == 2 and fp.stable_T < fp.unstable_T
    theta_s = to_auxiliary(p, fp.stable_T)
    theta_u = to_auxiliary(p, fp.unstable_T)
    assert fixed_point_slope(p, P, theta_s) < 0 < fixed_point_slope(p, P, theta_u)
    # F vanishes at both roots to bisection accuracy
    assert abs(fixed_point_function(p, P, theta_s)) < 1e-4
    assert abs(fixed_point_function(p, P, theta_u)) < 1e-4


def test_time_to_fixed_point_zero_when_there(defaults):
    fp = analyze_fixed_points(defaults, 2.0)
    assert time_to_fixed_point(defaults, fp.stable_T, 2.0, 0.5) == 0.0


def test_time_to_fixed_point_self_consistent(defaults):
    t = time_to_fixed_point(defaults, 300.0, 2.0, 0.5)
    assert isinstance(t, float) and 0 < t < 1000
    traj = integrate(defaults, 2.0, 300.0, 0.01, t)
    assert abs(traj.final - STABLE_2W) <= 0.5 + 1e-9
    earlier = integrate(defaults, 2.0, 300.0, 0.01, t - 0.1)
    assert abs(earlier.final - STABLE_2W) > 0.5


def test_time_to_fixed_point_runaway(defaults):
    assert time_to_fixed_point(defaults, 300.0, 8.0, 0.5) is Reach.RUNAWAY
    assert time_to_fixed_point(defaults, UNSTABLE_2W + 1, 2.0, 0.5) is Reach.RUNAWAY


def test_time_to_fixed_point_unreachable_within_horizon(defaults):
    assert time_to_fixed_point(defaults, 300.0, 2.0, 0.5, horizon=10.0) is Reach.UNREACHABLE


def test_time_to_fixed_point_errors(defaults):
    with pytest.raises(DomainError):
        time_to_fixed_point(defaults, 300.0, 2.0, 0.0)
    with pytest.raises(DomainError):
        time_to_fixed_point(defaults, -1.0, 2.0, 0.5)


def test_time_to_temperature(no_leak):
    # closed form: 300 + 20 (1 - exp(-t / 50)) = 310 at t = 50 ln 2
    t = time_to_temperature(no_leak, 300.0, 2.0, 310.0, horizon=100.0, dt=0.01)
    assert t == pytest.approx(50 * math.log(2), abs=0.011)
    assert time_to_temperature(no_leak, 300.0, 2.0, 330.0, horizon=100.0) is None
    assert time_to_temperature(no_leak, 315.0, 2.0, 310.0, horizon=100.0) == 0.0
