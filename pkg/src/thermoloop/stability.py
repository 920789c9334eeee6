"""Fixed points of the power-temperature feedback loop.

Working in the auxiliary temperature ``theta = B / T`` the steady-state
condition ``T = T_amb + R * (P_dyn + P_g * exp(-B / T))`` becomes the root
problem

    F(theta) = B - A * theta - G * theta * exp(-theta) = 0,

with ``A = T_amb + R * P_dyn`` and ``G = R * P_g``.  F is concave for
``theta > 2`` so it has two, one or no roots.  The larger-theta root (the
cooler one) is the stable fixed point; the other one is the threshold beyond
which the temperature runs away.

Sign convention: F(theta) < 0 means the temperature is rising at that point.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from .thermal import (
    DEFAULT_CEILING,
    DomainError,
    ThermalParams,
    integrate,
)

CONCAVITY_MARGIN = 1e-6
DEFAULT_GRID = 4096
ROOT_TOL = 1e-9
POWER_TOL = 1e-6


class Classification(str, enum.Enum):
    STABLE = "Stable"
    MARGINAL = "Marginal"
    UNSTABLE = "Unstable"


class Reach(str, enum.Enum):
    """Non-numeric outcomes of :func:`time_to_fixed_point`."""

    UNREACHABLE = "Unreachable"
    RUNAWAY = "Runaway"


@dataclass(frozen=True)
class FixedPointAnalysis:
    power: float
    root_count: int
    stable_T: float | None
    unstable_T: float | None
    classification: Classification

    @property
    def has_fixed_point(self) -> bool:
        return self.stable_T is not None


def to_auxiliary(params: ThermalParams, T):
    if np.any(np.asarray(T) <= 0):
        raise DomainError("temperature must be positive")
    return params.B / T


def from_auxiliary(params: ThermalParams, theta):
    if np.any(np.asarray(theta) <= 0):
        raise DomainError("auxiliary temperature must be positive")
    return params.B / theta


def fixed_point_function(params: ThermalParams, P_dyn: float, theta):
    """F(theta) for dynamic power ``P_dyn``; accepts scalars or arrays."""
    if np.any(np.asarray(theta) <= 0):
        raise DomainError("auxiliary temperature must be positive")
    A = params.T_amb + params.R * P_dyn
    G = params.R * params.P_g
    return params.B - A * theta - G * theta * np.exp(-theta)


def fixed_point_slope(params: ThermalParams, P_dyn: float, theta):
    """dF/dtheta."""
    A = params.T_amb + params.R * P_dyn
    G = params.R * params.P_g
    return -A + G * np.exp(-theta) * (theta - 1.0)


def scan_domain(params: ThermalParams, ceiling: float = DEFAULT_CEILING) -> tuple[float, float]:
    """(theta_min, theta_max): from the runaway ceiling down to ambient."""
    return max(2.0 + CONCAVITY_MARGIN, params.B / ceiling), params.B / params.T_amb


def _bisect(f, lo: float, hi: float, tol: float) -> float:
    f_lo = f(lo)
    if f_lo == 0:
        return lo
    if f(hi) == 0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _peak(params: ThermalParams, P_dyn: float, lo: float, hi: float) -> float:
    """theta maximizing the concave F on [lo, hi]."""
    slope = lambda th: float(fixed_point_slope(params, P_dyn, th))  # noqa: E731
    if slope(lo) <= 0:
        return lo
    if slope(hi) >= 0:
        return hi
    return _bisect(slope, lo, hi, ROOT_TOL)


def find_roots(
    params: ThermalParams,
    P_dyn: float,
    grid: int = DEFAULT_GRID,
    ceiling: float = DEFAULT_CEILING,
) -> list[float]:
    """Roots of F in the scan domain, ascending in theta.

    Sign changes on a uniform grid are refined by bisection.  When the grid
    shows none, the concave peak is checked as well so that a pair of roots
    closer together than one grid cell is not lost.
    """
    lo, hi = scan_domain(params, ceiling)
    thetas = np.linspace(lo, hi, grid)
    values = fixed_point_function(params, P_dyn, thetas)
    f = lambda th: float(fixed_point_function(params, P_dyn, th))  # noqa: E731

    brackets = [(thetas[i], thetas[i]) for i in np.flatnonzero(values == 0)]
    crossings = np.flatnonzero(values[:-1] * values[1:] < 0)
    brackets += [(thetas[i], thetas[i + 1]) for i in crossings]
    brackets.sort()

    if not brackets:
        i = int(np.argmax(values))
        left, right = thetas[max(i - 1, 0)], thetas[min(i + 1, grid - 1)]
        peak = _peak(params, P_dyn, left, right)
        if f(peak) > 0:
            brackets = [(left, peak), (peak, right)]
        elif f(peak) == 0:
            return [float(peak)]

    return [float(a) if a == b else float(_bisect(f, a, b, ROOT_TOL)) for a, b in brackets]


@functools.lru_cache(maxsize=256)
def critical_power(params: ThermalParams, ceiling: float = DEFAULT_CEILING) -> float | None:
    """Dynamic power at which the two fixed points merge.

    Returns None when P_g is zero: without leakage every finite power has a
    fixed point.
    """
    if params.P_g == 0:
        return None
    lo_th, hi_th = scan_domain(params, ceiling)

    def has_two_roots(P: float) -> bool:
        peak = _peak(params, P, lo_th, hi_th)
        return float(fixed_point_function(params, P, peak)) > 0

    lo, hi = 0.0, 1.0
    if not has_two_roots(lo):
        return 0.0
    while has_two_roots(hi):
        lo, hi = hi, 2 * hi
    while hi - lo > POWER_TOL:
        mid = 0.5 * (lo + hi)
        if has_two_roots(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def analyze_fixed_points(
    params: ThermalParams,
    P_dyn: float,
    grid: int = DEFAULT_GRID,
    ceiling: float = DEFAULT_CEILING,
) -> FixedPointAnalysis:
    if P_dyn < 0:
        raise DomainError(f"dynamic power must be non-negative, got {P_dyn!r}")

    if params.P_g == 0:
        T = params.T_amb + params.R * P_dyn
        return FixedPointAnalysis(P_dyn, 1, T, None, Classification.STABLE)

    p_crit = critical_power(params, ceiling)
    if abs(P_dyn - p_crit) < POWER_TOL:
        lo, hi = scan_domain(params, ceiling)
        T = params.B / _peak(params, P_dyn, lo, hi)
        return FixedPointAnalysis(P_dyn, 1, T, T, Classification.MARGINAL)

    roots = find_roots(params, P_dyn, grid, ceiling)
    if not roots:
        return FixedPointAnalysis(P_dyn, 0, None, None, Classification.UNSTABLE)
    if len(roots) == 2:
        return FixedPointAnalysis(
            P_dyn, 2, params.B / roots[1], params.B / roots[0], Classification.STABLE
        )
    # a single crossing: the partner root lies beyond the scan domain
    theta = roots[0]
    if fixed_point_slope(params, P_dyn, theta) < 0:
        return FixedPointAnalysis(P_dyn, 1, params.B / theta, None, Classification.STABLE)
    return FixedPointAnalysis(P_dyn, 1, None, params.B / theta, Classification.UNSTABLE)


def calibrate_leakage_prefactor(
    target_critical_power: float,
    R: float = 10.0,
    C: float = 5.0,
    T_amb: float = 300.0,
    B: float = 6500.0,
    ceiling: float = DEFAULT_CEILING,
) -> float:
    """P_g whose critical power equals ``target_critical_power``.

    Bisects on log(P_g) until the peak of F at the target power touches zero,
    i.e. until F = 0 and F' = 0 hold together.
    """

    def peak_value(log_pg: float) -> float:
        params = ThermalParams(R=R, C=C, T_amb=T_amb, B=B, P_g=math.exp(log_pg))
        lo, hi = scan_domain(params, ceiling)
        peak = _peak(params, target_critical_power, lo, hi)
        return float(fixed_point_function(params, target_critical_power, peak))

    lo, hi = -50.0, 100.0
    if peak_value(lo) <= 0 or peak_value(hi) >= 0:
        raise DomainError("target critical power is not attainable with these parameters")
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        if peak_value(mid) > 0:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def time_to_temperature(
    params: ThermalParams,
    T0: float,
    P_dyn: float,
    target: float,
    horizon: float,
    dt: float = 0.1,
    ceiling: float = DEFAULT_CEILING,
) -> float | None:
    """Time until the trajectory from T0 first reaches ``target`` from below.

    None if it does not within ``horizon`` seconds.
    """
    if T0 >= target:
        return 0.0
    traj = integrate(
        params, P_dyn, T0, dt, horizon, ceiling=ceiling, until=lambda _t, T: T >= target
    )
    if traj.stopped or traj.runaway:
        return float(traj.t[-1])
    return None


def time_to_fixed_point(
    params: ThermalParams,
    T0: float,
    P_dyn: float,
    epsilon: float,
    horizon: float = 1000.0,
    dt: float = 0.01,
    ceiling: float = DEFAULT_CEILING,
) -> float | Reach:
    """Seconds until the temperature is within ``epsilon`` of the stable point."""
    if not T0 > 0:
        raise DomainError("T0 must be positive")
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    fp = analyze_fixed_points(params, P_dyn, ceiling=ceiling)
    if fp.stable_T is None:
        return Reach.RUNAWAY
    if fp.unstable_T is not None and T0 > fp.unstable_T:
        return Reach.RUNAWAY
    stable = fp.stable_T
    if abs(T0 - stable) <= epsilon:
        return 0.0
    traj = integrate(
        params,
        P_dyn,
        T0,
        dt,
        horizon,
        ceiling=ceiling,
        until=lambda _t, T: abs(T - stable) <= epsilon,
    )
    if traj.stopped:
        return float(traj.t[-1])
    if traj.runaway:
        return Reach.RUNAWAY
    return Reach.UNREACHABLE
