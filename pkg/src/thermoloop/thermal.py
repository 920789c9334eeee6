"""Lumped RC thermal node with temperature-dependent leakage.

One package-level temperature node is driven by dynamic power plus a
leakage term ``P_g * exp(-B / T)``.  Because leakage grows with temperature
the node can settle at a fixed point or run away, depending on the
dynamic power applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

import numpy as np

KELVIN_OFFSET = 273.15
DEFAULT_CEILING = 500.0

# P_g such that the critical dynamic power is 5.5 W for R=10, T_amb=300, B=6500.
# Reproduced by stability.calibrate_leakage_prefactor().
DEFAULT_P_G = 67649994.88433245


class DomainError(ValueError):
    """Input outside the physical domain of the model."""


@dataclass(frozen=True)
class ThermalParams:
    """Thermal RC and leakage parameters.

    R is in K/W, C in J/K, T_amb and B in kelvin, P_g in watts.
    """

    R: float = 10.0
    C: float = 5.0
    T_amb: float = 300.0
    B: float = 6500.0
    P_g: float = DEFAULT_P_G

    def __post_init__(self):
        for name in ("R", "C", "T_amb", "B"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value!r}")
        if not (math.isfinite(self.P_g) and self.P_g >= 0):
            raise DomainError(f"P_g must be non-negative, got {self.P_g!r}")
        if self.B / self.T_amb <= 2:
            raise DomainError(
                f"B/T_amb must exceed 2 for a concave fixed-point function "
                f"(got {self.B / self.T_amb:.4g})"
            )

    @property
    def time_constant(self) -> float:
        return self.R * self.C

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> "ThermalParams":
        unknown = set(data) - {"R", "C", "T_amb", "B", "P_g"}
        if unknown:
            raise DomainError(f"unknown thermal parameter(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> dict:
        return {"R": self.R, "C": self.C, "T_amb": self.T_amb, "B": self.B, "P_g": self.P_g}


@dataclass
class PowerBreakdown:
    dynamic_per_component: dict[str, float]
    leakage: float

    @property
    def dynamic(self) -> float:
        return math.fsum(self.dynamic_per_component.values())

    @property
    def total(self) -> float:
        return math.fsum([*self.dynamic_per_component.values(), self.leakage])


def leakage_power(params: ThermalParams, T: float) -> float:
    """Leakage power in watts at absolute temperature ``T``."""
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T!r}")
    if params.P_g == 0:
        return 0.0
    return params.P_g * math.exp(-params.B / T)


def temperature_derivative(params: ThermalParams, P_dyn: float, T: float) -> float:
    """dT/dt of the lumped node in K/s."""
    if P_dyn < 0:
        raise DomainError(f"dynamic power must be non-negative, got {P_dyn!r}")
    heat = params.T_amb + params.R * (P_dyn + leakage_power(params, T))
    return (heat - T) / (params.R * params.C)


PowerSchedule = Union[float, Callable[[float], float]]


@dataclass
class Trajectory:
    t: np.ndarray
    T: np.ndarray
    runaway: bool = False
    stopped: bool = field(default=False)

    @property
    def final(self) -> float:
        return float(self.T[-1])


def rk4_step(params: ThermalParams, power: Callable[[float], float], t: float, T: float, dt: float) -> float:
    k1 = temperature_derivative(params, power(t), T)
    k2 = temperature_derivative(params, power(t + dt / 2), T + dt * k1 / 2)
    k3 = temperature_derivative(params, power(t + dt / 2), T + dt * k2 / 2)
    k4 = temperature_derivative(params, power(t + dt), T + dt * k3)
    return T + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6


def n_steps(duration: float, dt: float) -> int:
    # tolerate representation error such as 100 / 0.01 = 10000.000000000002
    return int(math.floor(duration / dt + 1e-9))


def integrate(
    params: ThermalParams,
    power_schedule: PowerSchedule,
    T0: float,
    dt: float,
    duration: float,
    ceiling: float = DEFAULT_CEILING,
    until: Callable[[float, float], bool] | None = None,
) -> Trajectory:
    """Fixed-step RK4 integration of the node temperature.

    ``power_schedule`` is either a constant dynamic power or a function of
    time.  The run stops early, with ``runaway=True``, once the temperature
    exceeds ``ceiling``; or with ``stopped=True`` once ``until(t, T)`` holds.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    if duration < dt:
        raise DomainError("duration must be at least dt")
    if not T0 > 0:
        raise DomainError("T0 must be positive")
    if callable(power_schedule):
        power = power_schedule
    else:
        constant = float(power_schedule)
        power = lambda _t: constant  # noqa: E731

    steps = n_steps(duration, dt)
    ts = [0.0]
    Ts = [float(T0)]
    runaway = stopped = False
    T = float(T0)
    if until is not None and until(0.0, T):
        stopped = True
    else:
        for k in range(steps):
            t = k * dt
            T = rk4_step(params, power, t, T, dt)
            ts.append((k + 1) * dt)
            Ts.append(T)
            if T > ceiling or not math.isfinite(T):
                runaway = True
                break
            if until is not None and until(ts[-1], T):
                stopped = True
                break
    return Trajectory(np.asarray(ts), np.asarray(Ts), runaway=runaway, stopped=stopped)


def to_celsius(T: float) -> float:
    return T - KELVIN_OFFSET


def to_kelvin(T_c: float) -> float:
    return T_c + KELVIN_OFFSET
