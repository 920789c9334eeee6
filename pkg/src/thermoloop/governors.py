"""DVFS and thermal governors evaluated once per governor period.

``interactive_dvfs`` picks OPPs and always runs underneath the thermal
governors.  ``trip_point_tick`` is the throttle-everything baseline and
``proposed_tick`` predicts the fixed-point temperature and migrates the
most power-hungry background process to the little cluster instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

from .platform import BIG, LITTLE, Platform, UnknownProcess, windowed_process_power
from .stability import analyze_fixed_points, time_to_temperature
from .trace import TraceSample

GOVERNORS = ("none", "interactive", "trip", "proposed")


@dataclass
class GovernorConfig:
    thermal_limit: float
    period: float = 0.1
    time_limit: float = 10.0
    trip_points: tuple[float, ...] = ()
    epsilon: float = 0.5
    hysteresis: float = 2.0
    window: float = 1.0
    prediction_dt: float = 0.1
    restore: bool = False
    trend: bool = False

    def __post_init__(self):
        self.trip_points = tuple(float(t) for t in self.trip_points)
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if any(b <= a for a, b in zip(self.trip_points, self.trip_points[1:])):
            raise ValueError("trip_points must be strictly ascending")
        if self.epsilon <= 0 or self.window <= 0 or self.prediction_dt <= 0:
            raise ValueError("epsilon, window and prediction_dt must be positive")

    @property
    def trips(self) -> tuple[float, ...]:
        return self.trip_points or (self.thermal_limit,)


@dataclass(frozen=True)
class ThrottleAll:
    steps: int = 1

    @property
    def tag(self) -> str:
        return f"throttle:{self.steps}"


@dataclass(frozen=True)
class Restore:
    steps: int = 1

    @property
    def tag(self) -> str:
        return f"restore:{self.steps}"


@dataclass(frozen=True)
class Migrate:
    pid: int
    target: str

    @property
    def tag(self) -> str:
        return f"migrate:{self.pid}:{self.target}"


Decision = Union[ThrottleAll, Restore, Migrate, None]


def decision_tag(decision: Decision) -> str:
    return "none" if decision is None else decision.tag


def apply_decision(platform: Platform, decision: Decision) -> None:
    if decision is None:
        return
    if isinstance(decision, ThrottleAll):
        platform.set_throttle_depth(platform.throttle_depth + decision.steps)
    elif isinstance(decision, Restore):
        platform.set_throttle_depth(platform.throttle_depth - decision.steps)
    elif isinstance(decision, Migrate):
        platform.migrate(decision.pid, decision.target)
    else:
        raise TypeError(f"not a governor decision: {decision!r}")


def interactive_dvfs(platform: Platform) -> dict[str, int]:
    """OPP index per cluster: busy clusters jump to the top allowed OPP,
    idle ones walk down one step per call."""
    choices = {}
    for cid, cluster in platform.clusters.items():
        cap = platform.opp_cap(cid)
        if platform.cluster_utilization(cid) > 0:
            choices[cid] = cap
        else:
            choices[cid] = min(max(cluster.current_opp - 1, 0), cap)
    return choices


def apply_opps(platform: Platform, choices: dict[str, int]) -> None:
    for cid, index in choices.items():
        platform.clusters[cid].current_opp = index


def trip_point_tick(
    platform: Platform, config: GovernorConfig, previous_T: float | None = None
) -> Decision:
    """Throttle every cluster one OPP while above the trip point, restore
    one OPP once below it by more than the hysteresis.

    With ``config.trend`` set, throttling additionally requires that the
    temperature is not falling since ``previous_T`` and restoring that it is
    not rising, like the kernel's step-wise policy.
    """
    trip = config.trips[0]
    T = platform.T
    rising = falling = True
    if config.trend and previous_T is not None:
        rising, falling = T >= previous_T, T <= previous_T
    if T >= trip:
        return ThrottleAll(1) if rising else None
    if T < trip - config.hysteresis and platform.throttle_depth > 0 and falling:
        return Restore(1)
    return None


def register_realtime(platform: Platform, pid: int) -> None:
    """Exclude ``pid`` from migration for the rest of the run."""
    platform.register_realtime(pid)


def _violation_imminent(platform: Platform, p_dyn: float, config: GovernorConfig) -> bool | None:
    """True if the limit will be crossed within ``time_limit``; None if no violation is predicted."""
    fp = analyze_fixed_points(platform.params, p_dyn, ceiling=platform.ceiling)
    T = platform.T
    beyond_unstable = fp.unstable_T is not None and T > fp.unstable_T
    if fp.stable_T is not None and fp.stable_T <= config.thermal_limit and not beyond_unstable:
        return None
    if fp.stable_T is None or beyond_unstable:
        return True
    t_reach = time_to_temperature(
        platform.params,
        T,
        p_dyn,
        config.thermal_limit,
        horizon=config.time_limit + config.prediction_dt,
        dt=config.prediction_dt,
        ceiling=platform.ceiling,
    )
    return t_reach is not None and t_reach <= config.time_limit


def _restore(platform: Platform, config: GovernorConfig) -> Decision:
    if platform.throttle_depth > 0:
        return Restore(1)
    for pid, origin, target in reversed(platform.migrations):
        proc = platform.processes[pid]
        if proc.assigned_cluster != target or target != LITTLE:
            continue
        p_back = platform.dynamic_power({pid: origin})
        fp = analyze_fixed_points(platform.params, p_back, ceiling=platform.ceiling)
        if fp.stable_T is not None and fp.stable_T <= config.thermal_limit - config.epsilon:
            return Migrate(pid, origin)
        return None
    return None


def proposed_tick(
    platform: Platform, history: Sequence[TraceSample], config: GovernorConfig
) -> Decision:
    p_dyn = platform.dynamic_power()
    imminent = _violation_imminent(platform, p_dyn, config)
    if imminent is None:
        return _restore(platform, config) if config.restore else None
    if not imminent:
        return None

    best, best_power = None, 0.0
    for pid in sorted(platform.processes):
        proc = platform.processes[pid]
        if proc.assigned_cluster != BIG or proc.realtime_exempt:
            continue
        try:
            power = windowed_process_power(history, pid, config.window)
        except UnknownProcess:
            power = platform.process_powers()[pid]
        if power > best_power:
            best, best_power = pid, power
    if best is None:
        return ThrottleAll(1)
    return Migrate(best, LITTLE)


@dataclass
class GovernorStack:
    """Thermal governor ``name`` on top of the interactive DVFS baseline."""

    name: str
    config: GovernorConfig
    decisions: list[tuple[float, Decision]] = field(default_factory=list)
    last_T: float | None = None

    def __post_init__(self):
        if self.name not in GOVERNORS:
            raise ValueError(f"unknown governor {self.name!r}; expected one of {GOVERNORS}")

    def tick(self, platform: Platform, history: Sequence[TraceSample]) -> str:
        if self.name == "none":
            return ""
        decision: Decision = None
        if self.name == "trip":
            decision = trip_point_tick(platform, self.config, self.last_T)
        elif self.name == "proposed":
            decision = proposed_tick(platform, history, self.config)
        self.last_T = platform.T
        apply_decision(platform, decision)
        apply_opps(platform, interactive_dvfs(platform))
        if decision is not None:
            self.decisions.append((platform.t, decision))
        return decision_tag(decision)


def is_tick(step: int, dt: float, period: float) -> bool:
    every = max(1, int(round(period / dt)))
    return step % every == 0

