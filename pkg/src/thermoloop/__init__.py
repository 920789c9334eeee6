"""Power-temperature fixed-point analysis and application-aware thermal governors
for a little + big + GPU mobile SoC."""

from .governors import GovernorConfig, Migrate, Restore, ThrottleAll
from .simulation import Scenario, bundled_scenario, load_scenario, simulate
from .stability import (
    Classification,
    FixedPointAnalysis,
    Reach,
    analyze_fixed_points,
    critical_power,
    time_to_fixed_point,
)
from .thermal import DomainError, PowerBreakdown, ThermalParams, integrate, leakage_power

__version__ = "0.1.0"

__all__ = [
    "Classification",
    "DomainError",
    "FixedPointAnalysis",
    "GovernorConfig",
    "Migrate",
    "PowerBreakdown",
    "Reach",
    "Restore",
    "Scenario",
    "ThermalParams",
    "ThrottleAll",
    "analyze_fixed_points",
    "bundled_scenario",
    "critical_power",
    "integrate",
    "leakage_power",
    "load_scenario",
    "simulate",
    "time_to_fixed_point",
]
