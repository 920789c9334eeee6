"""Scenario files and the fixed-step simulation loop."""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Any

import jsonschema

from .governors import GOVERNORS, Decision, GovernorConfig, GovernorStack, is_tick
from .platform import (
    AppFrameModel,
    Cluster,
    DemandSchedule,
    OPP,
    Platform,
    Process,
    default_clusters,
    linear_opp_table,
)
from .thermal import DEFAULT_CEILING, ThermalParams, n_steps
from .trace import COMPONENTS, TraceSample, write_trace

_number = {"type": "number"}
_positive = {"type": "number", "exclusiveMinimum": 0}

_cluster_schema = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "freqs": {"type": "array", "items": _positive, "minItems": 1},
        "cap_coeff": {"type": "number", "minimum": 0},
        "v_min": _positive,
        "v_max": _positive,
        "opps": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": _number, "minItems": 3, "maxItems": 3},
        },
        "perf_scale": _positive,
        "initial_opp": {"type": "integer", "minimum": 0},
    },
}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "duration", "processes", "governor"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "duration": _positive,
        "dt": _positive,
        "seed": {"type": "integer", "minimum": 0},
        "jitter": {"type": "number", "minimum": 0, "maximum": 1},
        "T0": _positive,
        "ceiling": _positive,
        "thermal": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _number for k in ("R", "C", "T_amb", "B", "P_g")},
        },
        "clusters": {
            "type": "object",
            "additionalProperties": False,
            "properties": {c: _cluster_schema for c in COMPONENTS},
        },
        "processes": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["pid", "cluster", "demand"],
                "properties": {
                    "pid": {"type": "integer"},
                    "name": {"type": "string"},
                    "cluster": {"enum": list(COMPONENTS)},
                    "demand": {
                        "oneOf": [
                            {"type": "number", "minimum": 0, "maximum": 1},
                            {
                                "type": "array",
                                "minItems": 1,
                                "items": {
                                    "type": "array",
                                    "minItems": 2,
                                    "maxItems": 2,
                                    "items": _number,
                                },
                            },
                        ]
                    },
                    "repeat": _positive,
                    "jitter": {"type": "number", "minimum": 0, "maximum": 1},
                    "realtime": {"type": "boolean"},
                    "foreground": {"type": "boolean"},
                },
            },
        },
        "app": {
            "type": "object",
            "additionalProperties": False,
            "required": ["render_pid", "work_per_frame", "target_fps"],
            "properties": {
                "render_pid": {"type": "integer"},
                "work_per_frame": _positive,
                "target_fps": _positive,
            },
        },
        "governor": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name", "thermal_limit"],
            "properties": {
                "name": {"enum": list(GOVERNORS)},
                "thermal_limit": _positive,
                "period": _positive,
                "time_limit": _positive,
                "trip_points": {"type": "array", "items": _positive},
                "epsilon": _positive,
                "hysteresis": {"type": "number", "minimum": 0},
                "window": _positive,
                "restore": {"type": "boolean"},
                "trend": {"type": "boolean"},
            },
        },
    },
}

BUNDLED = ("3dmark_alone", "3dmark_bml", "nenamark_analog", "paperio_analog")


class ScenarioError(ValueError):
    """Invalid scenario document; the message names the offending field or line."""


@dataclass
class Scenario:
    name: str
    params: ThermalParams
    clusters: dict[str, dict]
    processes: list[dict]
    app: dict | None
    governor: str
    config: GovernorConfig
    duration: float
    dt: float = 0.01
    seed: int = 0
    jitter: float = 0.0
    T0: float | None = None
    ceiling: float = DEFAULT_CEILING
    source: dict = field(default_factory=dict, repr=False)

    def build_platform(self) -> Platform:
        clusters = default_clusters()
        for cid, spec in self.clusters.items():
            clusters[cid] = _build_cluster(cid, spec, clusters[cid])
        processes = {}
        for spec in self.processes:
            demand = spec["demand"]
            segments = [(0.0, demand)] if isinstance(demand, (int, float)) else demand
            proc = Process(
                pid=spec["pid"],
                name=spec.get("name", ""),
                demand=DemandSchedule(segments, spec.get("repeat")),
                assigned_cluster=spec["cluster"],
                realtime_exempt=spec.get("realtime", False),
                is_foreground_app=spec.get("foreground", False),
                jitter=spec.get("jitter", self.jitter),
            )
            processes[proc.pid] = proc
        app = AppFrameModel(**self.app) if self.app else None
        return Platform(
            params=self.params,
            clusters=clusters,
            processes=processes,
            app=app,
            T=self.T0,
            seed=self.seed,
            ceiling=self.ceiling,
        )

    def with_governor(self, name: str) -> "Scenario":
        if name not in GOVERNORS:
            raise ScenarioError(f"governor: unknown governor {name!r}")
        return replace(self, governor=name)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)


def _build_cluster(cid: str, spec: dict, default: Cluster) -> Cluster:
    if "opps" in spec:
        table = [OPP(*map(float, row)) for row in spec["opps"]]
    elif "freqs" in spec or "cap_coeff" in spec:
        freqs = spec.get("freqs", default.frequencies)
        cap = spec.get("cap_coeff", default.opp_table[0].cap_coeff)
        table = linear_opp_table(freqs, cap, spec.get("v_min", 1.0), spec.get("v_max", 1.25))
    else:
        table = list(default.opp_table)
    return Cluster(cid, table, spec.get("perf_scale", default.perf_scale), spec.get("initial_opp"))


def scenario_from_dict(doc: Any) -> Scenario:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {err.message}")

    try:
        params = ThermalParams.from_dict(doc.get("thermal", {}))
    except ValueError as exc:
        raise ScenarioError(f"thermal: {exc}") from None
    gov = dict(doc["governor"])
    name = gov.pop("name")
    try:
        config = GovernorConfig(**gov)
    except ValueError as exc:
        raise ScenarioError(f"governor: {exc}") from None

    pids = [p["pid"] for p in doc["processes"]]
    if len(set(pids)) != len(pids):
        raise ScenarioError("processes: duplicate pid")
    app = doc.get("app")
    if app and app["render_pid"] not in pids:
        raise ScenarioError("app/render_pid: not a listed process")

    scenario = Scenario(
        name=doc["name"],
        params=params,
        clusters=doc.get("clusters", {}),
        processes=doc["processes"],
        app=app,
        governor=name,
        config=config,
        duration=float(doc["duration"]),
        dt=float(doc.get("dt", 0.01)),
        seed=int(doc.get("seed", 0)),
        jitter=float(doc.get("jitter", 0.0)),
        T0=doc.get("T0"),
        ceiling=float(doc.get("ceiling", DEFAULT_CEILING)),
        source=copy.deepcopy(doc),
    )
    try:
        scenario.build_platform()
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    return scenario


def load_scenario(path: str | os.PathLike) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(doc)


def bundled_scenario(name: str) -> Scenario:
    """One of the scenarios shipped with the package, by stem name."""
    stem = name[:-5] if name.endswith(".json") else name
    if stem not in BUNDLED:
        raise ScenarioError(f"no bundled scenario {name!r}")
    ref = resources.files("thermoloop") / "scenarios" / f"{stem}.json"
    return scenario_from_dict(json.loads(ref.read_text(encoding="utf-8")))


@dataclass
class SimulationResult:
    scenario: Scenario
    trace: list[TraceSample]
    decisions: list[tuple[float, Decision]]
    runaway: bool
    platform: Platform

    @property
    def metadata(self) -> dict[str, object]:
        return {
            "scenario": self.scenario.name,
            "governor": self.scenario.governor,
            "seed": self.scenario.seed,
        }

    def write(self, destination) -> None:
        write_trace(self.trace, destination, self.metadata)


def simulate(scenario: Scenario, platform: Platform | None = None) -> SimulationResult:
    """Run ``scenario`` to completion or runaway.

    A prepared ``platform`` (e.g. with processes registered as real-time)
    may be supplied; it must come from ``scenario.build_platform()``.
    """
    platform = platform or scenario.build_platform()
    stack = GovernorStack(scenario.governor, scenario.config)
    trace: list[TraceSample] = []
    for k in range(n_steps(scenario.duration, scenario.dt)):
        tag = ""
        if is_tick(k, scenario.dt, scenario.config.period):
            tag = stack.tick(platform, trace)
        _, sample = platform.step(scenario.dt, tag)
        trace.append(sample)
        if platform.runaway:
            break
    return SimulationResult(scenario, trace, stack.decisions, platform.runaway, platform)
