"""Workload and power model of a little + big + GPU SoC."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .thermal import (
    DEFAULT_CEILING,
    PowerBreakdown,
    ThermalParams,
    leakage_power,
    rk4_step,
    to_celsius,
)
from .trace import COMPONENTS, TraceSample

LITTLE, BIG, GPU = COMPONENTS


class UnknownProcess(KeyError):
    pass


@dataclass(frozen=True)
class OPP:
    freq_mhz: float
    voltage: float
    cap_coeff: float  # W / (MHz * V^2)


def linear_opp_table(
    freqs: Sequence[float], cap_coeff: float, v_min: float = 1.0, v_max: float = 1.25
) -> list[OPP]:
    """OPPs with voltage linear in frequency from ``v_min`` to ``v_max``."""
    lo, hi = freqs[0], freqs[-1]
    table = []
    for f in freqs:
        v = v_min if hi == lo else v_min + (v_max - v_min) * (f - lo) / (hi - lo)
        table.append(OPP(float(f), v, cap_coeff))
    return table


LITTLE_FREQS = (400, 600, 800, 1000, 1200, 1400)
BIG_FREQS = (384, 672, 960, 1248, 1536, 1824, 2000)
GPU_FREQS = (180, 305, 390, 450, 510, 600)

# Calibrated against the 3DMark-analog power breakdown (see docs/calibration.md).
LITTLE_CAP = 1.15e-4
BIG_CAP = 4.6e-4
GPU_CAP = 1.39e-3


@dataclass
class Cluster:
    id: str
    opp_table: list[OPP]
    perf_scale: float = 1.0
    current_opp: int | None = None

    def __post_init__(self):
        if not self.opp_table:
            raise ValueError(f"cluster {self.id}: empty OPP table")
        freqs = [o.freq_mhz for o in self.opp_table]
        volts = [o.voltage for o in self.opp_table]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError(f"cluster {self.id}: frequencies must be strictly ascending")
        if any(b < a for a, b in zip(volts, volts[1:])):
            raise ValueError(f"cluster {self.id}: voltages must be non-decreasing")
        if self.perf_scale <= 0:
            raise ValueError(f"cluster {self.id}: perf_scale must be positive")
        if self.current_opp is None:
            self.current_opp = self.top
        if not 0 <= self.current_opp < len(self.opp_table):
            raise ValueError(f"cluster {self.id}: current_opp out of range")

    @property
    def top(self) -> int:
        return len(self.opp_table) - 1

    @property
    def opp(self) -> OPP:
        return self.opp_table[self.current_opp]

    @property
    def freq(self) -> float:
        return self.opp.freq_mhz

    @property
    def max_freq(self) -> float:
        return self.opp_table[-1].freq_mhz

    @property
    def frequencies(self) -> list[float]:
        return [o.freq_mhz for o in self.opp_table]

    @property
    def peak_throughput(self) -> float:
        return self.max_freq * self.perf_scale


def default_clusters() -> dict[str, Cluster]:
    return {
        LITTLE: Cluster(LITTLE, linear_opp_table(LITTLE_FREQS, LITTLE_CAP), perf_scale=0.4),
        BIG: Cluster(BIG, linear_opp_table(BIG_FREQS, BIG_CAP), perf_scale=1.0),
        GPU: Cluster(GPU, linear_opp_table(GPU_FREQS, GPU_CAP), perf_scale=1.0),
    }


@dataclass
class DemandSchedule:
    """Piecewise-constant demand: ``segments`` holds (start_time, value) pairs.

    With ``repeat`` set the schedule is periodic with that period.
    """

    segments: list[tuple[float, float]]
    repeat: float | None = None

    def __post_init__(self):
        if not self.segments:
            raise ValueError("demand schedule needs at least one segment")
        self.segments = [(float(t), float(v)) for t, v in self.segments]
        starts = [t for t, _ in self.segments]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment start times must be strictly ascending")
        if any(not 0 <= v <= 1 for _, v in self.segments):
            raise ValueError("demand values must lie in [0, 1]")
        if self.repeat is not None and self.repeat <= 0:
            raise ValueError("repeat period must be positive")
        self._starts = starts

    @classmethod
    def constant(cls, value: float) -> "DemandSchedule":
        return cls([(0.0, value)])

    def __call__(self, t: float) -> float:
        if self.repeat is not None:
            t = math.fmod(t, self.repeat)
            # fmod of e.g. 0.3 by 0.1 can land a hair under a boundary
            if self.repeat - t < 1e-9:
                t = 0.0
        i = bisect.bisect_right(self._starts, t + 1e-9) - 1
        return self.segments[i][1] if i >= 0 else 0.0


@dataclass
class Process:
    pid: int
    demand: DemandSchedule
    assigned_cluster: str
    name: str = ""
    realtime_exempt: bool = False
    is_foreground_app: bool = False
    jitter: float = 0.0


@dataclass(frozen=True)
class AppFrameModel:
    render_pid: int
    work_per_frame: float  # MHz * s of GPU time per frame
    target_fps: float

    def __post_init__(self):
        if self.work_per_frame <= 0 or self.target_fps <= 0:
            raise ValueError("work_per_frame and target_fps must be positive")


def effective_utilization(demand: float, cluster: Cluster, reference_throughput: float) -> float:
    """Share of ``cluster`` needed to deliver ``demand`` of the reference throughput."""
    if demand <= 0:
        return 0.0
    return min(1.0, demand * reference_throughput / (cluster.freq * cluster.perf_scale))


def dynamic_power(cluster: Cluster, utilizations: Sequence[float]) -> float:
    """Switching power of ``cluster`` at its current OPP: c * f * V^2 * sum(u)."""
    opp = cluster.opp
    return opp.cap_coeff * opp.freq_mhz * opp.voltage**2 * math.fsum(utilizations)


def achieved_fps(app: AppFrameModel, gpu_cluster: Cluster, app_utilization: float) -> float:
    return float(min(app.target_fps, gpu_cluster.freq * app_utilization / app.work_per_frame))


def windowed_process_power(history: Sequence[TraceSample], pid: int, window: float = 1.0) -> float:
    """Mean attributed power of ``pid`` over the trailing ``window`` seconds of ``history``."""
    if window <= 0:
        raise ValueError("window must be positive")
    if not history or pid not in history[-1].process_power:
        raise UnknownProcess(pid)
    cutoff = history[-1].t - window + 1e-9
    values = []
    for sample in reversed(history):
        if sample.t <= cutoff:
            break
        values.append(sample.process_power.get(pid, 0.0))
    return math.fsum(values) / len(values)


@dataclass
class Platform:
    """Mutable SoC state advanced by :meth:`step`."""

    params: ThermalParams
    clusters: dict[str, Cluster]
    processes: dict[int, Process]
    app: AppFrameModel | None = None
    T: float | None = None
    t: float = 0.0
    seed: int = 0
    ceiling: float = DEFAULT_CEILING
    throttle_depth: int = 0
    runaway: bool = False
    demands: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.clusters) != set(COMPONENTS):
            raise ValueError(f"platform needs exactly the clusters {COMPONENTS}")
        for pid, proc in self.processes.items():
            if pid != proc.pid:
                raise ValueError(f"process key {pid} does not match pid {proc.pid}")
            if proc.assigned_cluster not in self.clusters:
                raise ValueError(f"pid {pid}: unknown cluster {proc.assigned_cluster!r}")
        if self.app is not None and self.app.render_pid not in self.processes:
            raise ValueError(f"app render pid {self.app.render_pid} is not a process")
        if self.T is None:
            self.T = self.params.T_amb
        self.rng = np.random.default_rng(self.seed)
        self.migrations: list[tuple[int, str, str]] = []
        self._sample_demands()

    def _sample_demands(self) -> None:
        demands = {}
        for pid in sorted(self.processes):
            proc = self.processes[pid]
            d = proc.demand(self.t)
            if proc.jitter > 0 and d > 0:
                d *= 1.0 + self.rng.uniform(-proc.jitter, proc.jitter)
            demands[pid] = min(1.0, max(0.0, d))
        self.demands = demands

    def process(self, pid: int) -> Process:
        try:
            return self.processes[pid]
        except KeyError:
            raise UnknownProcess(pid) from None

    def reference_throughput(self, proc: Process) -> float:
        # CPU work is expressed relative to the big cluster, GPU work to the GPU
        home = GPU if proc.assigned_cluster == GPU else BIG
        return self.clusters[home].peak_throughput

    def utilization(self, pid: int, cluster: str | None = None) -> float:
        proc = self.process(pid)
        target = self.clusters[cluster or proc.assigned_cluster]
        return effective_utilization(self.demands[pid], target, self.reference_throughput(proc))

    def cluster_utilization(self, cluster: str) -> float:
        return math.fsum(
            self.utilization(p.pid) for p in self.processes.values() if p.assigned_cluster == cluster
        )

    def process_powers(self, mapping: Mapping[int, str] | None = None) -> dict[int, float]:
        """Attributed dynamic power of each process; ``mapping`` overrides assignments."""
        out = {}
        for pid in sorted(self.processes):
            proc = self.processes[pid]
            cid = (mapping or {}).get(pid, proc.assigned_cluster)
            cluster = self.clusters[cid]
            u = effective_utilization(self.demands[pid], cluster, self.reference_throughput(proc))
            out[pid] = dynamic_power(cluster, [u])
        return out

    def cluster_powers(self, mapping: Mapping[int, str] | None = None) -> dict[str, float]:
        per_proc = self.process_powers(mapping)
        powers = {}
        for cid in COMPONENTS:
            members = [
                pid
                for pid, p in self.processes.items()
                if (mapping or {}).get(pid, p.assigned_cluster) == cid
            ]
            powers[cid] = math.fsum(per_proc[pid] for pid in members)
        return powers

    def dynamic_power(self, mapping: Mapping[int, str] | None = None) -> float:
        return math.fsum(self.cluster_powers(mapping).values())

    def fps(self) -> float | None:
        if self.app is None or self.demands[self.app.render_pid] <= 0:
            return None
        render = self.process(self.app.render_pid)
        gpu = self.clusters[render.assigned_cluster]
        return achieved_fps(self.app, gpu, self.utilization(render.pid))

    @property
    def max_throttle_depth(self) -> int:
        return max(c.top for c in self.clusters.values())

    def opp_cap(self, cluster: str) -> int:
        c = self.clusters[cluster]
        return max(0, c.top - self.throttle_depth)

    def set_throttle_depth(self, depth: int) -> None:
        self.throttle_depth = min(max(0, depth), self.max_throttle_depth)
        for cid, c in self.clusters.items():
            c.current_opp = min(c.current_opp, self.opp_cap(cid))

    def migrate(self, pid: int, target_cluster: str) -> None:
        """Reassign ``pid``; the new placement is used from the next step on."""
        proc = self.process(pid)
        if target_cluster not in self.clusters:
            raise ValueError(f"unknown cluster {target_cluster!r}")
        if proc.assigned_cluster == target_cluster:
            return
        self.migrations.append((pid, proc.assigned_cluster, target_cluster))
        proc.assigned_cluster = target_cluster

    def register_realtime(self, pid: int) -> None:
        self.process(pid).realtime_exempt = True

    def step(self, dt: float, decision: str = "") -> tuple[PowerBreakdown, TraceSample]:
        """Record the current state, then advance time and temperature by ``dt``."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        per_proc = self.process_powers()
        cluster_power = self.cluster_powers()
        breakdown = PowerBreakdown(cluster_power, leakage_power(self.params, self.T))
        sample = TraceSample(
            t=self.t,
            T_c=to_celsius(self.T),
            f_little=self.clusters[LITTLE].freq,
            f_big=self.clusters[BIG].freq,
            f_gpu=self.clusters[GPU].freq,
            p_little=cluster_power[LITTLE],
            p_big=cluster_power[BIG],
            p_gpu=cluster_power[GPU],
            p_leak=breakdown.leakage,
            p_total=breakdown.total,
            fps=self.fps(),
            decision=decision,
            mapping={pid: p.assigned_cluster for pid, p in self.processes.items()},
            process_power=per_proc,
        )
        p_dyn = breakdown.dynamic
        self.T = rk4_step(self.params, lambda _t: p_dyn, self.t, self.T, dt)
        if not math.isfinite(self.T) or self.T > self.ceiling:
            self.runaway = True
        self.t = round(self.t + dt, 9)
        self._sample_demands()
        return breakdown, sample
