"""Simulation traces and the metrics computed from them."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

HEADER = (
    "t_s",
    "T_c",
    "f_little_mhz",
    "f_big_mhz",
    "f_gpu_mhz",
    "p_little_w",
    "p_big_w",
    "p_gpu_w",
    "p_leak_w",
    "p_total_w",
    "fps",
    "decision",
)
COMPONENTS = ("little", "big", "gpu")


class TraceFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class TraceSample:
    """One simulation step.  ``T_c`` is in degrees Celsius.

    ``fps`` is None while the foreground app is inactive.  ``mapping`` and
    ``process_power`` live only in memory; they are not part of the CSV.
    """

    t: float
    T_c: float
    f_little: float
    f_big: float
    f_gpu: float
    p_little: float
    p_big: float
    p_gpu: float
    p_leak: float
    p_total: float
    fps: float | None = None
    decision: str = ""
    mapping: dict[int, str] = field(default_factory=dict, compare=False, repr=False)
    process_power: dict[int, float] = field(default_factory=dict, compare=False, repr=False)

    def frequency(self, cluster: str) -> float:
        return getattr(self, f"f_{cluster}")

    def power(self, component: str) -> float:
        return getattr(self, f"p_{component}")

    @property
    def p_dynamic(self) -> float:
        return self.p_little + self.p_big + self.p_gpu


def _fmt(x: float | None) -> str:
    # repr round-trips binary64 exactly
    return "" if x is None else repr(float(x))


def _row(s: TraceSample) -> list[str]:
    return [
        _fmt(s.t),
        _fmt(s.T_c),
        _fmt(s.f_little),
        _fmt(s.f_big),
        _fmt(s.f_gpu),
        _fmt(s.p_little),
        _fmt(s.p_big),
        _fmt(s.p_gpu),
        _fmt(s.p_leak),
        _fmt(s.p_total),
        _fmt(s.fps),
        s.decision,
    ]


def write_trace(
    trace: Iterable[TraceSample],
    destination: str | os.PathLike | TextIO,
    metadata: Mapping[str, object] | None = None,
) -> None:
    """Write samples as CSV.  ``metadata`` becomes ``# key=value`` lines above the header."""
    if hasattr(destination, "write"):
        _write(trace, destination, metadata)
    else:
        with open(destination, "w", newline="", encoding="utf-8") as fh:
            _write(trace, fh, metadata)


def _write(trace, fh, metadata) -> None:
    for key, value in (metadata or {}).items():
        fh.write(f"# {key}={value}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(HEADER)
    for sample in trace:
        writer.writerow(_row(sample))


def read_trace(source: str | os.PathLike | TextIO) -> list[TraceSample]:
    if hasattr(source, "read"):
        return _read(source)
    with open(source, newline="", encoding="utf-8") as fh:
        return _read(fh)


def read_metadata(source: str | os.PathLike) -> dict[str, str]:
    meta = {}
    with open(source, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
    return meta


def _read(fh: TextIO) -> list[TraceSample]:
    lines = fh.read().splitlines()
    lineno = 0
    while lineno < len(lines) and lines[lineno].startswith("#"):
        lineno += 1
    if lineno >= len(lines):
        raise TraceFormatError(lineno + 1, "missing header")
    header = next(csv.reader([lines[lineno]]))
    if tuple(header) != HEADER:
        raise TraceFormatError(lineno + 1, f"unexpected header {','.join(header)!r}")

    samples = []
    last_t = -math.inf
    for offset, row in enumerate(csv.reader(io.StringIO("\n".join(lines[lineno + 1 :])))):
        n = lineno + 2 + offset
        if not row:
            continue
        if len(row) != len(HEADER):
            raise TraceFormatError(n, f"expected {len(HEADER)} fields, got {len(row)}")
        values = []
        for name, text in zip(HEADER[:10], row[:10]):
            try:
                values.append(float(text))
            except ValueError:
                raise TraceFormatError(n, f"field {name!r} is not numeric: {text!r}") from None
        try:
            fps = float(row[10]) if row[10] else None
        except ValueError:
            raise TraceFormatError(n, f"field 'fps' is not numeric: {row[10]!r}") from None
        if values[0] <= last_t:
            raise TraceFormatError(n, "time is not strictly increasing")
        last_t = values[0]
        samples.append(TraceSample(*values, fps=fps, decision=row[11]))
    return samples


def residency_histogram(
    trace: Sequence[TraceSample],
    cluster: str,
    frequencies: Iterable[float] = (),
) -> dict[float, float]:
    """Percent of samples spent at each frequency of ``cluster``.

    Frequencies listed in ``frequencies`` appear even when never visited.
    """
    if not trace:
        raise ValueError("empty trace")
    if cluster not in COMPONENTS:
        raise ValueError(f"unknown cluster {cluster!r}")
    counts: dict[float, int] = {float(f): 0 for f in frequencies}
    for s in trace:
        f = s.frequency(cluster)
        counts[f] = counts.get(f, 0) + 1
    n = len(trace)
    return {f: 100.0 * counts[f] / n for f in sorted(counts)}


def lower_median(values: Sequence[float]) -> float:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def median_fps(trace: Sequence[TraceSample]) -> float:
    """Median FPS over samples where the app is active (lower median for even counts)."""
    if not trace:
        raise ValueError("empty trace")
    active = [s.fps for s in trace if s.fps is not None]
    if not active:
        raise ValueError("foreground app never active in trace")
    return lower_median(active)


def power_shares(trace: Sequence[TraceSample]) -> dict[str, float]:
    """Percent share of mean dynamic power per component."""
    if not trace:
        raise ValueError("empty trace")
    totals = {c: math.fsum(s.power(c) for s in trace) for c in COMPONENTS}
    dynamic = math.fsum(totals.values())
    if dynamic == 0:
        return {c: 0.0 for c in COMPONENTS}
    return {c: 100.0 * totals[c] / dynamic for c in COMPONENTS}


def percent_reduction(reference: float, value: float) -> float:
    return 100.0 * (reference - value) / reference


@dataclass
class RunReport:
    name: str
    median_fps: float
    percent_reduction: float
    max_T_c: float
    shares: dict[str, float]
    mean_power: float


def run_report(name: str, trace: Sequence[TraceSample], reference_fps: float) -> RunReport:
    fps = median_fps(trace)
    return RunReport(
        name=name,
        median_fps=fps,
        percent_reduction=percent_reduction(reference_fps, fps),
        max_T_c=max(s.T_c for s in trace),
        shares=power_shares(trace),
        mean_power=math.fsum(s.p_total for s in trace) / len(trace),
    )


def compare_report(
    reference: Sequence[TraceSample],
    candidates: Mapping[str, Sequence[TraceSample]],
    reference_name: str = "reference",
) -> list[RunReport]:
    """Reports for the reference run followed by each candidate, in input order."""
    if not reference:
        raise ValueError("empty reference trace")
    ref_fps = median_fps(reference)
    reports = [run_report(reference_name, reference, ref_fps)]
    for name, trace in candidates.items():
        if not trace:
            raise ValueError(f"empty trace for run {name!r}")
        reports.append(run_report(name, trace, ref_fps))
    return reports


def format_report(reports: Sequence[RunReport]) -> str:
    columns = ["run", "median_fps", "reduction", "max_T_C", "P_avg_W", "little", "big", "gpu"]
    rows = [
        [
            r.name,
            f"{r.median_fps:.0f}",
            f"{r.percent_reduction:.0f}%",
            f"{r.max_T_c:.1f}",
            f"{r.mean_power:.2f}",
            *(f"{r.shares[c]:.0f}%" for c in COMPONENTS),
        ]
        for r in reports
    ]
    widths = [max(len(col), *(len(row[i]) for row in rows)) for i, col in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(columns, widths)))]
    for row in rows:
        lines.append(
            "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
        )
    return "\n".join(lines) + "\n"


def histogram_csv(histogram: Mapping[float, float]) -> str:
    out = ["freq_mhz,percent"]
    out += [f"{f:g},{p:.4f}" for f, p in histogram.items()]
    return "\n".join(out) + "\n"
