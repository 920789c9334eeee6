"""Command-line entry point.

Exit codes: 0 success, 1 usage/config/input error, 2 thermal runaway.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import stability
from .simulation import BUNDLED, ScenarioError, bundled_scenario, load_scenario, simulate
from .thermal import DomainError, ThermalParams
from .trace import (
    COMPONENTS,
    TraceFormatError,
    compare_report,
    format_report,
    histogram_csv,
    median_fps,
    read_trace,
    residency_histogram,
)

EXIT_OK, EXIT_ERROR, EXIT_RUNAWAY = 0, 1, 2
PARAMS_ENV = "THERMOLOOP_PARAMS"


class CliError(Exception):
    pass


def load_params(path: str | None) -> ThermalParams:
    path = path or os.environ.get(PARAMS_ENV)
    if not path:
        return ThermalParams()
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read params file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise CliError(f"{path}: expected a JSON object of thermal parameters")
    try:
        return ThermalParams.from_dict(data)
    except (DomainError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: {exc}") from None


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _resolve_scenario(ref: str):
    if os.path.exists(ref):
        return load_scenario(ref)
    stem = Path(ref).name.removesuffix(".json")
    if stem in BUNDLED and not os.path.dirname(ref):
        return bundled_scenario(stem)
    raise CliError(f"scenario not found: {ref}")


def cmd_simulate(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    if args.governor:
        scenario = scenario.with_governor(args.governor)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    result = simulate(scenario)
    result.write(args.out)
    trace = result.trace
    max_T = max(s.T_c for s in trace)
    fps = median_fps(trace) if any(s.fps is not None for s in trace) else float("nan")
    print(
        f"scenario={scenario.name} governor={scenario.governor} seed={scenario.seed} "
        f"samples={len(trace)} max_T_C={max_T:.2f} median_fps={fps:.1f} "
        f"decisions={len(result.decisions)} runaway={str(result.runaway).lower()}"
    )
    return EXIT_RUNAWAY if result.runaway else EXIT_OK


def cmd_stability_curve(args) -> int:
    if args.power < 0:
        raise CliError("--power must be non-negative")
    params = load_params(args.params)
    lo, hi = stability.scan_domain(params)
    thetas = np.linspace(lo, hi, args.points)
    values = stability.fixed_point_function(params, args.power, thetas)
    fp = stability.analyze_fixed_points(params, args.power)
    out, close = _open_out(args.out)
    try:
        out.write("theta,F\n")
        for th, f in zip(thetas, values):
            out.write(f"{th!r},{f!r}\n")
        out.write(
            f"# power_w={args.power} roots={fp.root_count} "
            f"stable_T_K={_fmt_T(fp.stable_T)} unstable_T_K={_fmt_T(fp.unstable_T)} "
            f"classification={fp.classification.value}\n"
        )
    finally:
        if close:
            out.close()
    return EXIT_OK


def _fmt_T(T: float | None) -> str:
    return "none" if T is None else f"{T:.6f}"


def cmd_critical_sweep(args) -> int:
    params = load_params(args.params)
    powers = np.round(np.arange(0.0, args.max_power + 1e-9, args.step), 10)
    out, close = _open_out(args.out)
    try:
        out.write("power_w,root_count,stable_T_K,unstable_T_K,classification\n")
        for P in powers:
            fp = stability.analyze_fixed_points(params, float(P))
            out.write(
                f"{P:g},{fp.root_count},{_fmt_T(fp.stable_T)},{_fmt_T(fp.unstable_T)},"
                f"{fp.classification.value}\n"
            )
        p_crit = stability.critical_power(params)
        out.write(f"# critical_power_w={'none' if p_crit is None else f'{p_crit:.6f}'}\n")
    finally:
        if close:
            out.close()
    return EXIT_OK


def _read(path: str):
    try:
        return read_trace(path)
    except OSError as exc:
        raise CliError(f"cannot read trace: {exc}") from None
    except TraceFormatError as exc:
        raise CliError(f"{path}: {exc}") from None


def cmd_analyze(args) -> int:
    trace = _read(args.trace)
    if not trace:
        raise CliError(f"{args.trace}: trace is empty")
    hist = residency_histogram(trace, args.cluster)
    print(f"{args.cluster} frequency residency ({len(trace)} samples)")
    for f, pct in hist.items():
        print(f"  {f:>7g} MHz  {pct:6.2f}%")
    if args.out:
        Path(args.out).write_text(histogram_csv(hist), encoding="utf-8")
    return EXIT_OK


def _run_names(paths: list[str]) -> list[str]:
    names, seen = [], {}
    for p in paths:
        stem = Path(p).stem
        seen[stem] = seen.get(stem, 0) + 1
        names.append(stem if seen[stem] == 1 else f"{stem}#{seen[stem]}")
    return names


def cmd_report(args) -> int:
    reference = _read(args.ref)
    if not reference:
        raise CliError(f"{args.ref}: trace is empty")
    names = _run_names([args.ref, *args.run])
    runs = {}
    for name, path in zip(names[1:], args.run):
        trace = _read(path)
        if not trace:
            raise CliError(f"{path}: trace is empty")
        runs[name] = trace
    try:
        text = format_report(compare_report(reference, runs, reference_name=names[0]))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermoloop",
        description="Power-temperature stability analysis and thermal governor simulation.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write its trace CSV")
    p.add_argument("--scenario", required=True, help=f"scenario JSON path or bundled name {BUNDLED}")
    p.add_argument("--governor", choices=["none", "interactive", "trip", "proposed"])
    p.add_argument("--out", required=True, help="trace CSV destination")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stability-curve", help="sample F(theta) for one dynamic power")
    p.add_argument("--power", type=float, required=True, help="dynamic power in watts")
    p.add_argument("--params", help=f"thermal params JSON (default: ${PARAMS_ENV} or built-in)")
    p.add_argument("--points", type=int, default=512)
    p.add_argument("--out", help="CSV destination (default stdout)")
    p.set_defaults(func=cmd_stability_curve)

    p = sub.add_parser("critical-sweep", help="root count versus power and the critical power")
    p.add_argument("--params")
    p.add_argument("--max-power", type=float, default=10.0)
    p.add_argument("--step", type=float, default=0.25)
    p.add_argument("--out", help="CSV destination (default stdout)")
    p.set_defaults(func=cmd_critical_sweep)

    p = sub.add_parser("analyze", help="frequency residency histogram of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--cluster", choices=COMPONENTS, default="gpu")
    p.add_argument("--out", help="optional freq_mhz,percent CSV")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="compare runs against a reference trace")
    p.add_argument("--ref", required=True)
    p.add_argument("--run", nargs="+", required=True)
    p.add_argument("--out", help="optional copy of the report text")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if getattr(args, "points", 2) < 2:
        print("error: --points must be at least 2", file=sys.stderr)
        return EXIT_ERROR
    if getattr(args, "step", 1.0) <= 0:
        print("error: --step must be positive", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (CliError, ScenarioError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
