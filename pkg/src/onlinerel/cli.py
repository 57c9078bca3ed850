"""Command-line entry point.

Exit status: 0 on success, 1 on domain errors (a JSON error object is
written to stderr), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from .bn import InferenceError
from .evidence import (
    DEFAULT_OBSERVABLE,
    EvidenceCase,
    EvidenceError,
    apply_case,
    load_cases,
    load_reference_cases,
    open_session,
    read_observations,
    run_case_suite,
    sweep,
    verify_against_paper,
)
from .ftree import ModelError, check_source, parse_model
from .gate import MEASURES, FeatureSample, GateError, GateThresholds, gate
from .report import atomic_write, emit_report, format_bsfp, format_pct
from .sim import AnomalyScenario, MissionPlan, SimulationError, mission_to_session, run_mission, trusted_sample

DOMAIN_ERRORS = (ModelError, EvidenceError, InferenceError, GateError, SimulationError, OSError, ValueError)


class DomainError(Exception):
    def __init__(self, message: str, **extra):
        super().__init__(message)
        self.extra = extra


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise DomainError(f"environment variable {name}={raw!r} is not a number") from None


def _color() -> bool:
    if os.environ.get("NO_COLOR"):
        return False
    return os.environ.get("ONLINEREL_COLOR", "auto") == "always" or (
        os.environ.get("ONLINEREL_COLOR", "auto") == "auto" and sys.stderr.isatty()
    )


def _read_model(path: str):
    return parse_model(Path(path).read_bytes())


def _write(args, text: str) -> None:
    if getattr(args, "output", None):
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _render_reports(reports, fmt: str) -> str:
    buf = io.StringIO()
    emit_report(reports, fmt, buf)
    return buf.getvalue()


def _thresholds(args) -> GateThresholds:
    return GateThresholds(args.tau_low, args.tau_high)


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    _, diags = check_source(Path(args.model).read_bytes())
    errors = [d for d in diags if d.severity == "error"]
    _write(args, _dumps({"valid": not errors, "diagnostics": [d.to_dict() for d in diags]}))
    if errors:
        raise DomainError("model is invalid", diagnostics=[d.to_dict() for d in errors])
    return 0


def cmd_eval(args) -> int:
    ft = _read_model(args.model)
    if args.case:
        cases = load_cases(args.case)
        if len(cases) != 1:
            raise DomainError(f"{args.case}: expected a single case, found {len(cases)}")
        case = cases[0]
    else:
        case = EvidenceCase("baseline")
    report = apply_case(ft, case)
    if args.format == "csv":
        _write(args, _render_reports([report], "csv"))
    else:
        _write(args, _dumps(report.to_dict()))
    return 0


def cmd_cases(args) -> int:
    ft = _read_model(args.model)
    results = run_case_suite(ft, load_cases(args.cases))
    _write(args, _render_reports(results, args.format))
    failures = [r for r in results if not hasattr(r, "posterior")]
    if failures:
        raise DomainError(f"{len(failures)} case(s) failed", failures=[f.to_dict() for f in failures])
    return 0


def _grid(spec: str) -> list[float]:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise DomainError("grid range must be start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 2:
            return [start]
        return [start + (stop - start) * i / (count - 1) for i in range(count)]
    return [float(x) for x in spec.split(",") if x.strip()]


def cmd_sweep(args) -> int:
    ft = _read_model(args.model)
    curve = sweep(ft, args.target, _grid(args.grid))
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["prior", "bsfp"])
        for p, v in curve:
            w.writerow([repr(p), format_bsfp(v)])
        _write(args, buf.getvalue())
    else:
        _write(args, _dumps({"target": args.target, "points": [
            {"prior": p, "bsfp": format_bsfp(v), "value": v} for p, v in curve
        ]}))
    return 0


def cmd_verify(args) -> int:
    ft = _read_model(args.model)
    fixtures = load_reference_cases(args.fixtures) if args.fixtures else None
    report = verify_against_paper(ft, fixtures)
    _write(args, _dumps(report.to_dict()))
    if args.strict:
        ok = all(s["equal"] for s in report.structural)
        ok &= all(r.rel_residual <= 0.01 for r in report.residuals if r.table == "binary")
        ok &= all(abs(r.pct_residual) <= 0.15 for r in report.residuals if r.table == "soft")
        ok &= all(abs(r.pct_residual) <= 0.5 for r in report.residuals if r.table == "mixed")
        if not ok:
            raise DomainError("model residuals exceed tolerance")
    return 0


def _read_sample(path: str) -> FeatureSample:
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            if len(row) != 1:
                raise DomainError(f"{path}: line {i + 1} has {len(row)} columns, expected 1")
            try:
                values.append(float(row[0]))
            except ValueError:
                if values or i > 0:
                    raise DomainError(f"{path}: line {i + 1} is not a number") from None
    return FeatureSample(tuple(values), Path(path).stem)


def cmd_gate(args) -> int:
    dist, decision = gate(_read_sample(args.trusted), _read_sample(args.observed),
                          args.measure, _thresholds(args), args.scale)
    _write(args, _dumps({"distance": dist.to_dict(), "decision": decision.to_dict()}))
    return 0


def cmd_simulate(args) -> int:
    ft = _read_model(args.model)
    scenario = AnomalyScenario.from_dict(json.loads(Path(args.scenario).read_text("utf-8")))
    plan = MissionPlan.from_dict(json.loads(Path(args.plan).read_text("utf-8"))) if args.plan else MissionPlan()
    trusted = _read_sample(args.trusted) if args.trusted else trusted_sample(args.seed, base=scenario.base)
    result = run_mission(plan, scenario, trusted, _thresholds(args), args.seed,
                         args.measure, args.max_recaptures)
    timeline = mission_to_session(ft, result, scenario.observable)

    captures = "".join(json.dumps(r.to_dict()) + "\n" for r in result.records)
    if args.captures:
        atomic_write(args.captures, captures)
    if args.format == "csv":
        text = _render_reports(timeline, "csv")
    else:
        text = _dumps({
            "seed": args.seed,
            "observations": [o.to_dict() for o in result.observations],
            "timeline": [r.to_dict() for r in timeline],
            "actions": {a: sum(r.decision.action == a for r in result.records)
                        for a in ("Proceed", "Recapture", "ManualInspection")},
        })
    _write(args, text)
    return 0


def cmd_session(args) -> int:
    ft = _read_model(args.model)
    if args.stream == "-":
        observations = read_observations(sys.stdin)
    else:
        with open(args.stream, encoding="utf-8") as fh:
            observations = read_observations(fh)
    observable = [s for s in args.observable.split(",") if s] if args.observable else DEFAULT_OBSERVABLE
    log_lines = io.StringIO()
    session = open_session(ft, observable, log_lines)
    try:
        for obs in observations:
            session.append(obs)
    finally:
        if args.log:
            atomic_write(args.log, log_lines.getvalue())
    _write(args, _render_reports(session.reports, args.format))
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onlinerel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help, fmt=False):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("-o", "--output", help="write here instead of standard output")
        if fmt:
            p.add_argument("--format", choices=("json", "csv"), default="json")
        return p

    def thresholds(p):
        p.add_argument("--tau-low", type=float, default=_env_float("ONLINEREL_TAU_LOW", 0.6))
        p.add_argument("--tau-high", type=float, default=_env_float("ONLINEREL_TAU_HIGH", 0.9))
        p.add_argument("--measure", choices=MEASURES, default="ks")

    p = add("validate", cmd_validate, "check a model file")
    p.add_argument("model")

    p = add("eval", cmd_eval, "baseline or single-case evaluation", fmt=True)
    p.add_argument("model")
    p.add_argument("case", nargs="?")

    p = add("cases", cmd_cases, "evaluate a suite of independent cases", fmt=True)
    p.add_argument("model")
    p.add_argument("cases")

    p = add("sweep", cmd_sweep, "top probability against one event prior", fmt=True)
    p.add_argument("model")
    p.add_argument("target")
    p.add_argument("--grid", default="0:1:21", help="start:stop:count or comma list")

    p = add("verify-paper", cmd_verify, "residuals against the published case tables")
    p.add_argument("model")
    p.add_argument("--fixtures", help="reference case file (default: bundled tables)")
    p.add_argument("--strict", action="store_true", help="exit 1 if residuals exceed tolerance")

    p = add("gate", cmd_gate, "confidence gate between two single-column CSV samples")
    p.add_argument("trusted")
    p.add_argument("observed")
    p.add_argument("--scale", type=float, default=None)
    thresholds(p)

    p = add("simulate", cmd_simulate, "run a seeded inspection mission", fmt=True)
    p.add_argument("model")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--plan", help="mission plan JSON")
    p.add_argument("--trusted", help="trusted sample CSV (default: generated from the seed)")
    p.add_argument("--captures", help="write capture records as JSON Lines here")
    p.add_argument("--max-recaptures", type=int, default=3)
    thresholds(p)

    p = add("session", cmd_session, "append observations from a JSON Lines stream", fmt=True)
    p.add_argument("model")
    p.add_argument("stream", help="observation JSONL file, or - for stdin")
    p.add_argument("--observable", help="comma-separated observable event ids")
    p.add_argument("--log", help="write the session log (JSON Lines) here")
    return parser


_PATH_ARGS = ("model", "case", "cases", "fixtures", "trusted", "observed", "scenario", "plan")


def _error(kind: str, message: str, **extra) -> None:
    payload = {"error": kind, "message": message, **extra}
    text = json.dumps(payload)
    if _color():
        text = f"\x1b[31m{text}\x1b[0m"
    print(text, file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except DomainError as exc:
        _error("usage", str(exc))
        return 2

    for name in _PATH_ARGS:
        path = getattr(args, name, None)
        if path and path != "-" and not Path(path).is_file():
            _error("file-not-found", f"{name} file not found: {path}", path=path)
            return 1

    try:
        return args.func(args)
    except DomainError as exc:
        _error("domain", str(exc), **exc.extra)
    except ModelError as exc:
        _error("model", str(exc), diagnostics=[d.to_dict() for d in exc.diagnostics])
    except DOMAIN_ERRORS as exc:
        _error(type(exc).__name__, str(exc))
    return 1


if __name__ == "__main__":
    sys.exit(main())
