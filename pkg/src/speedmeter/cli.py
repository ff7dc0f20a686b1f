"""JSON-configured command line front end with deterministic CSV output.

Example::

    python3 -m speedmeter compare --gamma 1 --out compare.csv
    python3 -m speedmeter simulate --config run.json

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .freqsolve import FrequencyGrid, NumericalFailure
from .scenarios import (
    ComparisonResult,
    ConsistencyReport,
    ScenarioConfig,
    compare_meters,
    consistency_report,
    run_position_meter,
    run_speed_meter,
)
from .spectra import CANONICAL_AUXILIARIES, NoiseModel, ReadoutPlan, Squeezed, SpectrumResult, Vacuum
from .sysmodel import HBAR, KAPPA

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

SCENARIOS = ("speedMeter", "positionMeter", "compare", "consistency")
FEEDFORWARD = ("off", "closed-form", "wiener")
ROUTES = ("firstPrinciples", "closedForm")
PORTS = ("a", "b", "c")


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class GridConfig:
    type: str = "log"
    min: float = 1e-3
    max: float = 10.0
    points: int = 400

    def build(self) -> FrequencyGrid:
        if self.type == "log":
            return FrequencyGrid.log(self.min, self.max, self.points)
        return FrequencyGrid.linear(self.min, self.max, self.points)


@dataclass(frozen=True)
class InputConfig:
    kind: str = "vacuum"
    r: float = 0.0
    theta: float = 0.0

    def state(self):
        return Vacuum() if self.kind == "vacuum" else Squeezed(self.r, self.theta)


@dataclass(frozen=True)
class ReadoutConfig:
    angle: float | str = "opt"
    feedforward: str = "wiener"


@dataclass(frozen=True)
class OutputConfig:
    path: str | None = None
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    """Validated run description in internal units (gamma, omega)."""

    scenario: str = "speedMeter"
    gamma: float = 1.0
    grid: GridConfig = field(default_factory=GridConfig)
    kappaC: float | None = None
    inputs: dict[str, InputConfig] = field(default_factory=dict)
    readout: ReadoutConfig = field(default_factory=ReadoutConfig)
    route: str = "firstPrinciples"
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: tuple[float, ...] = ()

    def noise(self) -> NoiseModel:
        return NoiseModel({p: s.state() for p, s in sorted(self.inputs.items())})

    def plan(self) -> ReadoutPlan:
        ff = self.readout.feedforward
        aux = CANONICAL_AUXILIARIES if ff != "off" else ()
        return ReadoutPlan("b", self.readout.angle, aux, ff)

    def scenario_config(self, gamma: float | None = None) -> ScenarioConfig:
        return ScenarioConfig(
            self.gamma if gamma is None else gamma,
            self.grid.build(),
            self.noise(),
            self.plan(),
            self.route,
            self.kappaC,
        )


# -- parsing ------------------------------------------------------------------------


def _check_keys(doc: Any, allowed: Sequence[str], path: str) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected an object")
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path != "config" else key, "unknown key")
    return doc


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    return v


def _positive(value: Any, path: str) -> float:
    v = _number(value, path)
    if v <= 0:
        raise ConfigError(path, f"must be > 0, got {v!r}")
    return v


def _choice(value: Any, choices: Sequence[str], path: str) -> str:
    if value not in choices:
        raise ConfigError(path, f"must be one of {', '.join(choices)}; got {value!r}")
    return value


def _parse_grid(doc: Any, rate_scale: float = 1.0) -> GridConfig:
    """Grid bounds; explicitly given bounds are divided by ``rate_scale`` (physical mode)."""
    doc = _check_keys(doc, ("type", "min", "max", "points"), "grid")
    d = GridConfig()
    kind = _choice(doc.get("type", d.type), ("log", "linear"), "grid.type")
    lo = _positive(doc["min"], "grid.min") / rate_scale if "min" in doc else d.min
    hi = _positive(doc["max"], "grid.max") / rate_scale if "max" in doc else d.max
    points = doc.get("points", d.points)
    if isinstance(points, bool) or not isinstance(points, int):
        raise ConfigError("grid.points", f"expected an integer, got {points!r}")
    if points < 2:
        raise ConfigError("grid.points", f"must be >= 2, got {points}")
    if not lo < hi:
        raise ConfigError("grid.min", f"must be < grid.max ({lo!r} >= {hi!r})")
    return GridConfig(kind, lo, hi, points)


def _parse_input(port: str, doc: Any) -> InputConfig:
    path = f"inputs.{port}"
    doc = _check_keys(doc, ("kind", "r", "theta"), path)
    kind = _choice(doc.get("kind", "vacuum"), ("vacuum", "squeezed"), f"{path}.kind")
    if kind == "vacuum":
        if "r" in doc or "theta" in doc:
            raise ConfigError(path, "vacuum input takes no r/theta")
        return InputConfig()
    if "r" not in doc:
        raise ConfigError(f"{path}.r", "required for a squeezed input")
    r = _number(doc["r"], f"{path}.r")
    if r < 0:
        raise ConfigError(f"{path}.r", "must be >= 0")
    theta = _number(doc.get("theta", 0.0), f"{path}.theta")
    if not 0 <= theta < math.pi:
        raise ConfigError(f"{path}.theta", "must lie in [0, pi)")
    return InputConfig("squeezed", r, theta)


def _parse_physical(doc: Any):
    """Return ``(gamma, rate_scale)`` from SI mass, cavity rate and Theta.

    Angular frequencies and rates given in rad/s are divided by ``rate_scale = 2 kappa``
    to obtain internal units, where ``omega = Omega / (2 kappa)``.  The mass drops out of
    SQL-normalized spectra and is only validated.
    """
    doc = _check_keys(doc, ("mass", "kappa", "theta"), "physical")
    for key in ("mass", "kappa", "theta"):
        if key not in doc:
            raise ConfigError(f"physical.{key}", "required")
    _positive(doc["mass"], "physical.mass")
    kappa = _positive(doc["kappa"], "physical.kappa")
    theta = _positive(doc["theta"], "physical.theta")
    return theta / (8 * kappa**3), 2 * kappa


TOP_KEYS = ("scenario", "gamma", "grid", "kappaC", "inputs", "readout", "route", "output", "sweep", "physical")


def config_from_dict(doc: Any) -> RunConfig:
    doc = _check_keys(doc, TOP_KEYS, "config")
    d = RunConfig()
    scenario = _choice(doc.get("scenario", d.scenario), SCENARIOS, "scenario")
    rate_scale = 1.0
    if "physical" in doc:
        if "gamma" in doc:
            raise ConfigError("gamma", "give either gamma or physical, not both")
        gamma, rate_scale = _parse_physical(doc["physical"])
        if not math.isfinite(gamma) or gamma <= 0:
            raise ConfigError("physical", "implies a non-positive gamma")
    else:
        gamma = _positive(doc.get("gamma", d.gamma), "gamma")
    grid = _parse_grid(doc.get("grid", {}), rate_scale)
    kappa_c = None if doc.get("kappaC") is None else _positive(doc["kappaC"], "kappaC") / rate_scale
    inputs_doc = _check_keys(doc.get("inputs", {}), PORTS, "inputs")
    inputs = {p: _parse_input(p, inputs_doc[p]) for p in sorted(inputs_doc)}
    inputs = {p: s for p, s in inputs.items() if s.kind != "vacuum"}
    rd = _check_keys(doc.get("readout", {}), ("angle", "feedforward"), "readout")
    angle = rd.get("angle", "opt")
    if angle != "opt":
        angle = _number(angle, "readout.angle")
    ff = rd.get("feedforward", "wiener")
    ff = "closed-form" if ff == "closedForm" else ff
    ff = _choice(ff, FEEDFORWARD, "readout.feedforward")
    route = _choice(doc.get("route", d.route), ROUTES, "route")
    if route == "closedForm" and inputs:
        raise ConfigError("inputs", "squeezed inputs need route firstPrinciples")
    if ff == "closed-form" and angle != "opt":
        raise ConfigError("readout.angle", "closed-form feed-forward needs angle 'opt'")
    out = _check_keys(doc.get("output", {}), ("path", "format"), "output")
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("output.path", "expected a string")
    fmt = _choice(out.get("format", "csv"), ("csv",), "output.format")
    sweep_doc = doc.get("sweep", [])
    if not isinstance(sweep_doc, list):
        raise ConfigError("sweep", "expected a list of gamma values")
    sweep = tuple(_positive(g, f"sweep[{i}]") for i, g in enumerate(sweep_doc))
    return RunConfig(
        scenario, gamma, grid, kappa_c, inputs, ReadoutConfig(angle, ff), route, OutputConfig(path, fmt), sweep
    )


def parse_config(document: str) -> RunConfig:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"malformed JSON ({exc})") from None
    return config_from_dict(doc)


def config_to_dict(config: RunConfig) -> dict:
    g = config.grid
    return {
        "scenario": config.scenario,
        "gamma": config.gamma,
        "grid": {"type": g.type, "min": g.min, "max": g.max, "points": g.points},
        "kappaC": config.kappaC,
        "inputs": {p: {"kind": s.kind, "r": s.r, "theta": s.theta} for p, s in sorted(config.inputs.items())},
        "readout": {"angle": config.readout.angle, "feedforward": config.readout.feedforward},
        "route": config.route,
        "output": {"path": config.output.path, "format": config.output.format},
        "sweep": list(config.sweep),
    }


def serialize(config: RunConfig) -> str:
    """Canonical JSON; ``parse_config(serialize(c)) == c``."""
    return json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))


# -- CSV emission -------------------------------------------------------------------


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _header(config: RunConfig | None, columns: Sequence[str], notes: Sequence[str] = ()) -> list[str]:
    lines = [f"# speedmeter {__version__}"]
    if config is not None:
        lines.append(f"# config: {serialize(config)}")
    lines.append(f"# units: hbar={fmt(HBAR)}, kappa={fmt(KAPPA)}, omega=Omega/(2 kappa), PSD normalized to S_SQL")
    lines.extend(f"# {n}" for n in notes)
    lines.append(f"# columns: {','.join(columns)}")
    return lines


def _csv(header: list[str], columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def emit_csv(result, config: RunConfig | None = None) -> str:
    """Render a result as CSV text with '#' metadata lines."""
    if isinstance(result, SpectrumResult):
        ports = list(result.per_port)
        cols = ["omega", "S_total", *(f"S_from_{p}" for p in ports), "signal_power"]
        rows = (
            [fmt(result.omegas[k]), fmt(result.total[k]), *(fmt(result.contribution(p)[k]) for p in ports),
             fmt(result.signal_power[k])]
            for k in range(len(result.omegas))
        )
        return _csv(_header(config, cols), cols, rows)
    if isinstance(result, ComparisonResult):
        cols = ["omega", "S_SM", "S_PM", "verdict"]
        rows = (
            [fmt(w), fmt(a), fmt(b), v]
            for w, a, b, v in zip(result.omegas, result.s_sm, result.s_pm, result.verdicts)
        )
        return _csv(_header(config, cols), cols, rows)
    if isinstance(result, ConsistencyReport):
        cols = ["check", "route_a", "route_b", "max_rel_deviation", "omega_at_max", "tolerance", "verdict", "details"]
        rows = (
            [r.name, r.route_a, r.route_b, fmt(r.max_rel_deviation), fmt(r.location_omega), fmt(r.tolerance),
             r.verdict, json.dumps(r.details, sort_keys=True, default=_json_default)]
            for r in result.records
        )
        return _csv(_header(config, cols, [f"gamma: {fmt(result.gamma)}"]), cols, rows)
    if isinstance(result, SweepResult):
        cols = ["gamma", "omega", "S_SM", "S_PM", "verdict"]
        rows = (
            [fmt(g), fmt(w), fmt(a), fmt(b), v]
            for g, cmp in zip(result.gammas, result.comparisons)
            for w, a, b, v in zip(cmp.omegas, cmp.s_sm, cmp.s_pm, cmp.verdicts)
        )
        return _csv(_header(config, cols), cols, rows)
    raise TypeError(f"cannot emit {type(result).__name__}")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(type(obj).__name__)


# -- execution ----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepResult:
    gammas: tuple[float, ...]
    comparisons: tuple[ComparisonResult, ...]


def execute(config: RunConfig, command: str = "simulate"):
    """Run the requested computation and return the result object."""
    if command == "sweep":
        gammas = config.sweep or (config.gamma,)
        grid = config.grid.build()
        return SweepResult(gammas, tuple(compare_meters(g, grid, config.route) for g in gammas))
    if config.scenario == "speedMeter":
        return run_speed_meter(config.scenario_config())
    if config.scenario == "positionMeter":
        return run_position_meter(config.scenario_config())
    if config.scenario == "compare":
        return compare_meters(config.gamma, config.grid.build(), config.route)
    return consistency_report(config.gamma, config.grid.build())


def run(config: RunConfig, command: str = "simulate", out: str | None = None, stdout=None) -> int:
    """Execute ``config`` and write its CSV; returns the exit status."""
    stdout = sys.stdout if stdout is None else stdout
    try:
        text = emit_csv(execute(config, command), config)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = out if out is not None else config.output.path
    if path is None:
        stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speedmeter", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "force PSD of the configured scenario (speedMeter or positionMeter)",
        "compare": "speed meter against position meter on one grid",
        "consistency": "cross-check report between first-principles and closed-form routes",
        "sweep": "comparison repeated over several gamma values (--gammas or config 'sweep')",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--out", metavar="PATH", help="CSV destination (default: stdout)")
        p.add_argument("--gamma", type=float, metavar="X")
        p.add_argument("--grid-min", type=float)
        p.add_argument("--grid-max", type=float)
        p.add_argument("--grid-points", type=int)
        p.add_argument("--feedforward", choices=FEEDFORWARD)
        if name == "simulate":
            p.add_argument("--scenario", choices=("speedMeter", "positionMeter"))
        if name == "sweep":
            p.add_argument("--gammas", metavar="G1,G2,...", help="comma-separated gamma values")
    return parser


def _apply_overrides(doc: dict, args: argparse.Namespace) -> dict:
    doc = dict(doc)
    if args.command in ("compare", "consistency"):
        doc["scenario"] = args.command
    if getattr(args, "scenario", None):
        doc["scenario"] = args.scenario
    if args.gamma is not None:
        doc.pop("physical", None)
        doc["gamma"] = args.gamma
    grid = dict(doc.get("grid", {})) if isinstance(doc.get("grid", {}), dict) else doc["grid"]
    for flag, key in (("grid_min", "min"), ("grid_max", "max"), ("grid_points", "points")):
        if getattr(args, flag) is not None:
            grid[key] = getattr(args, flag)
    if grid:
        doc["grid"] = grid
    if args.feedforward is not None:
        readout = dict(doc.get("readout", {}))
        readout["feedforward"] = args.feedforward
        doc["readout"] = readout
    if getattr(args, "gammas", None):
        try:
            doc["sweep"] = [float(g) for g in args.gammas.split(",")]
        except ValueError:
            raise ConfigError("sweep", f"cannot parse --gammas {args.gammas!r}") from None
    return doc


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        doc: Any = {}
        if args.config:
            try:
                doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except OSError as exc:
                raise ConfigError("--config", str(exc)) from None
            except json.JSONDecodeError as exc:
                raise ConfigError("config", f"malformed JSON ({exc})") from None
            if not isinstance(doc, dict):
                raise ConfigError("config", "expected an object")
        config = config_from_dict(_apply_overrides(doc, args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config, args.command, args.out)


if __name__ == "__main__":
    sys.exit(main())
