"""Run configuration: TOML with one table per block (dotted keys such as
``grid.nx = 1024`` are equivalent).

Unknown blocks and keys are rejected so that typos do not silently fall back
to defaults.
"""
from __future__ import annotations

import dataclasses
import importlib.resources
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .discretization import Grid, TimeAxis
from .expr import ExpressionError, parse_expression
from .model import RegularizationParams, Scenario, ScenarioError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "."
    stem: str = "run"
    checkpoint: bool = False

    def path(self, suffix: str) -> Path:
        return Path(self.dir) / f"{self.stem}.{suffix}"


@dataclass(frozen=True)
class VerificationConfig:
    periodic_mode: bool = False
    manufactured: bool = False


@dataclass(frozen=True)
class AnalysisConfig:
    window_a: float | None = None
    window_b: float | None = None
    taper: float = 0.5
    quiescence_tol: float | None = 1e-6
    quiescence_zone: float | None = None
    margin: float | None = None
    reassembly: str = "every_step"
    battery_center: float | None = None


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    axis: TimeAxis
    scenario: Scenario
    ladder: tuple
    regularization: RegularizationParams
    outputs: OutputConfig = field(default_factory=OutputConfig)
    verification: VerificationConfig = field(default_factory=VerificationConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    source: str | None = None

    @property
    def window(self) -> tuple:
        """Analysis window ``K``; defaults to the middle half of the grid."""
        span = self.grid.x_max - self.grid.x_min
        a = self.analysis.window_a if self.analysis.window_a is not None else self.grid.x_min + 0.25 * span
        b = self.analysis.window_b if self.analysis.window_b is not None else self.grid.x_max - 0.25 * span
        return a, b

    @property
    def margin(self) -> float:
        if self.analysis.margin is not None:
            return self.analysis.margin
        return 0.05 * (self.grid.x_max - self.grid.x_min)

    def solver_options(self) -> dict:
        return {
            "periodic": self.verification.periodic_mode,
            "reassembly": self.analysis.reassembly,
            "quiescence_tol": self.analysis.quiescence_tol,
            "quiescence_zone": self.analysis.quiescence_zone,
        }

    def with_ladder(self, ladder) -> "RunConfig":
        ladder = _ladder(list(ladder))
        reg = _replace_epsilon(self.regularization, ladder[0])
        return RunConfig(self.grid, self.axis, self.scenario, ladder, reg, self.outputs,
                         self.verification, self.analysis, self.source)


_BLOCKS = {
    "grid": {"x_min", "x_max", "nx"},
    "time": {"T", "nt"},
    "scenario": {"zeta", "P", "p", "f", "u0", "u1", "nu", "mass_term_enabled"},
    "regularization": {"epsilon", "ladder", "R_mode", "R", "C_cap", "lambda_mode", "lambda",
                       "picard_tol", "picard_max_iter", "stop_metric"},
    "outputs": {"dir", "stem", "checkpoint"},
    "verification": {"periodic_mode", "manufactured"},
    "analysis": {"window_a", "window_b", "taper", "quiescence_tol", "quiescence_zone", "margin",
                 "reassembly", "battery_center"},
}
_REQUIRED = ("grid", "time", "scenario", "regularization")


def _check_keys(data: dict):
    for name in data:
        if name not in _BLOCKS:
            raise ConfigError(f"unknown block [{name}]")
        if not isinstance(data[name], dict):
            raise ConfigError(f"[{name}] must be a table")
        extra = set(data[name]) - _BLOCKS[name]
        if extra:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")
    for name in _REQUIRED:
        if name not in data:
            raise ConfigError(f"missing block [{name}]")


def _number(block: str, key: str, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{block}.{key} must be a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{block}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _flag(block: str, key: str, value) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{block}.{key} must be true or false, got {value!r}")
    return value


def _ladder(values) -> tuple:
    if len(values) == 0:
        raise ConfigError("epsilon ladder is empty")
    ladder = tuple(_number("regularization", "ladder", v) for v in values)
    if any(e <= 0 for e in ladder):
        raise ConfigError(f"ladder values must be positive, got {list(ladder)}")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError(f"ladder must be strictly decreasing, got {list(ladder)}")
    return ladder


def _replace_epsilon(reg: RegularizationParams, eps: float) -> RegularizationParams:
    return dataclasses.replace(reg, epsilon=eps)


def parse_config(data: dict, source: str | None = None) -> RunConfig:
    _check_keys(data)
    try:
        g = data["grid"]
        grid = Grid(_number("grid", "x_min", g.get("x_min")), _number("grid", "x_max", g.get("x_max")),
                    _number("grid", "nx", g.get("nx"), int))
        t = data["time"]
        axis = TimeAxis(_number("time", "T", t.get("T")), _number("time", "nt", t.get("nt"), int))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    s = data["scenario"]
    exprs = {}
    for key in ("zeta", "P", "p", "f", "u0", "u1"):
        value = s.get(key, "0")
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = repr(float(value))
        if not isinstance(value, str):
            raise ConfigError(f"scenario.{key} must be an expression string, got {value!r}")
        exprs[key] = value
    nu = _number("scenario", "nu", s.get("nu", 1.0))
    mass = _flag("scenario", "mass_term_enabled", s.get("mass_term_enabled", True))
    for key, text in exprs.items():
        try:
            parse_expression(text)
        except ExpressionError as exc:
            raise ConfigError(f"scenario.{key}: {exc}") from exc
    try:
        scenario = Scenario.from_strings(nu=nu, mass_term_enabled=mass, **exprs)
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from exc

    r = data["regularization"]
    if ("epsilon" in r) == ("ladder" in r):
        raise ConfigError("regularization needs exactly one of 'epsilon' or 'ladder'")
    if "ladder" in r:
        if not isinstance(r["ladder"], list):
            raise ConfigError("regularization.ladder must be a list")
        ladder = _ladder(r["ladder"])
    else:
        ladder = _ladder([r["epsilon"]])
    try:
        reg = RegularizationParams(
            epsilon=ladder[0],
            R_mode=r.get("R_mode", "auto"),
            R=None if "R" not in r else _number("regularization", "R", r["R"]),
            C_cap=_number("regularization", "C_cap", r.get("C_cap", 3.0)),
            lambda_mode=r.get("lambda_mode", "auto"),
            lam=None if "lambda" not in r else _number("regularization", "lambda", r["lambda"]),
            picard_tol=_number("regularization", "picard_tol", r.get("picard_tol", 1e-9)),
            picard_max_iter=_number("regularization", "picard_max_iter", r.get("picard_max_iter", 50), int),
            stop_metric=r.get("stop_metric", "graph"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    o = data.get("outputs", {})
    outputs = OutputConfig(
        dir=str(o.get("dir", ".")),
        stem=str(o.get("stem", Path(source).stem if source else "run")),
        checkpoint=_flag("outputs", "checkpoint", o.get("checkpoint", False)),
    )
    v = data.get("verification", {})
    verification = VerificationConfig(
        periodic_mode=_flag("verification", "periodic_mode", v.get("periodic_mode", False)),
        manufactured=_flag("verification", "manufactured", v.get("manufactured", False)),
    )
    a = data.get("analysis", {})

    def opt(key, default=None):
        return default if key not in a else _number("analysis", key, a[key])

    reassembly = a.get("reassembly", "every_step")
    if reassembly not in ("every_step", "cadence"):
        raise ConfigError(f"analysis.reassembly must be 'every_step' or 'cadence', got {reassembly!r}")
    analysis = AnalysisConfig(
        window_a=opt("window_a"), window_b=opt("window_b"), taper=opt("taper", 0.5),
        quiescence_tol=opt("quiescence_tol", 1e-6), quiescence_zone=opt("quiescence_zone"),
        margin=opt("margin"), reassembly=reassembly, battery_center=opt("battery_center"),
    )
    cfg = RunConfig(grid, axis, scenario, ladder, reg, outputs, verification, analysis, source)
    lo, hi = cfg.window
    if not (grid.x_min < lo < hi < grid.x_max):
        raise ConfigError(f"analysis window [{lo:g}, {hi:g}] must lie strictly inside the grid")
    if not 0 < analysis.taper <= 0.5 * (hi - lo):
        raise ConfigError("analysis.taper must be positive and at most half the window")
    return cfg


def loads_config(text: str, source: str | None = None) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return parse_config(data, source)


def shipped_config(name: str) -> Path:
    """Path of a config shipped with the package, e.g. ``"moving_mass_demo"``."""
    path = Path(str(importlib.resources.files("gaobeam") / "data" / f"{name}.toml"))
    if not path.is_file():
        raise ConfigError(f"no shipped config named {name!r}")
    return path


def load_config(path) -> RunConfig:
    """Load a TOML config; a bare name such as ``moving_mass_demo`` selects a shipped one."""
    path = Path(path)
    if not path.exists() and path.suffix == "" and path.parent == Path("."):
        path = shipped_config(path.name)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads_config(text, str(path))
