"""Scenario data and the coefficient fields of the regularized moving-mass problem.

In multiplied form the regularized equation reads::

    (1 + theta) u_tt - zeta' theta' u_t + u_xxxx - [(phi_R(u*theta') - nu p)(u*theta'')]*theta
        = f + theta P

with ``theta = theta_eps(x - zeta(t))``.  Dividing by ``1 + theta`` gives
``u_tt + F u_xxxx + G u_t = (N*theta - h) F`` with the coefficient fields below.
When the mass term is disabled ``F = 1`` and ``G = 0`` while the point load
``theta P`` is kept.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretization import Field, Grid, GridMismatchError, TimeAxis, d1, h2_norm, l2_norm, trapezoid
from .expr import Expression, differentiate, evaluate, parse_expression, to_string, variables
from .kernels import Mollifier, smooth

__all__ = [
    "Grid", "TimeAxis", "Field", "GridMismatchError", "Scenario", "ScenarioError",
    "RegularizationParams", "ScenarioSamples", "sample_scenario", "coefficient_F",
    "coefficient_G", "coefficient_fields", "forcing_h", "mollify_initial_data",
    "validate_scenario", "support_margin_max", "forcing_h_samples", "load_density",
]


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Problem data as expressions; time derivatives are derived symbolically."""

    zeta: Expression
    P: Expression
    p: Expression
    f: Expression
    u0: Expression
    u1: Expression
    nu: float = 1.0
    mass_term_enabled: bool = True
    zeta_dot: Expression = field(init=False, repr=False)
    zeta_ddot: Expression = field(init=False, repr=False)
    p_x: Expression = field(init=False, repr=False)

    def __post_init__(self):
        for name, allowed in (("zeta", {"t"}), ("P", {"t"}), ("u0", {"x"}), ("u1", {"x"})):
            extra = variables(getattr(self, name)) - allowed
            if extra:
                raise ScenarioError(f"{name} may only depend on {sorted(allowed)}, found {sorted(extra)}")
        if not np.isfinite(self.nu):
            raise ScenarioError("nu must be finite")
        object.__setattr__(self, "zeta_dot", differentiate(self.zeta, "t"))
        object.__setattr__(self, "zeta_ddot", differentiate(self.zeta, "t", 2))
        object.__setattr__(self, "p_x", differentiate(self.p, "x"))

    @classmethod
    def from_strings(cls, zeta="0", P="0", p="0", f="0", u0="0", u1="0", nu=1.0, mass_term_enabled=True):
        return cls(
            parse_expression(zeta), parse_expression(P), parse_expression(p),
            parse_expression(f), parse_expression(u0), parse_expression(u1),
            float(nu), bool(mass_term_enabled),
        )

    def sources(self) -> dict:
        return {k: to_string(getattr(self, k)) for k in ("zeta", "P", "p", "f", "u0", "u1")}

    def zeta_at(self, t):
        return _time_values(self.zeta, t)

    def zeta_dot_at(self, t):
        return _time_values(self.zeta_dot, t)

    def zeta_ddot_at(self, t):
        return _time_values(self.zeta_ddot, t)

    def P_at(self, t):
        return _time_values(self.P, t)


def _time_values(e: Expression, t):
    t = np.asarray(t, dtype=float)
    return np.broadcast_to(evaluate(e, t, 0.0), t.shape).astype(float)


def _space_time(e: Expression, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = evaluate(e, np.asarray(t, dtype=float)[:, None], np.asarray(x, dtype=float)[None, :])
    return np.array(np.broadcast_to(out, (len(t), len(x))), dtype=float)


def _space(e: Expression, x: np.ndarray) -> np.ndarray:
    return np.array(np.broadcast_to(evaluate(e, 0.0, x), x.shape), dtype=float)


@dataclass(frozen=True)
class RegularizationParams:
    """Mollifier scale, truncation radius and Picard controls.

    ``R_mode`` is ``"explicit"`` (use ``R``) or ``"auto"`` (``R = C_cap / epsilon``);
    ``lambda_mode`` is ``"explicit"`` or ``"auto"``.
    """

    epsilon: float
    R_mode: str = "auto"
    R: float | None = None
    C_cap: float = 3.0
    lambda_mode: str = "auto"
    lam: float | None = None
    picard_tol: float = 1e-9
    picard_max_iter: int = 50
    stop_metric: str = "graph"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.R_mode not in ("auto", "explicit"):
            raise ValueError(f"R_mode must be 'auto' or 'explicit', got {self.R_mode!r}")
        if self.R_mode == "explicit" and not (self.R is not None and self.R > 0):
            raise ValueError("explicit R_mode needs R > 0")
        if self.R_mode == "auto" and not self.C_cap > 0:
            raise ValueError("auto R_mode needs C_cap > 0")
        if self.lambda_mode not in ("auto", "explicit"):
            raise ValueError(f"lambda_mode must be 'auto' or 'explicit', got {self.lambda_mode!r}")
        if self.lambda_mode == "explicit" and not (self.lam is not None and np.isfinite(self.lam) and self.lam >= 0):
            raise ValueError("explicit lambda_mode needs a finite lambda >= 0")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if int(self.picard_max_iter) < 1:
            raise ValueError("picard_max_iter must be >= 1")
        if self.stop_metric not in ("graph", "l2"):
            raise ValueError(f"stop_metric must be 'graph' or 'l2', got {self.stop_metric!r}")


@dataclass(frozen=True, eq=False)
class ScenarioSamples:
    """Scenario data sampled on a grid and time axis (arrays are time x space)."""

    grid: Grid
    axis: TimeAxis
    zeta: np.ndarray
    zeta_dot: np.ndarray
    zeta_ddot: np.ndarray
    P: np.ndarray
    p: np.ndarray
    p_x: np.ndarray
    f: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    nu: float
    mass_term_enabled: bool


def sample_scenario(scn: Scenario, grid: Grid, axis: TimeAxis) -> ScenarioSamples:
    t, x = axis.times, grid.x
    out = ScenarioSamples(
        grid, axis,
        scn.zeta_at(t), scn.zeta_dot_at(t), scn.zeta_ddot_at(t), scn.P_at(t),
        _space_time(scn.p, t, x), _space_time(scn.p_x, t, x), _space_time(scn.f, t, x),
        _space(scn.u0, x), _space(scn.u1, x), scn.nu, scn.mass_term_enabled,
    )
    for name in ("zeta", "zeta_dot", "zeta_ddot", "P", "p", "p_x", "f", "u0", "u1"):
        arr = getattr(out, name)
        if not np.all(np.isfinite(arr)):
            raise ScenarioError(f"scenario function {name} is not finite on the grid")
        arr.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# coefficient fields
# ---------------------------------------------------------------------------

def coefficient_F(m: Mollifier, zeta_t, x):
    """``1 / (1 + theta_eps(x - zeta_t))``."""
    return 1.0 / (1.0 + m(np.asarray(x, dtype=float) - zeta_t))


def coefficient_G(m: Mollifier, zeta_t, zeta_dot_t, x):
    """``-zeta_dot * theta_eps'(x - zeta_t) / (1 + theta_eps(x - zeta_t))``."""
    s = np.asarray(x, dtype=float) - zeta_t
    return -zeta_dot_t * m(s, 1) / (1.0 + m(s))


def coefficient_fields(samples: ScenarioSamples, m: Mollifier):
    """``(F, G)`` on the whole time axis; ``F = 1, G = 0`` without the mass term."""
    shape = (samples.axis.nt + 1, samples.grid.nx)
    if not samples.mass_term_enabled:
        return np.ones(shape), np.zeros(shape)
    s = samples.grid.x[None, :] - samples.zeta[:, None]
    th = m(s)
    F = 1.0 / (1.0 + th)
    G = -samples.zeta_dot[:, None] * m(s, 1) * F
    return F, G


def load_density(samples: ScenarioSamples, m: Mollifier) -> np.ndarray:
    """``theta_eps(x - zeta(t))`` on the time axis."""
    return m(samples.grid.x[None, :] - samples.zeta[:, None])


def forcing_h(scn: Scenario, m: Mollifier, t: float, grid: Grid) -> Field:
    """``h = -f(t,.) - P(t) theta_eps(. - zeta(t))``."""
    x = grid.x
    f = np.broadcast_to(evaluate(scn.f, t, x), x.shape)
    P = float(scn.P_at(t))
    return Field(grid, -f - P * m(x - float(scn.zeta_at(t))))


def forcing_h_samples(samples: ScenarioSamples, m: Mollifier) -> np.ndarray:
    return -samples.f - samples.P[:, None] * load_density(samples, m)


# ---------------------------------------------------------------------------
# initial data and validation
# ---------------------------------------------------------------------------

def support_margin_max(values: np.ndarray, grid: Grid, margin: float) -> float:
    """Largest ``|values|`` over the two outer zones of width ``margin``."""
    x = grid.x
    zone = (x < grid.x_min + margin) | (x > grid.x_max - margin)
    if not np.any(zone):
        return 0.0
    return float(np.max(np.abs(np.asarray(values)[..., zone])))


def mollify_initial_data(scn: Scenario, m: Mollifier, grid: Grid):
    """``(u0 * theta_eps, u1 * theta_eps)`` as fields on ``grid``."""
    if not np.isclose(grid.dx, m.dx, rtol=1e-12, atol=0.0):
        raise GridMismatchError(f"grid spacing {grid.dx:g} differs from mollifier spacing {m.dx:g}")
    u0 = _space(scn.u0, grid.x)
    u1 = _space(scn.u1, grid.x)
    margin = m.epsilon + grid.dx
    for name, arr in (("u0", u0), ("u1", u1)):
        if support_margin_max(arr, grid, margin) != 0.0:
            raise ScenarioError(f"{name} is not zero within {margin:g} of the boundary")
    return Field(grid, smooth(u0, m)), Field(grid, smooth(u1, m))


def validate_scenario(scn: Scenario, grid: Grid, axis: TimeAxis, margin: float) -> ScenarioSamples:
    """Sample the scenario and check finiteness, load path and support margins."""
    samples = sample_scenario(scn, grid, axis)
    if not (margin >= 0 and 2 * margin < grid.x_max - grid.x_min):
        raise ScenarioError(f"support margin {margin} does not fit the grid")
    lo, hi = grid.x_min + margin, grid.x_max - margin
    if samples.zeta.min() < lo or samples.zeta.max() > hi:
        raise ScenarioError(
            f"load path zeta leaves [{lo:g}, {hi:g}] (range {samples.zeta.min():g}..{samples.zeta.max():g})"
        )
    for name in ("u0", "u1", "f"):
        worst = support_margin_max(getattr(samples, name), grid, margin)
        if worst != 0.0:
            raise ScenarioError(f"{name} is not supported inside the margin {margin:g} (max {worst:.3e} in the outer zone)")
    dx = grid.dx
    # u0 in H^2 and u1 in H^1 on the grid (finite discrete norms)
    if not np.isfinite(h2_norm(samples.u0, dx)):
        raise ScenarioError("u0 does not have a finite discrete H^2 norm")
    h1 = np.sqrt(l2_norm(samples.u1, dx) ** 2 + trapezoid(d1(samples.u1, dx) ** 2, dx))
    if not np.isfinite(h1):
        raise ScenarioError("u1 does not have a finite discrete H^1 norm")
    return samples
