"""Weak-form residuals of the regularized and limit problems, and the
integration-by-parts identity for the concentrated mass term.

All double integrals use the trapezoid rule in space and time (Simpson's
rule is available as an independent cross-check).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from ..discretization import Grid, TimeAxis, d1, d2
from ..expr import Expression, differentiate, evaluate, parse_expression
from ..kernels import Mollifier, Truncation, smooth
from ..linear_solver import StateHistory
from ..model import ScenarioSamples, load_density, sample_scenario
from .norms import trace_values


class SupportError(ValueError):
    pass


@dataclass(frozen=True)
class TestFunction:
    """``v(t, x) = (1 - t/T)^3 (1 + shape t/T) bump((x - center) / width)``.

    ``v`` and its first two time derivatives vanish at ``t = T``, so the
    zero extension past ``T`` is C^2.
    """

    __test__ = False  # not a pytest class

    center: float
    width: float
    T: float
    shape: float = 0.0

    def __post_init__(self):
        if not (self.width > 0 and self.T > 0):
            raise ValueError("width and T must be positive")

    @cached_property
    def expression(self) -> Expression:
        c, w, T, a = (repr(float(v)) for v in (self.center, self.width, self.T, self.shape))
        return parse_expression(f"(1 - t/{T})^3*(1 + ({a})*t/{T})*bump((x - ({c}))/{w})")

    @cached_property
    def derivatives(self) -> dict:
        e = self.expression
        v_t = differentiate(e, "t")
        v_x = differentiate(e, "x")
        return {
            "v": e, "v_t": v_t, "v_tt": differentiate(v_t, "t"), "v_x": v_x,
            "v_xx": differentiate(v_x, "x"), "v_xt": differentiate(v_x, "t"),
        }

    def support(self):
        return self.center - self.width, self.center + self.width

    def check_support(self, grid: Grid):
        lo, hi = self.support()
        if lo <= grid.x[1] or hi >= grid.x[-2]:
            raise SupportError(f"test function support [{lo:g}, {hi:g}] is not inside the grid")

    def sample(self, grid: Grid, axis: TimeAxis) -> dict:
        self.check_support(grid)
        t = axis.times[:, None]
        x = grid.x[None, :]
        shape = (axis.nt + 1, grid.nx)
        return {k: np.array(np.broadcast_to(evaluate(e, t, x), shape)) for k, e in self.derivatives.items()}

    def on_path(self, times: np.ndarray, path: np.ndarray) -> dict:
        return {k: np.broadcast_to(evaluate(e, times, path), times.shape).astype(float)
                for k, e in self.derivatives.items()}


_OFFSETS = (0.0, 0.25, -0.35, 0.75, -0.75, 1.5, -1.5, 2.5, -2.5, 4.0, -4.0, 0.0)
_WIDTHS = (0.5, 1.0, 0.75, 1.0, 1.0, 1.5, 1.5, 2.0, 2.0, 2.5, 2.5, 3.0)
_SHAPES = (0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0)


def default_battery(path_mid: float, grid: Grid, axis: TimeAxis) -> list:
    """Twelve test functions around the load path, from tight to wide placements.

    Centers are clipped (and widths shrunk if needed) so that every support
    stays inside the inner 90% of the grid.
    """
    span = grid.x_max - grid.x_min
    lo, hi = grid.x_min + 0.05 * span, grid.x_max - 0.05 * span
    out = []
    for off, w, a in zip(_OFFSETS, _WIDTHS, _SHAPES):
        w = min(w, 0.45 * (hi - lo))
        c = min(max(path_mid + off, lo + w), hi - w)
        out.append(TestFunction(float(c), float(w), axis.T, a))
    return out


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def _space(values, dx, rule):
    if rule == "simpson":
        return integrate.simpson(values, dx=dx, axis=-1)
    return integrate.trapezoid(values, dx=dx, axis=-1)


def _time(values, dt, rule):
    if rule == "simpson":
        return integrate.simpson(values, dx=dt, axis=0)
    return integrate.trapezoid(values, dx=dt, axis=0)


def _double(values, dx, dt, rule):
    return float(_time(_space(values, dx, rule), dt, rule))


def _samples(scn, h: StateHistory) -> ScenarioSamples:
    if isinstance(scn, ScenarioSamples):
        return scn
    return sample_scenario(scn, h.grid, h.time_axis)


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

def weak_terms_regularized(h: StateHistory, v: TestFunction, m: Mollifier, scn,
                           trunc: Truncation | None = None, rule: str = "trapezoid") -> dict:
    """Individual integrals of the regularized weak form (they sum to zero for a solution)."""
    S = _samples(scn, h)
    V = v.sample(h.grid, h.time_axis)
    dx, dt = h.grid.dx, h.time_axis.dt
    I = lambda arr: _double(arr, dx, dt, rule)  # noqa: E731
    mass = 1.0 if S.mass_term_enabled else 0.0
    u, ut = h.u, h.u_t
    th = load_density(S, m)
    w1 = smooth(u, m, 1)
    psi = w1**3 / 3.0 if trunc is None else trunc.psi(w1)
    v_conv = smooth(V["v"], m, 0)
    vx_conv = smooth(V["v_x"], m, 0)
    nu = S.nu
    return {
        "ut_vt": I(ut * V["v_t"]),
        "initial_velocity": float(_space(ut[0] * V["v"][0], dx, rule)),
        "mass_ut_vt": mass * I(th * ut * V["v_t"]),
        "mass_initial_velocity": mass * float(_space(th[0] * ut[0] * V["v"][0], dx, rule)),
        "bending": -I(d2(u, dx) * V["v_xx"]),
        "cubic": -I(psi * vx_conv),
        "traction": I(w1 * (nu * S.p_x * v_conv + nu * S.p * vx_conv)),
        "distributed": I(S.f * V["v"]),
        "point": I(th * S.P[:, None] * V["v"]),
    }


def weak_residual_regularized(h: StateHistory, v: TestFunction, m: Mollifier, scn,
                              trunc: Truncation | None = None, rule: str = "trapezoid") -> float:
    return abs(sum(weak_terms_regularized(h, v, m, scn, trunc, rule).values()))


def weak_terms_limit(h: StateHistory, v: TestFunction, scn, rule: str = "trapezoid") -> dict:
    """Individual integrals of the limit weak form with traces along the load path.

    The initial-data terms use the unmollified ``u0`` and ``u1``.
    """
    S = _samples(scn, h)
    V = v.sample(h.grid, h.time_axis)
    dx, dt = h.grid.dx, h.time_axis.dt
    I = lambda arr: _double(arr, dx, dt, rule)  # noqa: E731
    mass = 1.0 if S.mass_term_enabled else 0.0
    u, ut = h.u, h.u_t
    ux, uxx = d1(u, dx), d2(u, dx)
    times, zeta, zdot = h.time_axis.times, S.zeta, S.zeta_dot
    Vz = v.on_path(times, zeta)
    u_z = trace_values(u, h.grid, zeta)
    ux_z = trace_values(u, h.grid, zeta, derivative=True)
    u0_z = float(trace_values(S.u0[None, :], h.grid, zeta[:1])[0])
    u1_z = float(trace_values(S.u1[None, :], h.grid, zeta[:1])[0])
    Tint = lambda arr: float(_time(arr, dt, rule))  # noqa: E731
    return {
        "ut_vt": I(ut * V["v_t"]),
        "bending": -I(uxx * V["v_xx"]),
        "cubic": -I(ux**3 * V["v_x"]) / 3.0,
        "traction": -I(S.nu * S.p * uxx * V["v"]),
        "mass_initial_displacement": -mass * u0_z * Vz["v_t"][0],
        "mass_trace_vtt": -mass * Tint(u_z * Vz["v_tt"]),
        "mass_trace_ux": -mass * Tint(zdot * ux_z * Vz["v_t"]),
        "mass_trace_vxt": -mass * Tint(zdot * u_z * Vz["v_xt"]),
        "distributed": I(S.f * V["v"]),
        "point": Tint(S.P * Vz["v"]),
        "initial_velocity": float(_space(S.u1 * V["v"][0], dx, rule)),
        "mass_initial_velocity": mass * u1_z * Vz["v"][0],
    }


def weak_residual_limit(h: StateHistory, v: TestFunction, scn, rule: str = "trapezoid") -> float:
    return abs(sum(weak_terms_limit(h, v, scn, rule).values()))


def _ibp_right(h: StateHistory, V: dict, th: np.ndarray, zdot: np.ndarray, rule: str) -> float:
    dx, dt = h.grid.dx, h.time_axis.dt
    u = h.u
    ux = d1(u, dx)
    z = zdot[:, None]
    return (
        -float(_space(th[0] * u[0] * V["v_t"][0], dx, rule))
        - _double(th * u * V["v_tt"], dx, dt, rule)
        - _double(z * th * ux * V["v_t"], dx, dt, rule)
        - _double(z * th * u * V["v_xt"], dx, dt, rule)
    )


def dirac_ibp_identity(h: StateHistory, v: TestFunction, m: Mollifier, scn, rule: str = "trapezoid") -> float:
    """``| int int theta u_t v_t - (integrated-by-parts form) |``."""
    S = _samples(scn, h)
    V = v.sample(h.grid, h.time_axis)
    th = load_density(S, m)
    left = _double(th * h.u_t * V["v_t"], h.grid.dx, h.time_axis.dt, rule)
    return abs(left - _ibp_right(h, V, th, S.zeta_dot, rule))


def trace_identity_gap(h: StateHistory, v: TestFunction, m: Mollifier, scn, rule: str = "trapezoid") -> float:
    """Mollified integrated-by-parts form minus ``int u_t(t, zeta) v_t(t, zeta) dt``.

    Meaningful only for smooth data, where the trace of ``u_t`` exists; it
    closes as ``epsilon``, ``dx`` and ``dt`` go to zero together.
    """
    S = _samples(scn, h)
    V = v.sample(h.grid, h.time_axis)
    th = load_density(S, m)
    right = _ibp_right(h, V, th, S.zeta_dot, rule)
    Vz = v.on_path(h.time_axis.times, S.zeta)
    ut_z = trace_values(h.u_t, h.grid, S.zeta)
    return abs(right - float(_time(ut_z * Vz["v_t"], h.time_axis.dt, rule)))
