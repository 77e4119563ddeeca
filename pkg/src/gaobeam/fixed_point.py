"""The truncated nonlinear map, weighted norms and the Picard iteration.

``apply_C`` maps a trajectory ``v`` to the forcing
``([(phi_R(v*theta') - nu p)(v*theta'')]*theta + h) F`` with the sign
convention ``h = -(f + theta P)``, i.e. the returned forcing is
``(N*theta + f + theta P) F``.  One Picard step is a linear solve with that
forcing and the mollified initial data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretization import Grid, TimeAxis, cumulative_time_integral, h2_norm, l2_norm
from .kernels import Mollifier, Truncation, make_mollifier, make_truncation, smooth
from .linear_solver import FLOOR, StateHistory, estimate_ratio, solve_linear
from .model import (
    RegularizationParams, Scenario, ScenarioSamples, coefficient_fields, forcing_h_samples,
    mollify_initial_data, sample_scenario,
)


class PicardNonConvergence(RuntimeError):
    def __init__(self, message: str, report: "PicardReport"):
        self.report = report
        super().__init__(message)


class PicardDivergence(PicardNonConvergence):
    pass


@dataclass(frozen=True)
class WeightedNormParams:
    """``lam`` is the exponential rate; ``mode`` is ``"plain"`` or ``"graph"``."""

    lam: float = 0.0
    mode: str = "graph"

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.mode not in ("plain", "graph"):
            raise ValueError(f"mode must be 'plain' or 'graph', got {self.mode!r}")


@dataclass
class PicardReport:
    iterates_used: int = 0
    diffs: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    ball_radius_2MR: float = 0.0
    lambda_used: float = 1.0
    R: float = 0.0
    epsilon: float = 0.0
    converged: bool = False
    stop_metric: str = "graph"
    iterate_norms: list = field(default_factory=list)
    inside_ball: bool = True
    amplification: float = 0.0
    residual: float = float("nan")
    max_w1: float = float("nan")
    truncation_inactive: bool = True

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "iterates_used": self.iterates_used,
            "diffs": list(self.diffs),
            "ratios": list(self.ratios),
            "lambda": self.lambda_used,
            "ball_radius": self.ball_radius_2MR,
            "R": self.R,
            "converged": self.converged,
            "stop_metric": self.stop_metric,
            "iterate_norms": list(self.iterate_norms),
            "inside_ball": self.inside_ball,
            "amplification": self.amplification,
            "fixed_point_residual": self.residual,
            "max_abs_u_conv_dtheta": self.max_w1,
            "truncation_inactive": self.truncation_inactive,
        }


def _samples_for(scn, grid: Grid, axis: TimeAxis) -> ScenarioSamples:
    if isinstance(scn, ScenarioSamples):
        if scn.grid != grid or scn.axis != axis:
            raise ValueError("scenario samples were taken on a different grid or time axis")
        return scn
    return sample_scenario(scn, grid, axis)


# ---------------------------------------------------------------------------
# the nonlinear map
# ---------------------------------------------------------------------------

def nonlinear_term(u: np.ndarray, m: Mollifier, trunc: Truncation, samples: ScenarioSamples) -> np.ndarray:
    """``[(phi_R(u*theta') - nu p)(u*theta'')]*theta`` along the last axis."""
    w1 = smooth(u, m, 1)
    w2 = smooth(u, m, 2)
    return smooth((trunc.phi(w1) - samples.nu * samples.p) * w2, m, 0)


def apply_C(v: StateHistory, m: Mollifier, trunc: Truncation, scn) -> np.ndarray:
    """Forcing ``(N*theta + h') F`` for the next linear solve, as a (nt+1, nx) array."""
    samples = _samples_for(scn, v.grid, v.time_axis)
    F, _ = coefficient_fields(samples, m)
    return (nonlinear_term(v.u, m, trunc, samples) - forcing_h_samples(samples, m)) * F


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def step_norms(h, mode: str = "graph", dx: float | None = None) -> np.ndarray:
    """Per-step norms: graph ``|u|_{H^2} + |u_t|`` or plain ``|u|_{L^2}``.

    ``h`` may be a StateHistory, a (steps, nx) array (needs ``dx``) or an
    already reduced 1-D series.
    """
    if isinstance(h, StateHistory):
        dx = h.grid.dx
        if mode == "graph":
            return h2_norm(h.u, dx) + l2_norm(h.u_t, dx)
        return l2_norm(h.u, dx)
    arr = np.asarray(h, dtype=float)
    if arr.ndim == 1:
        return np.abs(arr)
    if dx is None:
        raise ValueError("dx is required for array input")
    return h2_norm(arr, dx) if mode == "graph" else l2_norm(arr, dx)


def weighted_norm(h, params: WeightedNormParams, t: float, times=None, dx: float | None = None) -> float:
    """``sup_{s <= t} exp(-lam s) |h(s)|`` in the requested mode."""
    series = step_norms(h, params.mode, dx)
    if times is None:
        if not isinstance(h, StateHistory):
            raise ValueError("times are required unless a StateHistory is given")
        times = h.time_axis.times
    times = np.asarray(times, dtype=float)
    if t < times[0] or t > times[-1] * (1 + 1e-12):
        raise ValueError(f"t={t} lies outside the time axis")
    keep = times <= t * (1 + 1e-12) + 1e-300
    return float(np.max(np.exp(-params.lam * times[keep]) * series[keep]))


def _difference(a: StateHistory, b: StateHistory) -> StateHistory:
    return StateHistory(a.grid, a.time_axis, a.u - b.u, a.u_t - b.u_t)


def space_time_l2(values: np.ndarray, dx: float, dt: float) -> float:
    per_step = l2_norm(values, dx) ** 2
    return float(np.sqrt(cumulative_time_integral(per_step, dt)[-1]))


# ---------------------------------------------------------------------------
# truncation radius and weight selection
# ---------------------------------------------------------------------------

def resolve_R(reg: RegularizationParams, epsilon: float, bound_C: float | None = None) -> float:
    """``R = bound_C / epsilon`` in auto mode, otherwise the configured ``R``."""
    if reg.R_mode == "explicit":
        return float(reg.R)
    c = reg.C_cap if bound_C is None else bound_C
    if not c > 0:
        raise ValueError("bound_C must be positive")
    return float(c) / float(epsilon)


def lambda_from_amplification(a: float) -> float:
    """``max(1, 4 a^2)``."""
    return max(1.0, 4.0 * float(a) ** 2)


def measure_amplification(composed_difference, probe_a: StateHistory, probe_b: StateHistory) -> float:
    """``|BC(a) - BC(b)| / |a - b|`` in the unweighted graph norm (0 for equal probes)."""
    params = WeightedNormParams(0.0, "graph")
    T = probe_a.time_axis.T
    den = weighted_norm(_difference(probe_a, probe_b), params, T)
    if den <= FLOOR:
        return 0.0
    num = weighted_norm(composed_difference(probe_a, probe_b), params, T)
    return num / den


def lambda_auto(composed_difference, linear_solve_zero, forcing_a: np.ndarray, forcing_b: np.ndarray,
                scale: float, dx: float, dt: float):
    """Estimate the Lipschitz constant of the composed map on two probes.

    The forcings are rescaled to L^2(0,T;L^2) norm ``scale`` before the probe
    solves, so the result does not depend on their magnitude.  Returns
    ``(lambda, amplification)``.
    """
    probes = []
    for g in (forcing_a, forcing_b):
        n = space_time_l2(g, dx, dt)
        probes.append(linear_solve_zero(g * (scale / n) if n > 0 else np.zeros_like(g)))
    a = measure_amplification(composed_difference, *probes)
    return lambda_from_amplification(a), a


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PicardSetup:
    """Everything a Picard run needs, evaluated once."""

    samples: ScenarioSamples
    mollifier: Mollifier
    truncation: Truncation
    F: np.ndarray
    G: np.ndarray
    u0: object
    u1: object
    solver_options: dict

    def solve(self, g: np.ndarray, zero_data: bool = False) -> StateHistory:
        """Linear solve with the mollified data, or with zero data for probes.

        Probe solves are diagnostics only, so the quiescence monitor is off.
        """
        u0, u1 = self.u0, self.u1
        options = self.solver_options
        if zero_data:
            u0 = type(u0)(u0.grid, np.zeros_like(u0.values))
            u1 = type(u1)(u1.grid, np.zeros_like(u1.values))
            options = {**options, "quiescence_tol": None}
        return solve_linear(self.F, self.G, g, u0, u1, self.samples.axis, zeta=self.samples.zeta, **options)

    def C(self, v: StateHistory) -> np.ndarray:
        return apply_C(v, self.mollifier, self.truncation, self.samples)

    def step(self, v: StateHistory) -> StateHistory:
        return self.solve(self.C(v))

    def composed_difference(self, a: StateHistory, b: StateHistory) -> StateHistory:
        return self.solve(self.C(a) - self.C(b), zero_data=True)


def make_setup(scn, epsilon: float, R: float, grid: Grid, axis: TimeAxis, solver_options: dict | None = None) -> PicardSetup:
    samples = _samples_for(scn, grid, axis)
    m = make_mollifier(epsilon, grid.dx)
    trunc = make_truncation(R)
    F, G = coefficient_fields(samples, m)
    scn_obj = scn if isinstance(scn, Scenario) else None
    if scn_obj is None:
        raise TypeError("make_setup needs a Scenario to mollify the initial data")
    u0, u1 = mollify_initial_data(scn_obj, m, grid)
    return PicardSetup(samples, m, trunc, F, G, u0, u1, dict(solver_options or {}))


def picard_solve(scn: Scenario, reg: RegularizationParams, grid: Grid, axis: TimeAxis,
                 solver_options: dict | None = None):
    """Iterate ``v <- B_T(apply_C(v))`` from the linear solve without nonlinearity.

    Returns ``(history, report)``; raises :class:`PicardDivergence` after three
    consecutive expanding steps and :class:`PicardNonConvergence` at
    ``picard_max_iter``.
    """
    R = resolve_R(reg, reg.epsilon)
    setup = make_setup(scn, reg.epsilon, R, grid, axis, solver_options)
    dx, dt, T = grid.dx, axis.dt, axis.T
    report = PicardReport(R=R, epsilon=reg.epsilon, stop_metric=reg.stop_metric)

    h0 = -forcing_h_samples(setup.samples, setup.mollifier) * setup.F  # C(0)
    v = setup.solve(h0)

    c0 = space_time_l2(h0, dx, dt)
    if reg.lambda_mode == "auto":
        tfac = np.cos(np.pi * axis.times / T)[:, None]
        lam, amp = lambda_auto(setup.composed_difference, lambda g: setup.solve(g, zero_data=True),
                               h0, h0 * tfac, c0 if c0 > 0 else 1.0, dx, dt)
    else:
        lam = float(reg.lam)
        amp = float("nan")
    report.lambda_used = lam
    report.amplification = amp

    graph = WeightedNormParams(lam, "graph")
    data_size = h2_norm(setup.u0.values, dx) + l2_norm(setup.u1.values, dx) + c0
    c_est = max(estimate_ratio(v, setup.u0, setup.u1, h0), 0.0 if math.isnan(amp) else amp)
    report.ball_radius_2MR = 2.0 * c_est * data_size

    def metric(d: StateHistory) -> float:
        if reg.stop_metric == "l2":
            return space_time_l2(d.u, dx, dt)
        return weighted_norm(d, graph, T)

    report.iterate_norms.append(weighted_norm(v, graph, T))
    expanding = 0
    for k in range(1, reg.picard_max_iter + 1):
        v_new = setup.step(v)
        d = metric(_difference(v_new, v))
        size = metric(v_new)
        report.iterates_used = k
        report.diffs.append(d)
        report.iterate_norms.append(weighted_norm(v_new, graph, T))
        if len(report.diffs) > 1:
            prev = report.diffs[-2]
            ratio = d / prev if prev > 0 else 0.0
            report.ratios.append(ratio)
            expanding = expanding + 1 if ratio > 1.0 else 0
        v = v_new
        if d <= reg.picard_tol * (1.0 + size):
            report.converged = True
            break
        if expanding >= 3:
            report.inside_ball = all(n <= report.ball_radius_2MR * (1 + 1e-12) for n in report.iterate_norms)
            raise PicardDivergence(f"Picard iteration diverged at iterate {k} (ratios {report.ratios[-3:]})", report)
    report.inside_ball = all(n <= report.ball_radius_2MR * (1 + 1e-12) for n in report.iterate_norms)
    if not report.converged:
        raise PicardNonConvergence(
            f"Picard iteration did not reach tol {reg.picard_tol:g} in {reg.picard_max_iter} iterates", report
        )
    report.residual = weighted_norm(_difference(setup.step(v), v), graph, T)
    w1 = smooth(v.u, setup.mollifier, 1)
    report.max_w1 = float(np.max(np.abs(w1)))
    report.truncation_inactive = report.max_w1 <= R
    return v, report
