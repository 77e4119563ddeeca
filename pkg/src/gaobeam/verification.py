"""Verification studies for the linear solver and the trace identity.

Each study returns plain numbers (errors, orders, ratios) so that tests and
the CLI can apply their own thresholds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import Field, Grid, TimeAxis, l2_norm
from .expr import BinOp, differentiate, evaluate, parse_expression
from .fixed_point import make_setup
from .linear_solver import estimate_ratio, solve_linear
from .model import Scenario, forcing_h_samples
from .analysis.weakforms import TestFunction, trace_identity_gap

MANUFACTURED = "bump(x - 1)*cos(t)"


@dataclass(frozen=True)
class ConvergenceStudy:
    """Errors on successively halved steps and the observed orders between them."""

    steps: tuple
    errors: tuple

    @property
    def orders(self) -> tuple:
        e = np.asarray(self.errors)
        return tuple(float(v) for v in np.log2(e[:-1] / e[1:]))

    def to_dict(self) -> dict:
        return {"steps": list(self.steps), "errors": list(self.errors), "orders": list(self.orders)}


def manufactured_error(nx: int, nt: int, T: float = 1.0, x_min: float = -0.5, x_max: float = 2.5,
                       source: str = MANUFACTURED) -> float:
    """Max-in-time L2 error of the clamped solver against a manufactured solution.

    The forcing is ``u_tt + u_xxxx`` of the manufactured field, computed
    symbolically.  The field must vanish near both ends of the interval.
    """
    um = parse_expression(source)
    g_expr = BinOp("+", differentiate(um, "t", 2), differentiate(um, "x", 4))
    grid = Grid(x_min, x_max, nx)
    axis = TimeAxis(T, nt)
    t = axis.times[:, None]
    x = grid.x[None, :]
    shape = (nt + 1, nx)
    g = np.broadcast_to(evaluate(g_expr, t, x), shape)
    exact = np.broadcast_to(evaluate(um, t, x), shape)
    u1 = np.broadcast_to(evaluate(differentiate(um, "t"), 0.0, grid.x), (nx,))
    ones = np.ones(shape)
    h = solve_linear(ones, np.zeros(shape), g, Field(grid, exact[0].copy()), Field(grid, np.array(u1)), axis,
                     quiescence_tol=None)
    return float(np.max(l2_norm(h.u - exact, grid.dx)))


def manufactured_convergence(which: str, levels: int = 3, **kwargs) -> ConvergenceStudy:
    """Refine ``dx`` (``which="dx"``) or ``dt`` (``which="dt"``) with the other step held fine.

    Defaults keep the frozen step well below the refined one so that the
    observed order belongs to the refined variable alone.
    """
    if which == "dx":
        nxs = [kwargs.pop("nx", 601) * 2**k - (2**k - 1) for k in range(levels)]
        nt = kwargs.pop("nt", 500)
        errors = [manufactured_error(n, nt, **kwargs) for n in nxs]
        span = kwargs.get("x_max", 2.5) - kwargs.get("x_min", -0.5)
        steps = [span / (n - 1) for n in nxs]
    elif which == "dt":
        kwargs.setdefault("x_min", -1.5)
        kwargs.setdefault("x_max", 3.5)
        nx = kwargs.pop("nx", 4001)
        nts = [kwargs.pop("nt", 20) * 2**k for k in range(levels)]
        errors = [manufactured_error(nx, n, **kwargs) for n in nts]
        steps = [kwargs.get("T", 1.0) / n for n in nts]
    else:
        raise ValueError(f"which must be 'dx' or 'dt', got {which!r}")
    return ConvergenceStudy(tuple(steps), tuple(errors))


def plane_wave_phase_error(k: int, nx: int = 257, steps_per_period: int = 400, periods: float = 1.0) -> float:
    """Relative phase error of ``cos(kx) cos(k^2 t)`` on the periodic grid ``[0, 2 pi]``.

    The phase is tracked from the projections of ``u`` and ``u_t`` on
    ``cos(kx)``, unwrapped in time, and compared to ``k^2 t`` at the end.
    """
    if k < 1:
        raise ValueError("wavenumber must be a positive integer")
    omega = float(k * k)
    T = periods * 2.0 * np.pi / omega
    grid = Grid(0.0, 2.0 * np.pi, nx)
    axis = TimeAxis(T, max(2, int(round(periods * steps_per_period))))
    mode = np.cos(k * grid.x)
    mode[-1] = mode[0]
    shape = (axis.nt + 1, nx)
    h = solve_linear(np.ones(shape), np.zeros(shape), np.zeros(shape), Field(grid, mode),
                     Field(grid, np.zeros(nx)), axis, periodic=True)
    core = mode[:-1]
    norm = float(np.dot(core, core))
    a = h.u[:, :-1] @ core / norm
    s = -(h.u_t[:, :-1] @ core) / (norm * omega)
    phase = np.unwrap(np.arctan2(s, a))
    return float(abs(phase[-1] - omega * T) / (omega * T))


def estimate_ratio_refinement(scn: Scenario, epsilon: float, grid: Grid, axis: TimeAxis,
                              factors=(1, 2, 4), solver_options: dict | None = None) -> tuple:
    """Estimate ratio of the first linear solve (no nonlinearity) on refined grids.

    ``factors`` multiply both the number of space and time intervals.
    """
    out = []
    for f in factors:
        g = grid.refined(f)
        a = axis.refined(f)
        setup = make_setup(scn, epsilon, 3.0 / epsilon, g, a, solver_options)
        h0 = -forcing_h_samples(setup.samples, setup.mollifier) * setup.F
        h = setup.solve(h0)
        out.append(estimate_ratio(h, setup.u0, setup.u1, h0))
    return tuple(out)


def smooth_trace_scenario() -> Scenario:
    """Smooth data with a moving mass and no point load, so ``u_t`` has a trace."""
    return Scenario.from_strings(
        zeta="0.4*t - 0.1", P="0", p="0", f="3*bump(x/1.5)*sin(4*t)",
        u0="0.5*bump(x/1.5)", u1="0", nu=1.0, mass_term_enabled=True,
    )


def trace_identity_study(levels=((0.2, 0.01, 100), (0.1, 0.005, 200), (0.05, 0.0025, 400)),
                         T: float = 0.5, half_width: float = 4.0, tol: float = 1e-8) -> tuple:
    """Gap between the mollified integrated-by-parts form and the trace form.

    ``levels`` are ``(epsilon, dx, nt)`` triples refined together; the run is
    the converged Picard solution of :func:`smooth_trace_scenario`.
    """
    from .fixed_point import picard_solve
    from .kernels import make_mollifier
    from .model import RegularizationParams

    scn = smooth_trace_scenario()
    v = TestFunction(0.0, 1.0, T, 1.0)
    gaps = []
    for eps, dx, nt in levels:
        grid = Grid(-half_width, half_width, int(round(2 * half_width / dx)) + 1)
        axis = TimeAxis(T, nt)
        h, _ = picard_solve(scn, RegularizationParams(eps, picard_tol=tol), grid, axis,
                            {"quiescence_tol": None})
        gaps.append(trace_identity_gap(h, v, make_mollifier(eps, dx), scn))
    return tuple(gaps)
