"""Runs along an epsilon ladder and the Cauchy-type diagnostics between them."""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..discretization import Grid, TimeAxis, d1, h2_norm, l2_norm, trapezoid
from ..fixed_point import PicardNonConvergence, picard_solve
from ..kernels import make_mollifier, make_truncation, smooth
from ..linear_solver import StateHistory, history_norms
from ..model import RegularizationParams, Scenario, sample_scenario
from .energy import EnergyLedger, energy_ledger, uniform_bound_check
from .norms import SobolevNormSpec, sobolev_norm
from .weakforms import default_battery, dirac_ibp_identity, weak_residual_limit, weak_residual_regularized

ALPHAS = (0.5, 1.0)


@dataclass
class MemberResult:
    epsilon: float
    history: StateHistory | None = None
    picard: dict | None = None
    failure: str | None = None
    ledger: EnergyLedger | None = None
    weak39: list = field(default_factory=list)
    weak13: list = field(default_factory=list)
    ibp: list = field(default_factory=list)
    initial_datum: float = float("nan")
    sup_h2: float = float("nan")
    sup_l2: float = float("nan")
    sup_graph: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.failure is None

    def to_dict(self) -> dict:
        out = {
            "epsilon": self.epsilon,
            "status": "ok" if self.ok else "failed",
            "failure": self.failure,
            "picard": self.picard,
        }
        if self.ok:
            out.update({
                "initial_datum_l2": self.initial_datum,
                "sup_h2": self.sup_h2,
                "sup_l2": self.sup_l2,
                "sup_graph_norm": self.sup_graph,
                "weak39_residuals": list(self.weak39),
                "weak13_residuals": list(self.weak13),
                "dirac_ibp_differences": list(self.ibp),
                "energy_final": {
                    "kinetic": float(self.ledger.kinetic[-1]),
                    "bending": float(self.ledger.bending[-1]),
                    "nonlinear_mu": float(self.ledger.nonlinear_mu[-1]),
                    "concentrated": float(self.ledger.concentrated[-1]),
                    "tau_residual": float(self.ledger.tau_residual[-1]),
                    "max_abs_tau_residual": float(np.max(np.abs(self.ledger.tau_residual))),
                    "min_nonlinear_mu": float(np.min(self.ledger.nonlinear_mu)),
                    "min_concentrated": float(np.min(self.ledger.concentrated)),
                },
            })
        return out


@dataclass
class SweepReport:
    ladder: tuple
    members: list
    pairs: list
    uniform_ratio: float | None
    window: SobolevNormSpec

    @property
    def failed(self) -> list:
        return [m.epsilon for m in self.members if not m.ok]

    def to_dict(self) -> dict:
        return {
            "ladder": list(self.ladder),
            "window": {"a": self.window.a, "b": self.window.b, "taper": self.window.taper},
            "uniform_bound_ratio": self.uniform_ratio,
            "members": [m.to_dict() for m in self.members],
            "pairs": list(self.pairs),
            "failed_members": self.failed,
        }


def initial_datum_check(h: StateHistory, scn) -> float:
    """``| u(0) - u0 |_{L^2}`` for a run started from mollified data."""
    u0 = scn.u0 if hasattr(scn, "axis") else sample_scenario(scn, h.grid, h.time_axis).u0
    return float(l2_norm(h.u[0] - u0, h.grid.dx))


def run_member(scn: Scenario, reg: RegularizationParams, grid: Grid, axis: TimeAxis,
               solver_options: dict | None = None, battery_center: float | None = None) -> MemberResult:
    """Picard solve plus per-member analysis; failures are captured, not raised."""
    res = MemberResult(reg.epsilon)
    try:
        h, rep = picard_solve(scn, reg, grid, axis, solver_options)
    except PicardNonConvergence as exc:
        res.failure = f"{type(exc).__name__}: {exc}"
        res.picard = exc.report.to_dict()
        return res
    except (RuntimeError, ValueError, ArithmeticError) as exc:
        res.failure = f"{type(exc).__name__}: {exc}"
        return res
    samples = sample_scenario(scn, grid, axis)
    m = make_mollifier(reg.epsilon, grid.dx)
    trunc = make_truncation(rep.R)
    center = float(np.median(samples.zeta)) if battery_center is None else battery_center
    battery = default_battery(center, grid, axis)
    res.history = h
    res.picard = rep.to_dict()
    res.ledger = energy_ledger(h, m, trunc, samples)
    res.weak39 = [weak_residual_regularized(h, v, m, samples, trunc) for v in battery]
    res.weak13 = [weak_residual_limit(h, v, samples) for v in battery]
    res.ibp = [dirac_ibp_identity(h, v, m, samples) for v in battery]
    res.initial_datum = initial_datum_check(h, samples)
    res.sup_h2 = float(np.max(h2_norm(h.u, grid.dx)))
    res.sup_l2 = float(np.max(l2_norm(h.u, grid.dx)))
    res.sup_graph = float(np.max(history_norms(h)))
    return res


def _run_member_job(args):
    return run_member(*args)


def pair_diagnostics(a: MemberResult, b: MemberResult, finest: MemberResult, window: SobolevNormSpec) -> dict:
    """Differences between consecutive members ``a`` (coarser) and ``b`` (finer)."""
    h_a, h_b = a.history, b.history
    grid = h_a.grid
    dx, dt = grid.dx, h_a.time_axis.dt
    diff = h_a.u - h_b.u
    out = {"eps_a": a.epsilon, "eps_b": b.epsilon}
    for alpha in ALPHAS:
        spec = window.with_order(2.0 - alpha)
        out[f"h2alpha_diff_{alpha}"] = float(np.max(sobolev_norm(diff, spec, grid)))
    K = (grid.x >= window.a) & (grid.x <= window.b)
    out["linf_ux_diff"] = float(np.max(np.abs(d1(diff, dx)[:, K])))

    # u_x * theta of the coarser member against u_x of the finest member
    m_a = make_mollifier(a.epsilon, dx)
    w1 = smooth(h_a.u, m_a, 1)[:, K]
    ux = d1(finest.history.u, dx)[:, K]
    l2 = lambda arr: float(np.sqrt(trapezoid(trapezoid(arr**2, dx), dt)))  # noqa: E731
    conv = l2(w1 - ux)
    cubes = l2(w1**3 - ux**3)
    bound = max(float(np.max(np.abs(w1))), float(np.max(np.abs(ux))))
    out["l2_conv_diff"] = conv
    out["l2_cube_diff"] = cubes
    out["cube_bound"] = 3.0 * bound**2 * conv
    out["cube_bound_holds"] = bool(cubes <= out["cube_bound"] * (1 + 1e-12) + 1e-300)
    out["weak39_residual"] = float(max(b.weak39)) if b.weak39 else 0.0
    out["weak13_residual"] = float(max(b.weak13)) if b.weak13 else 0.0
    return out


def epsilon_sweep(scn: Scenario, ladder, grid: Grid, axis: TimeAxis, reg: RegularizationParams,
                  window: SobolevNormSpec, workers: int = 1, solver_options: dict | None = None,
                  battery_center: float | None = None) -> SweepReport:
    """Run every ladder member (in a process pool when ``workers > 1``) and compare them.

    Results are merged in ladder order, so the report does not depend on the
    worker count.
    """
    ladder = tuple(float(e) for e in ladder)
    if len(ladder) == 0:
        raise ValueError("empty epsilon ladder")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError(f"epsilon ladder must be strictly decreasing, got {ladder}")
    jobs = [(scn, dataclasses.replace(reg, epsilon=e), grid, axis, solver_options, battery_center) for e in ladder]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            members = list(pool.map(_run_member_job, jobs))
    else:
        members = [_run_member_job(j) for j in jobs]

    ok = [m for m in members if m.ok]
    pairs = []
    if ok:
        finest = ok[-1]
        for a, b in zip(members, members[1:]):
            if a.ok and b.ok:
                pairs.append(pair_diagnostics(a, b, finest, window))
            else:
                pairs.append({"eps_a": a.epsilon, "eps_b": b.epsilon, "failure": "member run failed"})
    uniform = uniform_bound_check([m.ledger for m in ok]) if len(ok) >= 3 else None
    return SweepReport(ladder, members, pairs, uniform, window)
