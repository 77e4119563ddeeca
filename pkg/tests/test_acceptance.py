"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

The shipped demo ladder and an epsilon = 0.1 refinement pair are computed
once per session; together with the verification studies the suite takes a
few minutes.
"""
import dataclasses
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest
from scipy import integrate

from conftest import SMALL_CONFIG, brute_force_convolution
from gaobeam import cli
from gaobeam.config import load_config, loads_config
from gaobeam.discretization import Grid, TimeAxis
from gaobeam.fixed_point import picard_solve
from gaobeam.kernels import make_mollifier, make_truncation, smooth
from gaobeam.analysis.sweep import run_member
from gaobeam.model import RegularizationParams, Scenario
from gaobeam.verification import (
    estimate_ratio_refinement, manufactured_convergence, plane_wave_phase_error, trace_identity_study,
)

pytestmark = pytest.mark.slow

REFINE_EPSILON = 0.1


def _report(capsys, number: int, ok: bool, detail: str):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def _ratio(coarse: float, fine: float) -> float:
    if fine == 0.0:
        return np.inf if coarse > 0 else np.nan
    return coarse / fine


def _refines(coarse: float, fine: float, factor: float = 3.0) -> bool:
    # an exactly vanishing pair (support away from the load) counts as refined
    if coarse == 0.0 and fine == 0.0:
        return True
    return _ratio(coarse, fine) >= factor


@pytest.fixture(scope="module")
def demo(tmp_path_factory):
    cfg = load_config("moving_mass_demo")
    out = tmp_path_factory.mktemp("demo")
    cfg = dataclasses.replace(cfg, outputs=dataclasses.replace(cfg.outputs, dir=str(out)))
    cli.check_config(cfg)
    status, payload = cli.execute(cfg, workers=3)
    return cfg, status, payload


@pytest.fixture(scope="module")
def refinement_pair(demo):
    # the demo scenario at epsilon = 0.1 on (dx, dt) and (dx/2, dt/2)
    cfg = demo[0]
    reg = dataclasses.replace(cfg.regularization, epsilon=REFINE_EPSILON)
    coarse = (Grid(cfg.grid.x_min, cfg.grid.x_max, 2801), TimeAxis(cfg.axis.T, 500))
    fine = (coarse[0].refined(2), coarse[1].refined(2))
    jobs = [(cfg.scenario, reg, g, a, cfg.solver_options(), cfg.analysis.battery_center) for g, a in (coarse, fine)]
    with ProcessPoolExecutor(max_workers=2) as pool:
        members = list(pool.map(_member, jobs))
    for m in members:
        assert m.ok, m.failure
    return members


def _member(job):
    return run_member(*job)


def test_criterion_1_kernel_suite(capsys, rng):
    problems = []
    for eps in (0.2, 0.1, 0.05):
        m = make_mollifier(eps, 0.01)
        mass, _ = integrate.quad(lambda x: float(m(x)), -eps, eps, epsabs=1e-13, epsrel=1e-13, limit=200)
        if abs(mass - 1.0) > 1e-8 or abs(m.weights[0].sum() - 1.0) > 1e-8:
            problems.append(f"mass eps={eps}: {mass!r}, discrete {m.weights[0].sum()!r}")
    for R in (0.5, 3.0, 30.0):
        t = make_truncation(R)
        inner = np.linspace(-R, R, 10001)
        outer = np.concatenate([np.linspace(R + 2, R + 50, 1001), -np.linspace(R + 2, R + 50, 1001)])
        if not (np.array_equal(t.phi(inner), inner**2) and np.all(t.phi(outer) == (R + 1) ** 2)):
            problems.append(f"plateau R={R}")
        dense = np.linspace(-(R + 10), R + 10, 200001)
        if t.mu(dense).min() < -1e-10:
            problems.append(f"mu R={R}: {t.mu(dense).min()!r}")
    grid = Grid(-1.0, 1.0, 81)
    m = make_mollifier(0.15, grid.dx)
    values = np.exp(-8 * grid.x**2) + 0.1 * rng.standard_normal(81)
    worst = 0.0
    for order in (0, 1, 2):
        oracle = brute_force_convolution(values, m.weights[order])
        worst = max(worst, np.abs(smooth(values, m, order) - oracle).max() / np.abs(oracle).max())
    if worst > 1e-12:
        problems.append(f"convolution oracle {worst:.2e}")
    _report(capsys, 1, not problems, "; ".join(problems) or f"mass, plateaus, mu >= 0, oracle rel err {worst:.1e}")


def test_criterion_2_linear_solver(capsys, demo):
    cfg = demo[0]
    dx_orders = manufactured_convergence("dx").orders
    dt_orders = manufactured_convergence("dt").orders
    phases = [plane_wave_phase_error(k) for k in (1, 2, 3, 4)]
    ratios = estimate_ratio_refinement(cfg.scenario, 0.2, Grid(cfg.grid.x_min, cfg.grid.x_max, 701),
                                       TimeAxis(cfg.axis.T, 125), factors=(1, 2, 4),
                                       solver_options=cfg.solver_options())
    spread = (max(ratios) - min(ratios)) / min(ratios)
    ok = min(dx_orders) >= 1.9 and min(dt_orders) >= 1.9 and max(phases) < 0.01 and spread < 0.1
    detail = (f"dx orders {np.round(dx_orders, 3).tolist()}, dt orders {np.round(dt_orders, 3).tolist()}, "
              f"max phase error {max(phases):.1e}, estimate-ratio spread {spread:.1e}")
    _report(capsys, 2, ok, detail)


def test_criterion_3_fixed_point(capsys, demo):
    grid, axis = Grid(-6, 6, 601), TimeAxis(0.25, 50)
    h, rep = picard_solve(Scenario.from_strings(), RegularizationParams(0.1), grid, axis)
    zero_ok = rep.converged and rep.iterates_used <= 2 and not h.u.any() and not h.u_t.any()
    cfg, _, payload = demo
    tol = cfg.regularization.picard_tol
    lines, ok = [], zero_ok
    for m in payload["sweep"]["members"]:
        p = m["picard"]
        member_ok = (m["status"] == "ok" and max(p["ratios"], default=0.0) < 1.0
                     and p["fixed_point_residual"] <= 10 * tol and p["max_abs_u_conv_dtheta"] <= p["R"]
                     and p["R"] == pytest.approx(cfg.regularization.C_cap / m["epsilon"]))
        ok = ok and member_ok
        lines.append(f"eps={m['epsilon']}: ratio {max(p['ratios'], default=0.0):.3f}, "
                     f"residual {p['fixed_point_residual']:.1e}, max|u*theta'| {p['max_abs_u_conv_dtheta']:.3f} "
                     f"<= R={p['R']:g}, lambda {p['lambda']:g}")
    _report(capsys, 3, ok, f"zero scenario in {rep.iterates_used} iterate(s); " + "; ".join(lines))


def test_criterion_4_energy(capsys, demo, refinement_pair):
    coarse, fine = refinement_pair
    tau = [float(np.max(np.abs(m.ledger.tau_residual))) for m in (coarse, fine)]
    tau_ok = _ratio(*tau) >= 3.0
    members = demo[2]["sweep"]["members"]
    signs_ok = all(m["energy_final"]["min_nonlinear_mu"] >= 0 and m["energy_final"]["min_concentrated"] >= 0
                   for m in members)
    for m in refinement_pair:
        signs_ok = signs_ok and m.ledger.nonlinear_mu.min() >= 0 and m.ledger.concentrated.min() >= 0
    uniform = demo[2]["sweep"]["uniform_bound_ratio"]
    ok = tau_ok and signs_ok and uniform is not None and uniform <= 1.5
    _report(capsys, 4, ok, f"tau residual {tau[0]:.2e} -> {tau[1]:.2e} (x{_ratio(*tau):.2f}), "
                           f"energies nonnegative: {signs_ok}, uniform bound ratio {uniform:.4f}")


def test_criterion_5_weak_forms(capsys, demo, refinement_pair):
    coarse, fine = refinement_pair
    w39 = [_refines(a, b) for a, b in zip(coarse.weak39, fine.weak39)]
    ibp = [_refines(a, b) for a, b in zip(coarse.ibp, fine.ibp)]
    members = demo[2]["sweep"]["members"]
    ladder13 = np.array([m["weak13_residuals"] for m in members])
    w13 = [bool(np.all(np.diff(col) <= 0)) for col in ladder13.T]
    ok = len(w39) == 12 and all(w39) and all(ibp) and len(w13) == 12 and all(w13)
    r39 = min(_ratio(a, b) for a, b in zip(coarse.weak39, fine.weak39) if b > 0)
    ribp = min((_ratio(a, b) for a, b in zip(coarse.ibp, fine.ibp) if b > 0), default=np.inf)
    detail = (f"regularized-form residual min ratio {r39:.2f} ({sum(w39)}/12), "
              f"limit-form nonincreasing along ladder {sum(w13)}/12, IBP min ratio {ribp:.2f} ({sum(ibp)}/12)")
    _report(capsys, 5, ok, detail)


def test_criterion_6_convergence_diagnostics(capsys, demo):
    sweep = demo[2]["sweep"]
    pairs = sweep["pairs"]
    keys = ("h2alpha_diff_0.5", "h2alpha_diff_1.0", "linf_ux_diff")
    series = {k: [p[k] for p in pairs] for k in keys}
    cauchy_ok = len(pairs) == 2 and all(np.all(np.diff(v) < 0) for v in series.values())
    initial = [m["initial_datum_l2"] for m in sweep["members"]]
    initial_ok = bool(np.all(np.diff(initial) < 0))
    gaps = trace_identity_study()
    trace_ok = bool(np.all(np.diff(gaps) < 0))
    ok = cauchy_ok and initial_ok and trace_ok
    fmt = lambda v: " > ".join(f"{x:.3e}" for x in v)  # noqa: E731
    detail = "; ".join(f"{k} {fmt(v)}" for k, v in series.items())
    detail += f"; initial datum {fmt(initial)}; trace gaps {fmt(gaps)}"
    _report(capsys, 6, ok, detail)


def test_criterion_7_reproducibility(capsys, tmp_path):
    cfg = loads_config(SMALL_CONFIG, "small")
    outputs = {}
    for label, workers in (("serial_a", 1), ("serial_b", 1), ("parallel", 3)):
        d = tmp_path / label
        run = dataclasses.replace(cfg, outputs=dataclasses.replace(cfg.outputs, dir=str(d)))
        status, _ = cli.execute(run, workers=workers)
        assert status == cli.EXIT_OK
        outputs[label] = [(d / f"small.{kind}.csv").read_bytes() for kind in ("energy", "sweep")]
    same = outputs["serial_a"] == outputs["serial_b"] == outputs["parallel"]
    size = sum(len(b) for b in outputs["serial_a"])
    _report(capsys, 7, same, f"energy and sweep CSVs byte-identical over 2 serial runs and 3 workers ({size} bytes)")
