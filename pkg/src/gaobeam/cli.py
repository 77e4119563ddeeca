"""Command line entry point: ``gaobeam run|validate|sweep <config>``.

Exit status: 0 on success, 2 when any ladder member failed (partial reports
are still written), 1 on configuration errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from .analysis.norms import SobolevNormSpec
from .analysis.sweep import epsilon_sweep
from .config import ConfigError, RunConfig, load_config
from .kernels import UnderResolvedKernelError, make_mollifier
from .linear_solver import save_checkpoint
from .model import ScenarioError, validate_scenario
from .reports import energy_csv, report_json, sweep_csv, write_text

log = logging.getLogger("gaobeam")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MEMBER_FAILED = 2
WORKERS_ENV = "GAOBEAM_WORKERS"


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {n}")
    return n


def check_config(cfg: RunConfig) -> None:
    """Checks that need the sampled scenario: support margins, load path, kernel resolution."""
    try:
        validate_scenario(cfg.scenario, cfg.grid, cfg.axis, cfg.margin)
        for eps in cfg.ladder:
            make_mollifier(eps, cfg.grid.dx)
    except (ScenarioError, UnderResolvedKernelError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.margin < 4.0 * max(cfg.ladder):
        raise ConfigError(f"support margin {cfg.margin:g} must be at least 4 times the largest epsilon")


def _verification(cfg: RunConfig) -> dict:
    from . import verification

    out = {}
    if cfg.verification.manufactured:
        out["manufactured_dx"] = verification.manufactured_convergence("dx").to_dict()
        out["manufactured_dt"] = verification.manufactured_convergence("dt").to_dict()
        out["trace_identity_gaps"] = list(verification.trace_identity_study())
    if cfg.verification.periodic_mode:
        out["plane_wave_phase_error"] = {str(k): verification.plane_wave_phase_error(k) for k in (1, 2, 3, 4)}
    return out


def execute(cfg: RunConfig, workers: int = 1) -> tuple:
    """Run the ladder and write all reports; returns ``(exit_status, payload)``."""
    a, b = cfg.window
    window = SobolevNormSpec(2.0, a, b, cfg.analysis.taper)
    report = epsilon_sweep(cfg.scenario, cfg.ladder, cfg.grid, cfg.axis, cfg.regularization, window,
                           workers=workers, solver_options=cfg.solver_options(),
                           battery_center=cfg.analysis.battery_center)
    status = EXIT_MEMBER_FAILED if report.failed else EXIT_OK
    payload = {
        "status": "ok" if status == EXIT_OK else "member_failure",
        "exit_code": status,
        "config": {
            "source": cfg.source,
            "grid": {"x_min": cfg.grid.x_min, "x_max": cfg.grid.x_max, "nx": cfg.grid.nx},
            "time": {"T": cfg.axis.T, "nt": cfg.axis.nt},
            "scenario": {**cfg.scenario.sources(), "nu": cfg.scenario.nu,
                         "mass_term_enabled": cfg.scenario.mass_term_enabled},
            "ladder": list(cfg.ladder),
        },
        "sweep": report.to_dict(),
    }
    extra = _verification(cfg)
    if extra:
        payload["verification"] = extra

    out = cfg.outputs
    ok = [m for m in report.members if m.ok]
    if ok:
        write_text(out.path("energy.csv"), energy_csv(ok[-1].ledger))
        payload["energy_csv_epsilon"] = ok[-1].epsilon
    write_text(out.path("sweep.csv"), sweep_csv(report.pairs))
    if out.checkpoint:
        for k, m in enumerate(ok):
            save_checkpoint(m.history, out.path(f"member{k}.gbsh"))
    write_text(out.path("report.json"), report_json(payload))
    for m in report.members:
        if not m.ok:
            log.error("epsilon=%g failed: %s", m.epsilon, m.failure)
    return status, payload


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    check_config(cfg)
    print(f"{args.config}: ok (nx={cfg.grid.nx}, nt={cfg.axis.nt}, ladder={list(cfg.ladder)})")
    return EXIT_OK


def _run_config(cfg: RunConfig, args) -> int:
    if args.out_dir is not None:
        cfg = dataclasses.replace(cfg, outputs=dataclasses.replace(cfg.outputs, dir=args.out_dir))
    check_config(cfg)
    status, _ = execute(cfg, worker_count())
    print(f"reports written to {cfg.outputs.path('report.json').parent} (exit {status})")
    return status


def _cmd_run(args) -> int:
    return _run_config(load_config(args.config), args)


def _cmd_sweep(args) -> int:
    try:
        eps = [float(e) for e in args.epsilons.split(",") if e.strip()]
    except ValueError:
        raise ConfigError(f"--epsilons must be a comma list of numbers, got {args.epsilons!r}") from None
    return _run_config(load_config(args.config).with_ladder(eps), args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaobeam", description="Moving-mass nonlinear beam solver and diagnostics.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured epsilon ladder and write reports")
    p.add_argument("config")
    p.add_argument("--out-dir", help="override outputs.dir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sweep", help="run with an explicit epsilon ladder")
    p.add_argument("config")
    p.add_argument("--epsilons", required=True, help="comma separated, strictly decreasing")
    p.add_argument("--out-dir", help="override outputs.dir")
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
