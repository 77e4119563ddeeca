"""Norms, traces, energy bookkeeping, weak-form residuals and epsilon sweeps."""
from .energy import EnergyLedger, energy_ledger, uniform_bound_check
from .norms import SobolevNormSpec, WindowError, sobolev_norm, trace, windowed_l2
from .sweep import MemberResult, SweepReport, epsilon_sweep, initial_datum_check
from .weakforms import (SupportError, TestFunction, default_battery, dirac_ibp_identity, trace_identity_gap,
                        weak_residual_limit, weak_residual_regularized)

__all__ = [
    "EnergyLedger", "energy_ledger", "uniform_bound_check",
    "SobolevNormSpec", "WindowError", "sobolev_norm", "trace", "windowed_l2",
    "MemberResult", "SweepReport", "epsilon_sweep", "initial_datum_check",
    "SupportError", "TestFunction", "default_battery", "dirac_ibp_identity", "trace_identity_gap",
    "weak_residual_limit", "weak_residual_regularized",
]
