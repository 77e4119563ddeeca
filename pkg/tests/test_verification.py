import numpy as np
import pytest

from conftest import small_scenario
from gaobeam.discretization import Grid, TimeAxis
from gaobeam.model import validate_scenario
from gaobeam.verification import (
    ConvergenceStudy, estimate_ratio_refinement, manufactured_error, plane_wave_phase_error,
    smooth_trace_scenario, trace_identity_study,
)


def test_convergence_study_orders():
    study = ConvergenceStudy((0.1, 0.05, 0.025), (4.0, 1.0, 0.25))
    assert study.orders == (2.0, 2.0)
    assert study.to_dict()["orders"] == [2.0, 2.0]


def test_manufactured_error_small():
    assert manufactured_error(601, 500) < 1e-4


def test_plane_wave_phase_low_mode():
    assert plane_wave_phase_error(1, nx=129, steps_per_period=200) < 1e-3


def test_phase_error_grows_with_wavenumber():
    errs = [plane_wave_phase_error(k, nx=129, steps_per_period=200) for k in (1, 3)]
    assert errs[0] < errs[1]


def test_estimate_ratio_stable_under_refinement():
    r = estimate_ratio_refinement(small_scenario(), 0.3, Grid(-12, 12, 601), TimeAxis(0.25, 20), factors=(1, 2))
    assert all(v > 0 for v in r)
    assert abs(r[1] - r[0]) <= 0.1 * r[0]


def test_smooth_trace_scenario_is_valid():
    validate_scenario(smooth_trace_scenario(), Grid(-4, 4, 801), TimeAxis(0.5, 50), margin=0.5)


def test_trace_gap_shrinks():
    gaps = trace_identity_study(levels=((0.4, 0.02, 50), (0.2, 0.01, 100)))
    assert gaps[1] < gaps[0]
    assert np.all(np.isfinite(gaps))
