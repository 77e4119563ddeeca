import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_convolution, small_axis, small_grid, small_scenario
from gaobeam.discretization import Grid, TimeAxis
from gaobeam.discretization import l2_norm
from gaobeam.fixed_point import (
    PicardNonConvergence, WeightedNormParams, apply_C, lambda_auto, lambda_from_amplification, make_setup,
    nonlinear_term, picard_solve, resolve_R, space_time_l2, weighted_norm,
)
from gaobeam.kernels import make_mollifier, make_truncation
from gaobeam.linear_solver import StateHistory
from gaobeam.model import RegularizationParams, Scenario, coefficient_fields, forcing_h_samples, sample_scenario


class TestNorms:
    def test_weighted_norm_on_series(self):
        times = np.array([0.0, 0.5, 1.0])
        series = np.array([1.0, 2.0, 3.0])
        assert weighted_norm(series, WeightedNormParams(0.0), 1.0, times) == 3.0
        got = weighted_norm(series, WeightedNormParams(2.0), 1.0, times)
        assert got == pytest.approx(max(1.0, 2 * np.exp(-1.0), 3 * np.exp(-2.0)))
        assert weighted_norm(series, WeightedNormParams(0.0), 0.5, times) == 2.0

    def test_weighted_norm_rejects_bad_input(self):
        with pytest.raises(ValueError):
            WeightedNormParams(-1.0)
        with pytest.raises(ValueError):
            WeightedNormParams(1.0, "h1")
        with pytest.raises(ValueError):
            weighted_norm(np.ones(3), WeightedNormParams(), 2.0, [0.0, 0.5, 1.0])

    @given(st.floats(0, 5), st.floats(0, 5))
    @settings(max_examples=40, deadline=None)
    def test_weight_monotone_in_lambda(self, a, b):
        times = np.linspace(0, 1, 11)
        series = np.linspace(1, 3, 11)
        lo, hi = sorted((a, b))
        assert weighted_norm(series, WeightedNormParams(hi), 1.0, times) <= \
            weighted_norm(series, WeightedNormParams(lo), 1.0, times)


class TestParameters:
    def test_lambda_from_amplification(self):
        assert lambda_from_amplification(2.0) == 16.0
        assert lambda_from_amplification(0.1) == 1.0
        assert lambda_from_amplification(0.0) == 1.0

    def test_resolve_R(self):
        assert resolve_R(RegularizationParams(0.1, C_cap=3.0), 0.1) == pytest.approx(30.0)
        assert resolve_R(RegularizationParams(0.1, R_mode="explicit", R=5.0), 0.1) == 5.0
        assert resolve_R(RegularizationParams(0.2), 0.2, bound_C=2.0) == pytest.approx(10.0)


class TestNonlinearMap:
    grid = small_grid(241)
    axis = small_axis(6)
    m = make_mollifier(0.25, grid.dx)

    def test_apply_C_of_zero(self):
        scn = small_scenario()
        S = sample_scenario(scn, self.grid, self.axis)
        zero = StateHistory.zeros(self.grid, self.axis)
        F, _ = coefficient_fields(S, self.m)
        got = apply_C(zero, self.m, make_truncation(10.0), S)
        np.testing.assert_array_equal(got, -forcing_h_samples(S, self.m) * F)

    def test_matches_brute_force_composition(self, rng):
        scn = small_scenario(p="0.3*bump(x/3) + 0.1")
        grid = Grid(-6, 6, 121)
        axis = TimeAxis(0.25, 3)
        m = make_mollifier(0.5, grid.dx)
        trunc = make_truncation(0.4)
        S = sample_scenario(scn, grid, axis)
        u = np.exp(-grid.x**2)[None, :] * rng.uniform(0.5, 2, (axis.nt + 1, 1)) + 0.05 * rng.normal(size=(4, 121))
        got = nonlinear_term(u, m, trunc, S)
        for n in range(axis.nt + 1):
            w1 = brute_force_convolution(u[n], m.weights[1])
            w2 = brute_force_convolution(u[n], m.weights[2])
            oracle = brute_force_convolution((trunc.phi(w1) - S.nu * S.p[n]) * w2, m.weights[0])
            np.testing.assert_allclose(got[n], oracle, rtol=0, atol=1e-12 * np.abs(oracle).max())

    def test_quadratic_zone(self):
        S = sample_scenario(small_scenario(), self.grid, self.axis)
        u = 0.01 * np.sin(self.grid.x)[None, :] * np.ones((self.axis.nt + 1, 1))
        from gaobeam.kernels import smooth
        w1, w2 = smooth(u, self.m, 1), smooth(u, self.m, 2)
        direct = smooth((w1**2 - S.nu * S.p) * w2, self.m, 0)
        np.testing.assert_allclose(nonlinear_term(u, self.m, make_truncation(1.0), S), direct, rtol=1e-13, atol=1e-18)

    @given(st.integers(0, 2**31), st.floats(0.1, 5))
    @settings(max_examples=20, deadline=None)
    def test_truncation_bounds_growth(self, seed, scale):
        # with R fixed, the map grows at most linearly in the size of its input
        rng = np.random.default_rng(seed)
        S = sample_scenario(small_scenario(), self.grid, self.axis)
        trunc = make_truncation(0.5)
        base = rng.normal(size=self.grid.nx)
        u = np.tile(scale * 1e3 * base, (self.axis.nt + 1, 1))
        N = nonlinear_term(u, self.m, trunc, S)
        w2 = np.abs(u[0]).sum() * np.abs(self.m.weights[2]).sum()
        bound = ((0.5 + 1) ** 2 + S.nu * np.abs(S.p).max()) * w2 * np.abs(self.m.weights[0]).sum()
        assert np.abs(N).max() <= bound

    # fitted once on 200 random pairs (max ratio 38.5) and frozen with margin
    LIPSCHITZ_K = 100.0

    @given(st.integers(0, 2**31), st.floats(0.01, 5), st.booleans())
    @settings(max_examples=40, deadline=None)
    def test_lipschitz_constant(self, seed, scale, nearby):
        rng = np.random.default_rng(seed)
        S = sample_scenario(small_scenario(), self.grid, self.axis)
        trunc = make_truncation(2.0)
        shape = (self.axis.nt + 1, self.grid.nx)
        a = StateHistory(self.grid, self.axis, scale * rng.normal(size=shape), scale * rng.normal(size=shape))
        if nearby:
            b = StateHistory(self.grid, self.axis, a.u + 1e-3 * rng.normal(size=shape), a.u_t)
        else:
            b = StateHistory(self.grid, self.axis, scale * rng.normal(size=shape), scale * rng.normal(size=shape))
        dx, dt = self.grid.dx, self.axis.dt
        lhs = space_time_l2(apply_C(a, self.m, trunc, S) - apply_C(b, self.m, trunc, S), dx, dt)
        du = space_time_l2(a.u - b.u, dx, dt)
        rhs = du + space_time_l2(a.u_t - b.u_t, dx, dt) + l2_norm(b.u, dx).max() * du
        assert lhs <= self.LIPSCHITZ_K * rhs


def _wide():
    return small_grid(1201, 12)


class TestPicard:
    def test_zero_scenario_converges_immediately(self):
        scn = Scenario.from_strings()
        _, report = picard_solve(scn, RegularizationParams(0.2), small_grid(), small_axis(20))
        assert report.converged and report.iterates_used <= 2
        assert report.diffs[0] == 0.0

    def test_reproducible_bit_for_bit(self):
        scn = small_scenario()
        reg = RegularizationParams(0.2, picard_tol=1e-8)
        a, ra = picard_solve(scn, reg, _wide(), small_axis(40))
        b, rb = picard_solve(scn, reg, _wide(), small_axis(40))
        assert a.u.tobytes() == b.u.tobytes() and ra.to_dict() == rb.to_dict()

    def test_report_contents(self):
        _, r = picard_solve(small_scenario(), RegularizationParams(0.2, picard_tol=1e-8), _wide(), small_axis(40))
        d = r.to_dict()
        assert r.converged and r.lambda_used >= 1.0 and r.truncation_inactive
        assert all(x < 1 for x in r.ratios)
        assert d["fixed_point_residual"] <= 1e-6
        assert d["R"] == pytest.approx(15.0)
        assert r.inside_ball and r.ball_radius_2MR > 0

    def test_lambda_ignores_probe_scale(self):
        setup = make_setup(small_scenario(), 0.2, 15.0, _wide(), small_axis(20))
        g = np.sin(np.linspace(0, 3, 21))[:, None] * setup.F * setup.samples.p
        probe = lambda f: setup.solve(f, zero_data=True)  # noqa: E731
        dx, dt = setup.samples.grid.dx, setup.samples.axis.dt
        one = lambda_auto(setup.composed_difference, probe, g, -g, 1.0, dx, dt)
        two = lambda_auto(setup.composed_difference, probe, 2 * g, -2 * g, 1.0, dx, dt)
        assert one == pytest.approx(two, rel=1e-12)

    def test_non_convergence_reports_progress(self):
        reg = RegularizationParams(0.2, picard_max_iter=1, picard_tol=1e-14)
        with pytest.raises(PicardNonConvergence) as info:
            picard_solve(small_scenario(P="-30*exp(-(8*t - 2)^2)"), reg, _wide(), small_axis(40))
        assert info.value.report.iterates_used == 1

    def test_explicit_lambda_is_used(self):
        reg = RegularizationParams(0.2, lambda_mode="explicit", lam=3.0, picard_tol=1e-8)
        _, r = picard_solve(small_scenario(), reg, _wide(), small_axis(40))
        assert r.lambda_used == 3.0

    def test_setup_needs_scenario(self):
        grid, axis = small_grid(), small_axis(10)
        S = sample_scenario(small_scenario(), grid, axis)
        with pytest.raises(TypeError):
            make_setup(S, 0.2, 10.0, grid, axis)
