"""Energy bookkeeping with the transport multiplier ``u_t + zeta' u_x``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..discretization import cumulative_time_integral, d1, d2, trapezoid
from ..fixed_point import nonlinear_term
from ..kernels import Mollifier, Truncation, smooth
from ..linear_solver import StateHistory, fourth_difference, history_norms
from ..model import load_density, sample_scenario

COMPONENTS = ("inertia", "concentrated_mass", "bending", "nonlinear", "loads")


@dataclass(frozen=True, eq=False)
class EnergyLedger:
    """Per-step energies and the cumulative multiplier identity.

    ``components[k]`` is the cumulative ``int_0^t int (term_k)(u_t + zeta' u_x)``
    for the five terms of the equation (in :data:`COMPONENTS` order); their sum
    is ``tau_residual``, which vanishes for an exact solution.
    """

    times: np.ndarray
    kinetic: np.ndarray
    bending: np.ndarray
    nonlinear_mu: np.ndarray
    concentrated: np.ndarray
    tau_residual: np.ndarray
    components: np.ndarray
    graph_norm: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.times)

    def rows(self):
        for n in range(self.steps):
            yield (n, self.times[n], self.kinetic[n], self.bending[n], self.nonlinear_mu[n],
                   self.concentrated[n], self.tau_residual[n])


def time_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Second-order differences along the time axis (one-sided at the ends)."""
    return np.gradient(values, dt, axis=0, edge_order=2)


def energy_ledger(h: StateHistory, m: Mollifier, trunc: Truncation, scn) -> EnergyLedger:
    samples = scn if hasattr(scn, "axis") else sample_scenario(scn, h.grid, h.time_axis)
    dx, dt = h.grid.dx, h.time_axis.dt
    u, ut = h.u, h.u_t
    mass = 1.0 if samples.mass_term_enabled else 0.0
    theta = load_density(samples, m)
    dtheta = m(h.grid.x[None, :] - samples.zeta[:, None], 1)
    zdot = samples.zeta_dot[:, None]

    kinetic = 0.5 * trapezoid(ut**2, dx)
    bending = 0.5 * trapezoid(d2(u, dx) ** 2, dx)
    nonlinear_mu = trapezoid(trunc.mu(smooth(u, m, 1)), dx)
    concentrated = 0.5 * mass * trapezoid(theta * ut**2, dx)

    utt = time_derivative(ut, dt)
    tau_u = ut + zdot * d1(u, dx)
    terms = (
        utt,
        mass * (theta * utt - zdot * dtheta * ut),
        fourth_difference(u, dx),
        -nonlinear_term(u, m, trunc, samples),
        -(samples.f + samples.P[:, None] * theta),
    )
    components = np.stack([cumulative_time_integral(trapezoid(t * tau_u, dx), dt) for t in terms])
    return EnergyLedger(
        h.time_axis.times.copy(), kinetic, bending, nonlinear_mu, concentrated,
        components.sum(axis=0), components, history_norms(h),
    )


def uniform_bound_check(ledgers) -> float:
    """``max / median`` over the ladder of ``sup_t (|u|_{H^2} + |u_t|)``."""
    sups = np.array([np.max(led.graph_norm) for led in ledgers])
    if len(sups) < 3:
        raise ValueError(f"need at least three ladder members, got {len(sups)}")
    med = float(np.median(sups))
    if med == 0.0:
        return 1.0 if np.all(sups == 0.0) else float("inf")
    return float(np.max(sups) / med)
