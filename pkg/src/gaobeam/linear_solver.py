"""Implicit time stepping for ``u_tt + F u_xxxx + G u_t = g``.

The equation is stepped in the multiplied form ``M a + C v + K u = r`` with
``M = 1/F``, ``C = G/F``, ``r = g/F`` and ``K`` the 5-point fourth-difference
stencil, using the Newmark average-acceleration scheme (beta = 1/4,
gamma = 1/2).  The damping-like term is implicit in the velocity update.

Boundary handling is either clamped (``u = u_xx = 0`` at both end points,
with a quiescence monitor since the modelled beam is infinite) or periodic,
the latter kept for verification against plane waves.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import lapack
from scipy.sparse.linalg import splu

from .discretization import Field, Grid, TimeAxis, cumulative_time_integral, d1, d2, h2_norm, l2_norm, trapezoid

BETA = 0.25
GAMMA = 0.5
FLOOR = 1e-14


class SolverInstabilityError(RuntimeError):
    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite value produced at time step {step}")


class BoundaryQuiescenceError(RuntimeError):
    def __init__(self, step: int, ratio: float, tol: float):
        self.step = step
        self.ratio = ratio
        self.tol = tol
        super().__init__(
            f"boundary zone reached {ratio:.3e} of the interior maximum at step {step} "
            f"(tolerance {tol:.1e}); enlarge the spatial domain"
        )


@dataclass(frozen=True, eq=False)
class StateHistory:
    """``u`` and ``u_t`` at every time level, stored as ``(nt + 1, nx)`` arrays."""

    grid: Grid
    time_axis: TimeAxis
    u: np.ndarray
    u_t: np.ndarray

    def __post_init__(self):
        shape = (self.time_axis.nt + 1, self.grid.nx)
        for name in ("u", "u_t"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)

    def field(self, n: int, which: str = "u") -> Field:
        return Field(self.grid, getattr(self, which)[n])

    @classmethod
    def zeros(cls, grid: Grid, axis: TimeAxis) -> "StateHistory":
        shape = (axis.nt + 1, grid.nx)
        return cls(grid, axis, np.zeros(shape), np.zeros(shape))


# ---------------------------------------------------------------------------
# the fourth-difference operator
# ---------------------------------------------------------------------------

def stiffness_band(n: int, dx: float) -> np.ndarray:
    """Clamped D4 on ``n`` interior unknowns in ``solve_banded`` (2, 2) layout."""
    band = np.empty((5, n))
    band[0] = 1.0
    band[1] = -4.0
    band[2] = 6.0
    band[3] = -4.0
    band[4] = 1.0
    # ghost value u_{-1} = -u_1 from u = u_xx = 0 at the end point
    band[2, 0] = 5.0
    band[2, -1] = 5.0
    return band / dx**4


def fourth_difference(u: np.ndarray, dx: float, periodic: bool = False) -> np.ndarray:
    """The solver's D4 applied along the last axis.

    Clamped mode returns zeros at the two end points; periodic mode treats the
    last point as a copy of the first.
    """
    u = np.asarray(u, dtype=float)
    if periodic:
        core = u[..., :-1]
        out = (np.roll(core, 2, -1) - 4 * np.roll(core, 1, -1) + 6 * core
               - 4 * np.roll(core, -1, -1) + np.roll(core, -2, -1)) / dx**4
        return np.concatenate([out, out[..., :1]], axis=-1)
    pad = np.concatenate([-u[..., 1:2], u, -u[..., -2:-1]], axis=-1)
    out = np.zeros_like(u)
    out[..., 1:-1] = (pad[..., :-4] - 4 * pad[..., 1:-3] + 6 * pad[..., 2:-2]
                      - 4 * pad[..., 3:-1] + pad[..., 4:]) / dx**4
    return out


class LinearStepOperator:
    """Newmark step matrices ``diag(M + dt/2 C) + dt^2/4 K`` with factor caching.

    ``reassembly="every_step"`` refactors whenever the diagonal changes;
    ``"cadence"`` keeps a factorization until the load has moved more than
    ``dx/2`` and corrects the defect against the exact matrix in between.
    """

    def __init__(self, grid: Grid, dt: float, periodic: bool = False, reassembly: str = "every_step"):
        if reassembly not in ("every_step", "cadence"):
            raise ValueError(f"unknown reassembly mode {reassembly!r}")
        self.grid = grid
        self.dt = dt
        self.beta = BETA
        self.gamma = GAMMA
        self.periodic = periodic
        self.reassembly = reassembly
        dx = grid.dx
        if periodic:
            self.n = grid.nx - 1
            self.sl = slice(0, grid.nx - 1)
            n = self.n
            self.K = sparse.diags(
                [np.full(n, 6.0), np.full(n - 1, -4.0), np.full(n - 1, -4.0), np.full(n - 2, 1.0),
                 np.full(n - 2, 1.0), [-4.0], [-4.0], [1.0, 1.0], [1.0, 1.0]],
                [0, 1, -1, 2, -2, n - 1, -(n - 1), n - 2, -(n - 2)], format="csc",
            ) / dx**4
        else:
            self.n = grid.nx - 2
            self.sl = slice(1, grid.nx - 1)
            self.band = stiffness_band(self.n, dx)
        self._diag = None
        self._zeta = None
        self._factor = None
        self.factorizations = 0

    def apply_K(self, u: np.ndarray) -> np.ndarray:
        if self.periodic:
            return self.K @ u
        b = self.band
        out = b[2] * u
        out[:-1] += b[1, 1:] * u[1:]
        out[:-2] += b[0, 2:] * u[2:]
        out[1:] += b[3, :-1] * u[:-1]
        out[2:] += b[4, :-2] * u[:-2]
        return out

    def _factorize(self, diag: np.ndarray):
        c = self.beta * self.dt**2
        if self.periodic:
            A = (sparse.diags(diag, 0, format="csc") + c * self.K).tocsc()
            self._factor = splu(A)
        else:
            ab = np.zeros((7, self.n))
            ab[2:] = c * self.band
            ab[4] += diag
            lu, piv, info = lapack.dgbtrf(ab, 2, 2)
            if info != 0:
                raise np.linalg.LinAlgError(f"banded factorization failed (info={info})")
            self._factor = (lu, piv)
        self._diag = diag.copy()
        self.factorizations += 1

    def _solve_factored(self, rhs: np.ndarray) -> np.ndarray:
        if self.periodic:
            return self._factor.solve(rhs)
        lu, piv = self._factor
        x, info = lapack.dgbtrs(lu, 2, 2, rhs, piv)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded solve failed (info={info})")
        return x

    def matvec(self, diag: np.ndarray, a: np.ndarray) -> np.ndarray:
        return diag * a + self.beta * self.dt**2 * self.apply_K(a)

    def solve(self, diag: np.ndarray, rhs: np.ndarray, zeta: float | None = None) -> np.ndarray:
        same = self._diag is not None and np.array_equal(diag, self._diag)
        if not same:
            moved = (
                self.reassembly == "every_step" or self._diag is None or zeta is None
                or self._zeta is None or abs(zeta - self._zeta) > 0.5 * self.grid.dx
            )
            if moved:
                self._factorize(diag)
                self._zeta = zeta
                same = True
        x = self._solve_factored(rhs)
        if same:
            return x
        # defect correction against the current (not the factored) matrix
        scale = np.max(np.abs(rhs)) + FLOOR
        for _ in range(50):
            r = rhs - self.matvec(diag, x)
            if np.max(np.abs(r)) <= 1e-15 * scale:
                break
            x = x + self._solve_factored(r)
        return x


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

def solve_linear(
    F: np.ndarray,
    G: np.ndarray,
    g: np.ndarray,
    u0: Field,
    u1: Field,
    axis: TimeAxis,
    *,
    periodic: bool = False,
    reassembly: str = "every_step",
    zeta: np.ndarray | None = None,
    quiescence_tol: float | None = 1e-6,
    quiescence_zone: float | None = None,
) -> StateHistory:
    """Newmark solve of ``u_tt + F u_xxxx + G u_t = g`` on the whole time axis.

    ``F``, ``G`` and ``g`` are ``(nt + 1, nx)`` arrays.  In clamped mode the
    boundary zone (width ``quiescence_zone``, default 5% of the interval) must
    stay below ``quiescence_tol`` times the running interior maximum; pass
    ``quiescence_tol=None`` to disable the monitor.
    """
    grid = u0.grid
    if u1.grid != grid:
        raise ValueError("u0 and u1 live on different grids")
    shape = (axis.nt + 1, grid.nx)
    F = np.broadcast_to(np.asarray(F, dtype=float), shape)
    G = np.broadcast_to(np.asarray(G, dtype=float), shape)
    g = np.broadcast_to(np.asarray(g, dtype=float), shape)
    if not (np.all(np.isfinite(u0.values)) and np.all(np.isfinite(u1.values))):
        raise ValueError("initial data must be finite")
    if np.any(F <= 0):
        raise ValueError("coefficient F must be positive")

    op = LinearStepOperator(grid, axis.dt, periodic=periodic, reassembly=reassembly)
    sl = op.sl
    dt = axis.dt
    c_u = BETA * dt**2

    u = np.zeros(shape)
    v = np.zeros(shape)
    u[0] = u0.values
    v[0] = u1.values
    if periodic:
        if u[0, 0] != u[0, -1] or v[0, 0] != v[0, -1]:
            raise ValueError("periodic initial data must repeat its first value at the last point")
    elif u[0, 0] != 0.0 or u[0, -1] != 0.0 or v[0, 0] != 0.0 or v[0, -1] != 0.0:
        raise ValueError("clamped initial data must vanish at the end points")

    def coeffs(n):
        inv = 1.0 / F[n, sl]
        return inv, G[n, sl] * inv, g[n, sl] * inv

    M, C, r = coeffs(0)
    un = u[0, sl].copy()
    vn = v[0, sl].copy()
    an = (r - C * vn - op.apply_K(un)) / M

    monitor = quiescence_tol is not None and not periodic
    if monitor:
        width = 0.05 * (grid.x_max - grid.x_min) if quiescence_zone is None else quiescence_zone
        x = grid.x
        zone = (x < grid.x_min + width) | (x > grid.x_max - width)
        inner = ~zone
        running = float(np.max(np.abs(u[0, inner]), initial=0.0))

    for n in range(axis.nt):
        M, C, r = coeffs(n + 1)
        diag = M + GAMMA * dt * C
        v_pred = vn + (1.0 - GAMMA) * dt * an
        u_pred = un + dt * vn + (0.5 - BETA) * dt**2 * an
        rhs = r - C * v_pred - op.apply_K(u_pred)
        a_next = op.solve(diag, rhs, None if zeta is None else float(zeta[n + 1]))
        un = u_pred + c_u * a_next
        vn = v_pred + GAMMA * dt * a_next
        an = a_next
        if not (np.all(np.isfinite(un)) and np.all(np.isfinite(vn))):
            raise SolverInstabilityError(n + 1)
        u[n + 1, sl] = un
        v[n + 1, sl] = vn
        if periodic:
            u[n + 1, -1] = un[0]
            v[n + 1, -1] = vn[0]
        if monitor:
            row = u[n + 1]
            running = max(running, float(np.max(np.abs(row[inner]))))
            edge = float(np.max(np.abs(row[zone]), initial=0.0))
            if edge > quiescence_tol * running:
                raise BoundaryQuiescenceError(n + 1, edge / running if running > 0 else np.inf, quiescence_tol)
    return StateHistory(grid, axis, u, v)


# ---------------------------------------------------------------------------
# a priori estimate surrogate
# ---------------------------------------------------------------------------

def history_norms(h: StateHistory) -> np.ndarray:
    """``||u(t)||_{H^2} + ||u_t(t)||_{L^2}`` per time level."""
    dx = h.grid.dx
    return h2_norm(h.u, dx) + l2_norm(h.u_t, dx)


def estimate_ratio(h: StateHistory, u0: Field, u1: Field, g: np.ndarray) -> float:
    """``max_t (|u|_{H^2} + |u_t|) / (|u0|_{H^2} + |u1| + |g|_{L^2(0,t;L^2)} + floor)``."""
    dx = h.grid.dx
    g = np.broadcast_to(np.asarray(g, dtype=float), h.u.shape)
    g_l2 = np.sqrt(cumulative_time_integral(l2_norm(g, dx) ** 2, h.time_axis.dt))
    den = h2_norm(u0.values, dx) + l2_norm(u1.values, dx) + g_l2 + FLOOR
    return float(np.max(history_norms(h) / den))


def discrete_energy(h: StateHistory, periodic: bool = False) -> np.ndarray:
    """``1/2 |u_t|^2 + 1/2 |u_xx|^2`` per time level (rectangle rule on the unknowns)."""
    dx = h.grid.dx
    if periodic:
        ut = h.u_t[:, :-1]
        core = h.u[:, :-1]
        uxx = (np.roll(core, -1, -1) - 2 * core + np.roll(core, 1, -1)) / dx**2
        return 0.5 * dx * (np.sum(ut**2, axis=-1) + np.sum(uxx**2, axis=-1))
    uxx = d2(h.u, dx)
    return 0.5 * (trapezoid(h.u_t**2, dx) + trapezoid(uxx**2, dx))


# ---------------------------------------------------------------------------
# checkpoint format
# ---------------------------------------------------------------------------

_MAGIC = b"GBSH"
_VERSION = 1
_HEADER = struct.Struct("<4sIddQdQ")


def save_checkpoint(h: StateHistory, path) -> None:
    """Header (magic, version, grid, axis) then little-endian float64 ``u`` and ``u_t``."""
    g, a = h.grid, h.time_axis
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, g.x_min, g.x_max, g.nx, a.T, a.nt))
        fh.write(np.ascontiguousarray(h.u, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(h.u_t, dtype="<f8").tobytes())


def load_checkpoint(path) -> StateHistory:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError("checkpoint is truncated")
    magic, version, x_min, x_max, nx, T, nt = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError("not a state-history checkpoint")
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    grid, axis = Grid(x_min, x_max, nx), TimeAxis(T, nt)
    count = (nt + 1) * nx
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * count:
        raise ValueError("checkpoint payload size does not match its header")
    u = body[:count].reshape(nt + 1, nx).astype(float)
    u_t = body[count:].reshape(nt + 1, nx).astype(float)
    return StateHistory(grid, axis, u, u_t)
