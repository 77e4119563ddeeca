"""Uniform grids, sampled fields and the discrete calculus shared by all modules."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[x_min, x_max]`` with ``nx`` points (both ends included)."""

    x_min: float
    x_max: float
    nx: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got {self.x_min}, {self.x_max}")
        if int(self.nx) != self.nx or self.nx < 16:
            raise ValueError(f"need an integer nx >= 16, got {self.nx}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @cached_property
    def x(self) -> np.ndarray:
        x = np.linspace(self.x_min, self.x_max, self.nx)
        x.setflags(write=False)
        return x

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.x_min, self.x_max, (self.nx - 1) * factor + 1)


@dataclass(frozen=True)
class TimeAxis:
    T: float
    nt: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"need T > 0, got {self.T}")
        if int(self.nt) != self.nt or self.nt < 2:
            raise ValueError(f"need an integer nt >= 2, got {self.nt}")

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @cached_property
    def times(self) -> np.ndarray:
        t = np.linspace(0.0, self.T, self.nt + 1)
        t.setflags(write=False)
        return t

    def refined(self, factor: int = 2) -> "TimeAxis":
        return TimeAxis(self.T, self.nt * factor)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.nx,):
            raise ValueError(f"field has shape {v.shape}, grid has {self.grid.nx} points")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)


# ---------------------------------------------------------------------------
# finite differences (last axis is space)
# ---------------------------------------------------------------------------

def d1(u: np.ndarray, dx: float) -> np.ndarray:
    """Second-order first derivative; one-sided at the two ends."""
    return np.gradient(u, dx, axis=-1, edge_order=2)


def d2(u: np.ndarray, dx: float) -> np.ndarray:
    """Central second difference; the end values are taken from the neighbours."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    out[..., 1:-1] = (u[..., 2:] - 2.0 * u[..., 1:-1] + u[..., :-2]) / dx**2
    out[..., 0] = out[..., 1]
    out[..., -1] = out[..., -2]
    return out


def trapezoid(values: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    return integrate.trapezoid(values, dx=h, axis=axis)


def l2_norm(u: np.ndarray, dx: float) -> np.ndarray:
    return np.sqrt(trapezoid(np.asarray(u) ** 2, dx))


def h2_norm(u: np.ndarray, dx: float) -> np.ndarray:
    """Discrete H^2 norm ``(|u|^2 + |u_x|^2 + |u_xx|^2)^(1/2)`` with trapezoid quadrature."""
    u = np.asarray(u, dtype=float)
    return np.sqrt(trapezoid(u**2 + d1(u, dx) ** 2 + d2(u, dx) ** 2, dx))


def cumulative_time_integral(series: np.ndarray, dt: float) -> np.ndarray:
    """``int_0^{t_n}`` of a per-step series, trapezoid rule, starting at 0."""
    return integrate.cumulative_trapezoid(series, dx=dt, axis=0, initial=0.0)
