"""Localized Sobolev norms and traces along the load path."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft

from ..discretization import Field, Grid


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class SobolevNormSpec:
    """Order ``s`` in [0, 2] on the window ``K = [a, b]`` with a smooth taper of width ``taper``."""

    s: float
    a: float
    b: float
    taper: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.s <= 2.0:
            raise ValueError(f"order s must lie in [0, 2], got {self.s}")
        if not self.a < self.b:
            raise ValueError(f"empty window [{self.a}, {self.b}]")
        if not 0.0 < self.taper <= 0.5 * (self.b - self.a):
            raise ValueError("taper must be positive and at most half the window")

    def with_order(self, s: float) -> "SobolevNormSpec":
        return SobolevNormSpec(s, self.a, self.b, self.taper)


def _smoothstep(z: np.ndarray) -> np.ndarray:
    # C-infinity step from 0 (z <= 0) to 1 (z >= 1)
    z = np.clip(z, 0.0, 1.0)
    out = np.zeros_like(z)
    inner = (z > 0) & (z < 1)
    zi = z[inner]
    a = np.exp(-1.0 / zi)
    b = np.exp(-1.0 / (1.0 - zi))
    out[inner] = a / (a + b)
    out[z >= 1.0] = 1.0
    return out


def window_weights(grid: Grid, spec: SobolevNormSpec) -> np.ndarray:
    """Smooth window: 1 on ``[a + taper, b - taper]``, 0 outside ``(a, b)``."""
    if spec.a <= grid.x_min or spec.b >= grid.x_max:
        raise WindowError(
            f"window [{spec.a:g}, {spec.b:g}] must lie strictly inside the grid [{grid.x_min:g}, {grid.x_max:g}]"
        )
    x = grid.x
    return _smoothstep((x - spec.a) / spec.taper) * _smoothstep((spec.b - x) / spec.taper)


def sobolev_norm(f, spec: SobolevNormSpec, grid: Grid | None = None):
    """Discrete ``H^s(K)`` norm of the windowed field via its Fourier symbol.

    ``f`` is a Field or an array whose last axis is space (then ``grid`` is
    required); leading axes are kept, e.g. one norm per time step.
    """
    if isinstance(f, Field):
        grid, values = f.grid, f.values
    else:
        if grid is None:
            raise ValueError("grid is required for array input")
        values = np.asarray(f, dtype=float)
    w = window_weights(grid, spec)
    inside = np.nonzero(w > 0)[0]
    lo, hi = inside[0], inside[-1] + 1
    g = values[..., lo:hi] * w[lo:hi]
    n = fft.next_fast_len(2 * (hi - lo))
    dx = grid.dx
    ghat = fft.rfft(g, n=n, axis=-1) * dx
    xi = 2.0 * np.pi * fft.rfftfreq(n, d=dx)
    weight = np.full(xi.shape, 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    # Parseval: sum_x g^2 dx = (1 / (n dx)) sum_j |ghat_j|^2
    power = weight * (1.0 + xi**2) ** spec.s * np.abs(ghat) ** 2
    return np.sqrt(np.sum(power, axis=-1) / (n * dx))


def windowed_l2(f, spec: SobolevNormSpec, grid: Grid | None = None):
    if isinstance(f, Field):
        grid, values = f.grid, f.values
    else:
        values = np.asarray(f, dtype=float)
    w = window_weights(grid, spec)
    return np.sqrt(np.sum((values * w) ** 2, axis=-1) * grid.dx)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

def _lagrange4(s: np.ndarray):
    # weights and derivative weights of the cubic through nodes -1, 0, 1, 2 at offset s in [0, 1)
    w = np.stack([
        -s * (s - 1) * (s - 2) / 6.0,
        (s + 1) * (s - 1) * (s - 2) / 2.0,
        -(s + 1) * s * (s - 2) / 2.0,
        (s + 1) * s * (s - 1) / 6.0,
    ])
    dw = np.stack([
        -(3 * s**2 - 6 * s + 2) / 6.0,
        (3 * s**2 - 4 * s - 1) / 2.0,
        -(3 * s**2 - 2 * s - 2) / 2.0,
        (3 * s**2 - 1) / 6.0,
    ])
    return w, dw


def trace_values(values: np.ndarray, grid: Grid, path: np.ndarray, derivative: bool = False) -> np.ndarray:
    """Evaluate row ``n`` of ``values`` at ``path[n]`` by local cubic interpolation."""
    values = np.asarray(values, dtype=float)
    path = np.asarray(path, dtype=float)
    x = grid.x
    if path.min() < x[1] or path.max() > x[-2]:
        raise ValueError(f"path leaves the grid interior [{x[1]:g}, {x[-2]:g}]")
    pos = (path - grid.x_min) / grid.dx
    i = np.clip(np.floor(pos).astype(int), 1, grid.nx - 3)
    s = pos - i
    w, dw = _lagrange4(s)
    rows = np.arange(len(path))
    stencil = np.stack([values[rows, i + k] for k in (-1, 0, 1, 2)])
    if derivative:
        return np.sum(dw * stencil, axis=0) / grid.dx
    return np.sum(w * stencil, axis=0)


def trace(h, path, which: str = "u") -> np.ndarray:
    """Series ``u(t, zeta(t))``, ``u_t(t, zeta(t))`` or ``u_x(t, zeta(t))``.

    ``path`` is an array of load positions per time level, or any object with
    a ``zeta_at`` method (a Scenario).
    """
    if which not in ("u", "u_t", "u_x"):
        raise ValueError(f"which must be 'u', 'u_t' or 'u_x', got {which!r}")
    if hasattr(path, "zeta_at"):
        path = path.zeta_at(h.time_axis.times)
    path = np.broadcast_to(np.asarray(path, dtype=float), (h.time_axis.nt + 1,))
    if which == "u_t":
        return trace_values(h.u_t, h.grid, path)
    return trace_values(h.u, h.grid, path, derivative=(which == "u_x"))
