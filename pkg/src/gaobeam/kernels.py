"""Mollifier and truncation kernels, and discrete convolution on the grid.

The mollifier is the normalized standard bump ``exp(-1/(1-s^2))`` on ``(-1, 1)``
rescaled to ``theta_eps(x) = theta(x / eps) / eps``.  The truncation ``phi_R``
equals ``x^2`` on ``|x| <= R``, the constant ``(R+1)^2`` on ``|x| >= R+2`` and a
quintic Hermite blend in between.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, ndimage

from .discretization import Field, GridMismatchError


class UnderResolvedKernelError(ValueError):
    """Raised when the grid cannot resolve the mollifier support."""


class TruncationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# the bump and its closed-form derivatives
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _bump_numerator(order: int) -> Polynomial:
    # bump^(n)(y) = bump(y) * P_n(y) / (1 - y^2)^(2n)
    # P_{n+1} = -2y P_n + (1-y^2)^2 P_n' + 4 n y (1-y^2) P_n
    if order == 0:
        return Polynomial([1.0])
    prev = _bump_numerator(order - 1)
    n = order - 1
    y = Polynomial([0.0, 1.0])
    one_m_y2 = Polynomial([1.0, 0.0, -1.0])
    return -2.0 * y * prev + one_m_y2**2 * prev.deriv() + 4.0 * n * y * one_m_y2 * prev


def bump(y, order: int = 0):
    """Derivative of order ``order`` of ``exp(-1/(1-y^2))`` (zero for ``|y| >= 1``).

    Evaluated in log space so that the rational factor never meets the
    underflowing exponential near the support edge.
    """
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    if np.any(inside):
        yi = y[inside]
        s = 1.0 - yi * yi
        logmag = -1.0 / s - 2.0 * order * np.log(s)
        out[inside] = _bump_numerator(order)(yi) * np.exp(logmag)
    if out.ndim == 0:
        return float(out)
    return out


@lru_cache(maxsize=None)
def bump_normalizer() -> float:
    """``1 / int_{-1}^{1} exp(-1/(1-s^2)) ds`` by adaptive quadrature."""
    mass, _ = integrate.quad(lambda s: bump(s), -1.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return 1.0 / mass


# ---------------------------------------------------------------------------
# mollifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Mollifier:
    """theta_eps sampled on the integer offsets ``k*dx`` of its support.

    ``kernel_samples[d]`` holds the exact values of the ``d``-th derivative at
    the offsets.  ``weights[d]`` are the quadrature weights actually used by
    :func:`convolve`; they carry the factor ``dx`` and are moment-corrected so
    that the discrete operators are exact on low-degree polynomials (mass 1 for
    ``d=0``, ``-sum(w*y) = 1`` for ``d=1``, zero mass and ``sum(w*y^2)/2 = 1``
    for ``d=2``).
    """

    epsilon: float
    dx: float
    base_normalizer: float
    offsets: np.ndarray
    kernel_samples: tuple
    weights: tuple = field(repr=False)

    @property
    def half_width(self) -> int:
        return (len(self.offsets) - 1) // 2

    def __call__(self, x, order: int = 0):
        return mollifier_derivative(self, order, x)

    def peak(self) -> float:
        return self.base_normalizer * bump(0.0) / self.epsilon


def make_mollifier(epsilon: float, grid_spacing: float) -> Mollifier:
    if not (epsilon > 0 and grid_spacing > 0):
        raise ValueError("epsilon and grid_spacing must be positive")
    if epsilon < 4.0 * grid_spacing * (1.0 - 1e-12):
        raise UnderResolvedKernelError(
            f"mollifier epsilon={epsilon:g} is under-resolved by dx={grid_spacing:g}: "
            f"need epsilon >= 4*dx = {4 * grid_spacing:g}"
        )
    z = bump_normalizer()
    n = int(np.floor(epsilon / grid_spacing * (1.0 + 1e-12)))
    k = np.arange(-n, n + 1)
    y = k * grid_spacing
    s = y / epsilon
    samples = tuple(z * bump(s, d) / epsilon ** (d + 1) for d in range(3))

    w0 = samples[0] * grid_spacing
    w0 = w0 / w0.sum()
    w1 = samples[1] * grid_spacing
    w1 = 0.5 * (w1 - w1[::-1])  # exact antisymmetry
    w1 = w1 / -(w1 * y).sum()
    w2 = samples[2] * grid_spacing
    w2 = 0.5 * (w2 + w2[::-1])
    w2 = w2 - w2.sum() * w0
    w2 = w2 / (0.5 * (w2 * y * y).sum())
    for arr in (*samples, w0, w1, w2, y):
        arr.setflags(write=False)
    return Mollifier(epsilon, grid_spacing, z, y, samples, (w0, w1, w2))


def mollifier_derivative(m: Mollifier, order: int, x):
    """theta_eps, theta_eps' or theta_eps'' at ``x`` from the closed form."""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    x = np.asarray(x, dtype=float)
    return m.base_normalizer * bump(x / m.epsilon, order) / m.epsilon ** (order + 1)


def smooth(values: np.ndarray, m: Mollifier, derivative_order: int = 0) -> np.ndarray:
    """Convolve along the last axis with ``m``'s quadrature weights.

    Fields are extended by zero outside the grid.
    """
    w = m.weights[derivative_order]
    # ndimage correlates with the reversed kernel, so this is sum_k v[i-k] w[k]
    return ndimage.convolve1d(np.asarray(values, dtype=float), w, axis=-1, mode="constant", cval=0.0)


def convolve(fld: Field, m: Mollifier, derivative_order: int = 0) -> Field:
    if not np.isclose(fld.grid.dx, m.dx, rtol=1e-12, atol=0.0):
        raise GridMismatchError(f"field spacing {fld.grid.dx:g} differs from mollifier spacing {m.dx:g}")
    return Field(fld.grid, smooth(fld.values, m, derivative_order))


# ---------------------------------------------------------------------------
# truncation
# ---------------------------------------------------------------------------

def _hermite_blend(R: float) -> Polynomial:
    # quintic in s = |x| - R on [0, 2]: C2 match to x^2 at s=0 and to (R+1)^2 at s=2
    rows, rhs = [], []
    for s0, d, val in ((0.0, 0, R * R), (0.0, 1, 2.0 * R), (0.0, 2, 2.0),
                       (2.0, 0, (R + 1.0) ** 2), (2.0, 1, 0.0), (2.0, 2, 0.0)):
        row = []
        for k in range(6):
            if k < d:
                row.append(0.0)
            else:
                coef = float(np.prod(np.arange(k - d + 1, k + 1))) if d else 1.0
                row.append(coef * s0 ** (k - d))
        rows.append(row)
        rhs.append(val)
    return Polynomial(np.linalg.solve(np.array(rows), np.array(rhs)))


@dataclass(frozen=True, eq=False)
class Truncation:
    R: float
    blend: Polynomial
    blend_psi: Polynomial
    blend_mu: Polynomial
    psi_R2: float
    mu_R2: float

    @property
    def cap(self) -> float:
        return (self.R + 1.0) ** 2

    def phi(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        R = self.R
        return np.where(a <= R, a * a, np.where(a >= R + 2.0, self.cap, self.blend(a - R)))

    def dphi(self, x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        R = self.R
        d = np.where(a <= R, 2.0 * a, np.where(a >= R + 2.0, 0.0, self.blend.deriv()(a - R)))
        return np.sign(x) * d

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        R = self.R
        tail = a - R - 2.0
        val = np.where(
            a <= R, a**3 / 3.0,
            np.where(a >= R + 2.0, self.psi_R2 + self.cap * tail, self.blend_psi(a - R)),
        )
        return np.sign(x) * val

    def mu(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        R = self.R
        tail = a - R - 2.0
        return np.where(
            a <= R, a**4 / 12.0,
            np.where(a >= R + 2.0,
                     self.mu_R2 + self.psi_R2 * tail + 0.5 * self.cap * tail * tail,
                     self.blend_mu(a - R)),
        )


def make_truncation(R: float) -> Truncation:
    if not R > 0:
        raise ValueError(f"truncation radius must be positive, got {R}")
    blend = _hermite_blend(R)
    # psi(R + s) = R^3/3 + int_0^s blend ; mu(R + s) = R^4/12 + R^3/3 s + int_0^s int_0 blend
    blend_psi = blend.integ(lbnd=0.0, k=R**3 / 3.0)
    blend_mu = blend_psi.integ(lbnd=0.0, k=R**4 / 12.0)
    s = np.linspace(0.0, 2.0, 4001)
    slope = blend.deriv()(s)
    if slope.min() < -1e-12 * max(1.0, R * R):
        raise TruncationError(f"quintic blend is not monotone for R={R}")
    return Truncation(R, blend, blend_psi, blend_mu, float(blend_psi(2.0)), float(blend_mu(2.0)))


def truncation_antiderivatives(t: Truncation, x):
    """Return ``(psi_R(x), mu_R(x))``, the first and second antiderivatives of phi_R."""
    return t.psi(x), t.mu(x)
