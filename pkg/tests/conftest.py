import numpy as np
import pytest

from gaobeam.config import load_config
from gaobeam.discretization import Grid, TimeAxis
from gaobeam.model import Scenario

# 1/int_{-1}^{1} exp(-1/(1-s^2)) ds from 30-digit quadrature, frozen
BUMP_NORMALIZER = 2.25228362104358101049978125556


def brute_force_convolution(values, weights):
    # out[i] = sum_k values[i - k] * weights[k], k in [-n, n], zero outside the grid
    n = (len(weights) - 1) // 2
    out = np.zeros(len(values))
    for i in range(len(values)):
        for j, k in enumerate(range(-n, n + 1)):
            if 0 <= i - k < len(values):
                out[i] += values[i - k] * weights[j]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def demo_config():
    return load_config("moving_mass_demo")


def small_scenario(**overrides) -> Scenario:
    """A cheap moving-mass scenario for grids around [-6, 6]."""
    data = dict(
        zeta="0.5*t - 0.1", P="-exp(-(8*t - 2)^2)", p="0.3*bump(x/3)", f="0",
        u0="0.1*bump((x + 2)/1.5)", u1="0", nu=1.0, mass_term_enabled=True,
    )
    data.update(overrides)
    return Scenario.from_strings(**data)


def small_grid(nx: int = 601, half: float = 6.0) -> Grid:
    return Grid(-half, half, nx)


def small_axis(nt: int = 100, T: float = 0.25) -> TimeAxis:
    return TimeAxis(T, nt)


SMALL_CONFIG = """
[grid]
x_min = -12.0
x_max = 12.0
nx = 1201

[time]
T = 0.25
nt = 40

[scenario]
zeta = "0.5*t - 0.1"
P = "-exp(-(8*t - 2)^2)"
p = "0.3*bump(x/3)"
f = "0"
u0 = "0.1*bump((x + 2)/1.5)"
u1 = "0"
nu = 1.0

[regularization]
ladder = [0.3, 0.25, 0.2]
picard_tol = 1e-8

[outputs]
stem = "small"

[analysis]
window_a = -3.0
window_b = 3.0
"""


def write_config(tmp_path, text: str = SMALL_CONFIG, name: str = "small.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path
