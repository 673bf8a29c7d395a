import warnings
from dataclasses import replace

import numpy as np
import pytest

from madfrc.config import ScenarioConfig
from madfrc.geometry import RadarGeometry, sample_channels
from madfrc.metrics import DesignVariables, optimal_lambda

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(autouse=True)
def _quiet_runtime_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def small_scenario(**kw) -> ScenarioConfig:
    base = dict(users=2, antennas=4, ris_elements=8)
    base.update(kw)
    return ScenarioConfig(**base)


def without_clutter(channel):
    r = channel.radar
    radar = RadarGeometry(r.target_angles, np.zeros((0, 2)), r.target_power, np.zeros(0),
                          r.wavelength)
    return replace(channel, radar=radar)


def scattered(rng, N, region, D):
    """Random positions in the square region with pairwise spacing at least D."""
    half = region / 2
    pts = []
    while len(pts) < N:
        c = rng.uniform(-half, half, 2)
        if all(np.linalg.norm(c - p) >= D for p in pts):
            pts.append(c)
    return np.array(pts)


def random_point(rng, channel, scenario, power=None):
    """Random design point with unit-modulus RIS and full-power precoder."""
    N, K, M = scenario.antennas, channel.K, channel.M
    W = crandn(rng, N, K)
    W *= np.sqrt((scenario.power if power is None else power) / np.vdot(W, W).real)
    v = np.exp(1j * rng.uniform(0, 2 * np.pi, M))
    t = scattered(rng, N, scenario.A, scenario.D)
    r = scattered(rng, N, scenario.A, scenario.D)
    lam = optimal_lambda(W, r, t, channel.radar, channel.radar_noise)
    return DesignVariables(W, v, t, r, lam)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small():
    sc = small_scenario()
    return sc, sample_channels(7, sc)
