"""Scenario and algorithm parameters.

Powers enter the package in dB/dBm only through :func:`db_to_linear` and
:func:`dbm_to_watt`; every dataclass below stores linear quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watt(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


def linear_to_db(value) -> np.ndarray | float:
    return 10.0 * np.log10(value)


def watt_to_dbm(value) -> np.ndarray | float:
    return 10.0 * np.log10(value) + 30.0


def _deg(pairs):
    return tuple(tuple(math.radians(a) for a in p) for p in pairs)


@dataclass(frozen=True)
class ScenarioGeometry:
    """Node placement and large-scale fading (meters, linear gains)."""

    bs: tuple[float, float] = (0.0, 0.0)
    ris: tuple[float, float] = (30.0, 5.0)
    user_center: tuple[float, float] = (30.0, 0.0)
    user_radius: float = 3.0
    c0: float = db_to_linear(-30.0)
    exponent_bs_ris: float = 2.4
    exponent_ris_user: float = 2.8
    exponent_target: float = 2.6
    target_distance: float = 40.0

    def path_loss(self, distance: float, exponent: float) -> float:
        if distance <= 0:
            raise ValueError("distance must be positive")
        return self.c0 * distance ** (-exponent)


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical system parameters in linear units.

    ``target_gain`` and ``clutter_gain`` are the reflectivity scalings before
    path loss; the BS-target path loss is folded into the target power only.
    """

    users: int = 3
    antennas: int = 8
    ris_elements: int = 32
    paths: int = 4
    wavelength: float = 0.1
    min_distance: float | None = None
    region_size: float | None = None
    power: float = dbm_to_watt(30.0)
    qos: float = db_to_linear(10.0)
    noise: float = dbm_to_watt(-80.0)
    radar_noise: float = dbm_to_watt(-80.0)
    target_angles: tuple[float, float] = _deg([(30.0, 45.0)])[0]
    clutter_angles: tuple[tuple[float, float], ...] = _deg([(120.0, 90.0), (135.0, 60.0)])
    target_gain: float = 1.0
    clutter_gain: float = 1.0
    geometry: ScenarioGeometry = field(default_factory=ScenarioGeometry)

    @property
    def D(self) -> float:
        return self.wavelength / 2 if self.min_distance is None else self.min_distance

    @property
    def A(self) -> float:
        return 2 * self.wavelength if self.region_size is None else self.region_size

    @property
    def clutters(self) -> int:
        return len(self.clutter_angles)

    @property
    def target_power(self) -> float:
        g = self.geometry
        return self.target_gain * g.path_loss(g.target_distance, g.exponent_target)

    @property
    def clutter_powers(self) -> np.ndarray:
        return np.full(self.clutters, float(self.clutter_gain))

    def desk(self) -> "ScenarioConfig":
        """Reduced problem size used for laptop-scale reproductions."""
        from dataclasses import replace

        return replace(self, users=2, antennas=4, ris_elements=16)


@dataclass(frozen=True)
class PenaltyConfig:
    """Two-layer penalty loop for the RIS phases."""

    rho_init_fraction: float = 0.05
    tau: float = 5.0
    xi1: float = 1e-4
    xi2: float = 1e-3
    max_outer: int = 10
    max_inner: int = 20

    def __post_init__(self):
        if self.tau <= 1:
            raise ValueError("tau must exceed 1")
        if self.xi1 <= 0 or self.xi2 <= 0 or self.rho_init_fraction <= 0:
            raise ValueError("penalty tolerances and initial weight must be positive")


@dataclass(frozen=True)
class BcdConfig:
    outer_tol: float = 1e-3
    max_outer: int = 30
    w_max_inner: int = 10
    w_inner_tol: float = 1e-4
    pos_max_inner: int = 15
    pos_tol: float = 1e-4  # in wavelengths
    # first position subproblem uses this fraction of the certified curvature bounds
    pos_curvature_start: float = 1.0 / 16
    # (Lambda, W, v) are cycled up to this many times per pass, stopping early
    # once a cycle improves the surrogate by less than link_tol (relative)
    link_rounds: int = 1
    link_tol: float = 1e-4
    init_max_iter: int = 30
    init: str = "matched"
    # re-optimize the auxiliary matrix jointly with the receive positions
    rx_adapt_filter: bool = True
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)

    def __post_init__(self):
        if self.outer_tol <= 0 or self.w_inner_tol <= 0 or self.pos_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.link_rounds < 1:
            raise ValueError("link_rounds must be at least 1")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.init != "matched":
            raise ValueError(f"unknown initialization strategy {self.init!r}")
