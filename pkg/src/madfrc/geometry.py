"""Far-field channel model for movable transmit/receive arrays and the RIS.

Positions are ``(n, 2)`` arrays of ``[x, y]`` in meters, measured from the
reference point of their region. Angles are ``(..., 2)`` arrays of
``[elevation, azimuth]`` in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig

__all__ = [
    "direction",
    "propagation_diff",
    "field_response_vector",
    "field_response_matrix",
    "assemble_bs_ris_channel",
    "user_channel",
    "steering_vector",
    "radar_response_matrix",
    "planar_grid",
    "RadarGeometry",
    "ChannelState",
    "draw_path_gains",
    "sample_channels",
]


def direction(angles) -> np.ndarray:
    """Projection coefficients ``[sin(el) cos(az), cos(el)]`` for each angle pair."""
    angles = np.asarray(angles, dtype=float)
    el, az = angles[..., 0], angles[..., 1]
    return np.stack([np.sin(el) * np.cos(az), np.cos(el)], axis=-1)


def propagation_diff(pos, angles) -> np.ndarray:
    """Path-length difference between ``pos`` and the region origin."""
    return np.asarray(pos, dtype=float) @ direction(angles).T


def _check_wavelength(wavelength):
    if not wavelength > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")


def field_response_vector(pos, angles, wavelength: float) -> np.ndarray:
    """Per-path phase response (length L) of one element at ``pos``."""
    _check_wavelength(wavelength)
    angles = np.atleast_2d(angles)
    rho = direction(angles) @ np.asarray(pos, dtype=float)
    return np.exp(1j * 2 * np.pi / wavelength * rho)


def field_response_matrix(positions, angles, wavelength: float) -> np.ndarray:
    """Stack of field-response vectors, shape ``(L, n_elements)``."""
    _check_wavelength(wavelength)
    angles = np.atleast_2d(angles)
    rho = direction(angles) @ np.asarray(positions, dtype=float).T
    return np.exp(1j * 2 * np.pi / wavelength * rho)


def assemble_bs_ris_channel(G, F, prm) -> np.ndarray:
    """BS->RIS channel ``F^H diag(prm) G`` of shape ``(M, N)``."""
    G = np.asarray(G)
    F = np.asarray(F)
    prm = np.asarray(prm)
    if prm.ndim != 1 or G.shape[0] != prm.size or F.shape[0] != prm.size:
        raise ValueError(
            f"path dimension mismatch: G {G.shape}, F {F.shape}, prm {prm.shape}"
        )
    return F.conj().T @ (prm[:, None] * G)


def user_channel(prm_k, F_k) -> np.ndarray:
    """RIS->user channel ``F_k^H diag(prm_k) 1_L`` seen by a fixed single antenna."""
    prm_k = np.asarray(prm_k)
    F_k = np.asarray(F_k)
    if F_k.shape[0] != prm_k.size:
        raise ValueError(f"path dimension mismatch: F {F_k.shape}, prm {prm_k.shape}")
    return F_k.conj().T @ prm_k


def steering_vector(angles, positions, wavelength: float) -> np.ndarray:
    """Line-of-sight array response toward one angle pair."""
    _check_wavelength(wavelength)
    rho = np.asarray(positions, dtype=float) @ direction(angles)
    return np.exp(1j * 2 * np.pi / wavelength * rho)


def radar_response_matrix(angles, r, t, wavelength: float) -> np.ndarray:
    """Rank-one round-trip response ``a_r a_t^H`` for a target or clutter angle."""
    a_r = steering_vector(angles, r, wavelength)
    a_t = steering_vector(angles, t, wavelength)
    return np.outer(a_r, a_t.conj())


def planar_grid(n: int, spacing: float) -> np.ndarray:
    """Near-square grid of ``n`` points centered on the origin.

    Columns run along x; the last row is filled left to right when ``n`` is not
    a product of the grid sides.
    """
    if n < 1:
        raise ValueError("need at least one element")
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    xs = (np.arange(cols) - (cols - 1) / 2) * spacing
    ys = (np.arange(rows) - (rows - 1) / 2) * spacing
    pts = np.array([(x, y) for y in ys for x in xs])
    return pts[:n]


@dataclass(frozen=True)
class RadarGeometry:
    target_angles: np.ndarray  # (2,)
    clutter_angles: np.ndarray  # (Q, 2)
    target_power: float
    clutter_powers: np.ndarray  # (Q,)
    wavelength: float

    def __post_init__(self):
        ca = np.asarray(self.clutter_angles, dtype=float).reshape(-1, 2)
        cp = np.asarray(self.clutter_powers, dtype=float).reshape(-1)
        if ca.shape[0] != cp.size:
            raise ValueError("one power per clutter required")
        if self.target_power < 0 or np.any(cp < 0):
            raise ValueError("radar powers must be nonnegative")
        object.__setattr__(self, "target_angles", np.asarray(self.target_angles, dtype=float))
        object.__setattr__(self, "clutter_angles", ca)
        object.__setattr__(self, "clutter_powers", cp)

    @property
    def Q(self) -> int:
        return self.clutter_angles.shape[0]

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength

    def target_steering(self, positions) -> np.ndarray:
        return steering_vector(self.target_angles, positions, self.wavelength)

    def clutter_steering(self, positions) -> np.ndarray:
        """Clutter steering vectors as columns, shape ``(N, Q)``."""
        return field_response_matrix(positions, self.clutter_angles, self.wavelength).T

    def response(self, q: int, r, t) -> np.ndarray:
        """Response matrix of the target (``q = 0``) or clutter ``q`` (1-based)."""
        angles = self.target_angles if q == 0 else self.clutter_angles[q - 1]
        return radar_response_matrix(angles, r, t, self.wavelength)


@dataclass(frozen=True)
class ChannelState:
    """One channel realization; position-dependent parts are evaluated on demand."""

    wavelength: float
    bs_angles: np.ndarray  # (L, 2) departure angles at the BS
    ris_angles: np.ndarray  # (L, 2) arrival angles at the RIS
    ris_positions: np.ndarray  # (M, 2)
    prm: np.ndarray  # (L,) BS->RIS path responses
    F: np.ndarray  # (L, M) RIS field responses for the BS link
    user_positions: np.ndarray  # (K, 2)
    user_angles: np.ndarray  # (K, L, 2) departure angles at the RIS toward users
    user_prm: np.ndarray  # (K, L)
    h: np.ndarray  # (K, M) RIS->user channels
    noise: np.ndarray  # (K,) user noise powers
    radar: RadarGeometry
    radar_noise: float

    @property
    def K(self) -> int:
        return self.h.shape[0]

    @property
    def M(self) -> int:
        return self.h.shape[1]

    @property
    def L(self) -> int:
        return self.prm.size

    def G(self, t) -> np.ndarray:
        """Transmit field-response matrix ``(L, N)`` at positions ``t``."""
        return field_response_matrix(t, self.bs_angles, self.wavelength)

    def H(self, t) -> np.ndarray:
        """BS->RIS channel ``(M, N)`` at transmit positions ``t``."""
        return assemble_bs_ris_channel(self.G(t), self.F, self.prm)


def draw_path_gains(rng: np.random.Generator, size, power: float, paths: int) -> np.ndarray:
    """Circularly-symmetric Gaussian path responses with variance ``power / paths``."""
    scale = np.sqrt(power / paths / 2)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def _uniform_angles(rng, shape):
    return rng.uniform(0.0, np.pi, size=shape + (2,))


def sample_channels(seed, config: ScenarioConfig) -> ChannelState:
    """Draw a channel realization; identical seeds give identical states."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    geo = config.geometry
    lam, L, K, M = config.wavelength, config.paths, config.users, config.ris_elements

    radius = geo.user_radius * np.sqrt(rng.uniform(size=K))
    phase = rng.uniform(0.0, 2 * np.pi, size=K)
    users = np.asarray(geo.user_center) + np.stack(
        [radius * np.cos(phase), radius * np.sin(phase)], axis=1
    )

    ris_pos = planar_grid(M, lam / 2)
    bs_angles = _uniform_angles(rng, (L,))
    ris_angles = _uniform_angles(rng, (L,))
    d_br = float(np.hypot(*np.subtract(geo.ris, geo.bs)))
    prm = draw_path_gains(rng, L, geo.path_loss(d_br, geo.exponent_bs_ris), L)
    F = field_response_matrix(ris_pos, ris_angles, lam)

    user_angles = _uniform_angles(rng, (K, L))
    user_prm = np.empty((K, L), dtype=complex)
    h = np.empty((K, M), dtype=complex)
    for k in range(K):
        d_k = float(np.hypot(*(users[k] - np.asarray(geo.ris))))
        user_prm[k] = draw_path_gains(rng, L, geo.path_loss(d_k, geo.exponent_ris_user), L)
        h[k] = user_channel(user_prm[k], field_response_matrix(ris_pos, user_angles[k], lam))

    radar = RadarGeometry(
        target_angles=np.asarray(config.target_angles),
        clutter_angles=np.asarray(config.clutter_angles).reshape(-1, 2),
        target_power=config.target_power,
        clutter_powers=config.clutter_powers,
        wavelength=lam,
    )
    return ChannelState(
        wavelength=lam,
        bs_angles=bs_angles,
        ris_angles=ris_angles,
        ris_positions=ris_pos,
        prm=prm,
        F=F,
        user_positions=users,
        user_angles=user_angles,
        user_prm=user_prm,
        h=h,
        noise=np.full(K, config.noise),
        radar=radar,
        radar_noise=config.radar_noise,
    )
