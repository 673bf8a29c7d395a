"""Communication and radar performance metrics.

The clutter-plus-noise covariance ``Xi + sigma_r^2 I`` is low rank plus a
scaled identity, so all solves against it go through a Woodbury form with a
Cholesky-factored ``Q x Q`` capacitance matrix. This keeps the radar SINR
accurate when clutter returns exceed the noise floor by many orders of
magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .geometry import ChannelState, RadarGeometry

__all__ = [
    "DesignVariables",
    "InterferenceCovariance",
    "link_gains",
    "comm_sinr",
    "clutter_weights",
    "clutter_covariance",
    "interference_covariance",
    "mvdr_filter",
    "filter_sinr",
    "radar_sinr",
    "fp_objective",
    "optimal_lambda",
    "qos_margins",
]


@dataclass
class DesignVariables:
    W: np.ndarray  # (N, K) beamformers
    v: np.ndarray  # (M,) RIS reflection coefficients
    t: np.ndarray  # (N, 2) transmit positions
    r: np.ndarray  # (N, 2) receive positions
    lam: np.ndarray  # (N, K) auxiliary variable of the quadratic transform

    def copy(self, **changes) -> "DesignVariables":
        out = replace(self, **changes)
        for name in ("W", "v", "t", "r", "lam"):
            if name not in changes:
                setattr(out, name, getattr(self, name).copy())
        return out


class InterferenceCovariance:
    """``noise * I + U diag(d) U^H`` with ``U`` of shape ``(N, Q)`` and ``d >= 0``."""

    def __init__(self, U, d, noise: float):
        if not noise > 0:
            raise ValueError("radar noise power must be positive")
        self.noise = float(noise)
        self.US = np.asarray(U) * np.sqrt(np.asarray(d, dtype=float))
        Q = self.US.shape[1]
        cap = self.noise * np.eye(Q) + self.US.conj().T @ self.US
        self._chol = cho_factor(cap, lower=True) if Q else None

    @property
    def N(self) -> int:
        return self.US.shape[0]

    def matrix(self) -> np.ndarray:
        return self.noise * np.eye(self.N) + self.US @ self.US.conj().T

    def solve(self, B) -> np.ndarray:
        B = np.asarray(B)
        if self._chol is None:
            return B / self.noise
        proj = self.US @ cho_solve(self._chol, self.US.conj().T @ B)
        return (B - proj) / self.noise

    def clutter_projection(self, B) -> np.ndarray:
        """``S U^H M^{-1} B`` with ``S = diag(sqrt(d))``, computed without cancellation."""
        B = np.asarray(B)
        if self._chol is None:
            return np.zeros((0,) + B.shape[1:], dtype=complex)
        return cho_solve(self._chol, self.US.conj().T @ B)

    def inverse_form(self, B) -> float:
        """``tr(B^H (noise I + Xi)^{-1} B)``."""
        B = np.asarray(B)
        total = np.vdot(B, B).real
        if self._chol is not None:
            y = solve_triangular(self._chol[0], self.US.conj().T @ B, lower=True)
            total -= np.vdot(y, y).real
        return total / self.noise

    def form(self, X) -> float:
        """``tr(X^H (noise I + Xi) X)``."""
        X = np.asarray(X)
        Y = self.US.conj().T @ X
        return self.noise * np.vdot(X, X).real + np.vdot(Y, Y).real


def link_gains(W, v, H, h) -> np.ndarray:
    """Matrix ``g[k, j] = h_k^H diag(v) H w_j``."""
    return (h.conj() * v) @ H @ W


def comm_sinr(W, v, H, h, noise) -> np.ndarray:
    """SINR of every user under beamformers ``W`` and RIS coefficients ``v``."""
    power = np.abs(link_gains(W, v, H, h)) ** 2
    signal = np.diag(power)
    interference = power.sum(axis=1) - signal
    return signal / (interference + np.asarray(noise))


def clutter_weights(W, t, radar: RadarGeometry) -> np.ndarray:
    """Per-clutter scalars ``zeta_q^2 ||W^H a_t^q||^2``."""
    At = radar.clutter_steering(t)
    return radar.clutter_powers * np.sum(np.abs(At.conj().T @ W) ** 2, axis=1)


def clutter_covariance(W, r, t, radar: RadarGeometry) -> np.ndarray:
    """Clutter covariance ``sum_q zeta_q^2 A_q W W^H A_q^H``."""
    Ar = radar.clutter_steering(r)
    d = clutter_weights(W, t, radar)
    return (Ar * d) @ Ar.conj().T


def interference_covariance(W, r, t, radar: RadarGeometry, noise: float) -> InterferenceCovariance:
    return InterferenceCovariance(radar.clutter_steering(r), clutter_weights(W, t, radar), noise)


def mvdr_filter(W, r, t, radar: RadarGeometry, noise: float, s=None) -> np.ndarray:
    """Receive filter ``(Xi + noise I)^{-1} A_0 W s`` (unit scaling constant).

    ``s`` defaults to the all-ones symbol vector.
    """
    W = np.asarray(W)
    s = np.ones(W.shape[1]) if s is None else np.asarray(s)
    cov = interference_covariance(W, r, t, radar, noise)
    return cov.solve(radar.response(0, r, t) @ (W @ s))


def filter_sinr(u, x, W, r, t, radar: RadarGeometry, noise: float) -> float:
    """Output SINR of receive filter ``u`` for transmitted snapshot ``x``."""
    cov = interference_covariance(W, r, t, radar, noise)
    num = radar.target_power * np.abs(np.vdot(u, radar.response(0, r, t) @ x)) ** 2
    return float(num / cov.form(u))


def radar_sinr(W, r, t, radar: RadarGeometry, noise: float) -> float:
    """Symbol-averaged radar SINR ``tr(Phi W W^H)``."""
    cov = interference_covariance(W, r, t, radar, noise)
    a_r = radar.target_steering(r)
    beam = np.sum(np.abs(radar.target_steering(t).conj() @ W) ** 2)
    return float(radar.target_power * cov.inverse_form(a_r) * beam)


def optimal_lambda(W, r, t, radar: RadarGeometry, noise: float) -> np.ndarray:
    """Maximizer ``(Xi + noise I)^{-1} A_0 W`` of the quadratic-transform objective."""
    cov = interference_covariance(W, r, t, radar, noise)
    a_r = radar.target_steering(r)
    return np.outer(cov.solve(a_r), radar.target_steering(t).conj() @ W)


def fp_objective(W, r, t, lam, radar: RadarGeometry, noise: float) -> float:
    """Quadratic-transform surrogate of the radar SINR for auxiliary ``lam``."""
    cov = interference_covariance(W, r, t, radar, noise)
    A0 = radar.response(0, r, t)
    linear = 2 * np.vdot(A0 @ W, lam).real
    return float(radar.target_power * (linear - cov.form(lam)))


def qos_margins(W, v, t, channel: ChannelState, qos) -> np.ndarray:
    """Per-user ratio ``Gamma_k / gamma_k``."""
    return comm_sinr(W, v, channel.H(t), channel.h, channel.noise) / np.asarray(qos)
