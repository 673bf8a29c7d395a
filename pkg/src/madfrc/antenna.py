"""Antenna-position blocks.

Positions enter the radar surrogate only through steering vectors and the
user links only through the transmit field-response matrix. Both are sums of
unit-modulus exponentials, so their Hessians admit position-independent
bounds; these give quadratic minorizers of the radar objective and
majorizers of the QoS functions that are solved as convex QCQPs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import convex
from .geometry import ChannelState, RadarGeometry, direction
from .metrics import DesignVariables, clutter_weights, interference_covariance, radar_sinr

__all__ = [
    "ObjectiveFactors",
    "transmit_factors",
    "receive_factors",
    "position_objective",
    "objective_gradient",
    "curvature_bound",
    "QosFunction",
    "qos_function",
    "min_distance_rows",
    "pairwise_distances",
    "PositionResult",
    "update_tx_positions",
    "update_rx_positions",
    "rx_sinr_gradient",
]

CURVATURE_FLOOR = 1e-12


@dataclass
class ObjectiveFactors:
    """``2 Re(b^H a_0(p)) - sum_q c_q a_q(p)^H D a_q(p)`` as a function of positions ``p``."""

    b: np.ndarray  # (N,)
    c: np.ndarray  # (Q,)
    S: np.ndarray  # (N, K) square-root factor, D = S S^H
    radar: RadarGeometry

    @property
    def D(self) -> np.ndarray:
        return self.S @ self.S.conj().T


def transmit_factors(W, lam, r, radar: RadarGeometry) -> ObjectiveFactors:
    z0 = radar.target_power
    b = z0 * W @ (lam.conj().T @ radar.target_steering(r))
    Ar = radar.clutter_steering(r)
    c = z0 * radar.clutter_powers * np.sum(np.abs(lam.conj().T @ Ar) ** 2, axis=0)
    return ObjectiveFactors(b, c, W, radar)


def receive_factors(W, lam, t, radar: RadarGeometry) -> ObjectiveFactors:
    z0 = radar.target_power
    b = z0 * lam @ (W.conj().T @ radar.target_steering(t))
    At = radar.clutter_steering(t)
    c = z0 * radar.clutter_powers * np.sum(np.abs(W.conj().T @ At) ** 2, axis=0)
    return ObjectiveFactors(b, c, lam, radar)


def _directions(f: ObjectiveFactors):
    return direction(f.radar.target_angles), direction(f.radar.clutter_angles).reshape(-1, 2)


def position_objective(pos, f: ObjectiveFactors) -> float:
    a0 = f.radar.target_steering(pos)
    Aq = f.radar.clutter_steering(pos)
    # quadratic forms through the factor avoid cancellation near clutter nulls
    clutter = np.sum(np.abs(f.S.conj().T @ Aq) ** 2, axis=0)
    return float(2 * np.vdot(f.b, a0).real - f.c @ clutter)


def objective_gradient(pos, f: ObjectiveFactors) -> np.ndarray:
    """Gradient with respect to the ``(N, 2)`` positions."""
    kappa = f.radar.wavenumber
    p0, pq = _directions(f)
    a0 = f.radar.target_steering(pos)
    grad = -2 * kappa * np.imag(f.b.conj() * a0)[:, None] * p0[None, :]
    Aq = f.radar.clutter_steering(pos)
    DA = f.S @ (f.S.conj().T @ Aq)
    w = np.imag(Aq.conj() * DA) * f.c  # (N, Q)
    grad -= 2 * kappa * w @ pq
    return grad


def curvature_bound(f: ObjectiveFactors) -> float:
    """Global bound on the Hessian spectral norm of :func:`position_objective`."""
    kappa = f.radar.wavenumber
    p0, pq = _directions(f)
    delta = 2 * kappa**2 * (p0 @ p0) * float(np.max(np.abs(f.b), initial=0.0))
    off = np.abs(f.D) - np.diag(np.abs(np.diag(f.D)))
    row = float(np.max(off.sum(axis=1), initial=0.0))
    delta += 4 * kappa**2 * row * float(np.sum(f.c * np.sum(pq**2, axis=1)))
    return max(delta, CURVATURE_FLOOR)


@dataclass
class QosFunction:
    """``f(t) = y(t)^H R y(t)`` with ``y_n(t) = sum_l alpha_l exp(-i kappa p_l . t_n)``.

    The QoS constraint of the user is ``f(t) + gamma * noise <= 0``.
    """

    alpha: np.ndarray  # (L,)
    R: np.ndarray  # (N, N) Hermitian
    dirs: np.ndarray  # (L, 2)
    wavenumber: float
    offset: float  # gamma * noise

    def _y(self, t):
        E = np.exp(-1j * self.wavenumber * (np.asarray(t) @ self.dirs.T))  # (N, L)
        return E, E @ self.alpha

    def value(self, t) -> float:
        _, y = self._y(t)
        return float(np.vdot(y, self.R @ y).real)

    def gradient(self, t) -> np.ndarray:
        E, y = self._y(t)
        d = -1j * self.wavenumber * (E * self.alpha) @ self.dirs  # (N, 2)
        return 2 * np.real(d.conj() * (self.R @ y)[:, None])

    def curvature(self) -> float:
        pmax2 = float(np.max(np.sum(self.dirs**2, axis=1)))
        s = float(np.sum(np.abs(self.alpha)))
        row = float(np.max(np.abs(self.R).sum(axis=1)))
        return max(4 * self.wavenumber**2 * pmax2 * s * s * row, CURVATURE_FLOOR)


def qos_function(k: int, W, v, channel: ChannelState, qos: float) -> QosFunction:
    alpha = channel.prm.conj() * (channel.F @ (channel.h[k] * np.conj(v)))
    K = W.shape[1]
    R = -np.outer(W[:, k], W[:, k].conj())
    for j in range(K):
        if j != k:
            R += qos * np.outer(W[:, j], W[:, j].conj())
    return QosFunction(alpha, 0.5 * (R + R.conj().T), direction(channel.bs_angles),
                       2 * np.pi / channel.wavelength, qos * float(channel.noise[k]))


def pairwise_distances(pos) -> np.ndarray:
    pos = np.asarray(pos)
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt(np.sum(diff**2, axis=-1))


def min_distance_rows(pos_l, D: float, rng=None):
    """Linearized separation constraints as rows ``(a, b)`` of ``a . vec(pos) + b <= 0``.

    Each pair gives ``||d_l||^2 - 2 d_l . (p_n - p_m) + D^2 <= 0`` where ``d_l`` is the
    expansion difference. Coincident expansion points are nudged apart first.
    """
    pos_l = np.array(pos_l, dtype=float)
    N = pos_l.shape[0]
    dist = pairwise_distances(pos_l) + np.eye(N)
    if np.any(dist == 0):
        warnings.warn("coincident antenna positions; perturbing expansion point",
                      RuntimeWarning, stacklevel=2)
        rng = np.random.default_rng(0) if rng is None else rng
        pos_l = pos_l + 1e-6 * rng.standard_normal(pos_l.shape) * max(D, 1e-12)
    rows = []
    for n in range(N):
        for m in range(n + 1, N):
            d = pos_l[n] - pos_l[m]
            a = np.zeros(2 * N)
            a[2 * n:2 * n + 2] = -2 * d
            a[2 * m:2 * m + 2] = 2 * d
            rows.append((a, float(d @ d + D * D)))
    return rows, pos_l


@dataclass
class PositionResult:
    pos: np.ndarray
    status: str  # "updated" | "unchanged" | "infeasible" | "skipped"
    iterations: int
    value: float


def _solve_positions(pos_in, value, gradient, delta: float, region: float, D: float, qos_fns,
                     max_inner: int, tol: float, adaptive: bool = False,
                     start_fraction: float = 1.0) -> PositionResult:
    """SCA with quadratic minorizers of the objective and majorizers of the QoS functions.

    ``delta`` and the QoS curvatures are certified global bounds; the first
    subproblem uses ``start_fraction`` of each. Every candidate is checked
    against the bound it relied on (objective at or above its minorizer, QoS
    at or below its majorizer) and the curvature of each failing term is
    doubled until the check holds, at most five doublings past the certified
    value. With ``adaptive`` the objective curvature is an uncertified guess:
    it may grow without that cap and is halved after each accepted step.
    """
    N = pos_in.shape[0]
    half = region / 2
    f_in = value(pos_in)
    pos_l, f_l = pos_in, f_in
    caps = np.array([delta] + [q.curvature() for q in qos_fns]) * 32
    cur = np.array([delta] + [q.curvature() for q in qos_fns]) * start_fraction
    if adaptive:
        cur[0], caps[0] = delta, np.inf
    status = "unchanged"
    it = 0
    for it in range(1, max_inner + 1):
        accepted = None
        grad = gradient(pos_l).ravel()
        while True:
            p = _position_problem(pos_l, f_l, grad, cur[0], qos_fns, cur[1:], half, D)
            rep = convex.solve(p, x0=pos_l.ravel())
            if rep.status == "infeasible":
                if it == 1:
                    return PositionResult(pos_in, "infeasible", it, f_in)
                break
            cand = rep.x.reshape(N, 2)
            fail = np.zeros(cur.size, dtype=bool)
            fail[0] = value(cand) < p.objective(rep.x) - 1e-9 * max(abs(f_l), 1e-300)
            for k, q in enumerate(qos_fns):
                fail[k + 1] = q.value(cand) + q.offset > 1e-9 * q.offset
            inside = bool(np.all(np.abs(cand) <= half * (1 + 1e-12)))
            inside &= bool(np.all(pairwise_distances(cand) + np.eye(N) * D >= D - 1e-9))
            if not fail.any() and inside:
                accepted = cand
                break
            if not fail.any() or np.any(cur[fail] * 2 > caps[fail]):
                break
            cur[fail] *= 2
        if accepted is None:
            break
        if adaptive:
            cur[0] /= 2
        f_new = value(accepted)
        if f_new < f_l:
            break
        step = float(np.max(np.linalg.norm(accepted - pos_l, axis=1)))
        pos_l, f_l = accepted, f_new
        status = "updated"
        if step < tol:
            break
    return PositionResult(pos_l if status == "updated" else pos_in, status, it, f_l)


def _position_problem(pos_l, f_l, g0, delta0, qos_fns, deltas, half, D):
    N = pos_l.shape[0]
    n = 2 * N
    x_l = pos_l.ravel()
    # maximize f(x_l) + g0 . (x - x_l) - delta0/2 ||x - x_l||^2
    p = convex.ConvexQCQP(
        n,
        obj_quad=-0.5 * delta0 * np.eye(n),
        obj_lin=g0 + delta0 * x_l,
        obj_const=f_l - g0 @ x_l - 0.5 * delta0 * (x_l @ x_l),
        lower=np.full(n, -half),
        upper=np.full(n, half),
    )
    for q, dk in zip(qos_fns, deltas):
        gk = q.gradient(pos_l).ravel()
        s = q.offset if q.offset > 0 else 1.0
        p.add_constraint(0.5 * dk / s * np.eye(n), (gk - dk * x_l) / s,
                         (q.value(pos_l) - gk @ x_l + 0.5 * dk * (x_l @ x_l)) / s + 1.0)
    rows, _ = min_distance_rows(pos_l, D)
    for a, b in rows:
        p.add_linear(a, b)
    return p


def update_tx_positions(state: DesignVariables, channel: ChannelState, qos, region: float,
                        D: float, max_inner: int = 15, tol: float = 1e-5,
                        start_fraction: float = 1.0) -> PositionResult:
    """SCA over the transmit positions under region, spacing and QoS constraints.

    ``tol`` is the largest per-antenna move (meters) below which the SCA stops.
    """
    W, K = state.W, state.W.shape[1]
    qos = np.broadcast_to(np.asarray(qos, dtype=float), (K,))
    fns = [qos_function(k, W, state.v, channel, qos[k]) for k in range(K)]
    f = transmit_factors(W, state.lam, state.r, channel.radar)
    if any(q.value(state.t) + q.offset > 1e-9 * q.offset for q in fns):
        return PositionResult(state.t, "skipped", 0, position_objective(state.t, f))
    return _solve_positions(np.asarray(state.t, dtype=float), lambda p: position_objective(p, f),
                            lambda p: objective_gradient(p, f), curvature_bound(f), region, D,
                            fns, max_inner, tol, start_fraction=start_fraction)


def update_rx_positions(state: DesignVariables, channel: ChannelState, region: float, D: float,
                        max_inner: int = 15, tol: float = 1e-5,
                        adapt_filter: bool = False) -> PositionResult:
    """SCA over the receive positions under region and spacing constraints.

    The default maximizes the surrogate with ``Lambda`` held fixed. With
    ``adapt_filter`` the auxiliary matrix is re-optimized along with the
    positions, so the objective becomes the radar SINR itself; this lets the
    receive array move when strong clutter pins a fixed filter's nulls.
    """
    r = np.asarray(state.r, dtype=float)
    if adapt_filter:
        radar, noise = channel.radar, channel.radar_noise
        value = lambda p: radar_sinr(state.W, p, state.t, radar, noise)  # noqa: E731
        grad = lambda p: rx_sinr_gradient(state.W, p, state.t, radar, noise)  # noqa: E731
        guess = radar.wavenumber**2 * max(value(r), 1e-300)
        return _solve_positions(r, value, grad, guess, region, D, [], max_inner, tol,
                                adaptive=True)
    f = receive_factors(state.W, state.lam, state.t, channel.radar)
    return _solve_positions(r, lambda p: position_objective(p, f),
                            lambda p: objective_gradient(p, f), curvature_bound(f), region, D,
                            [], max_inner, tol)


def rx_sinr_gradient(W, r, t, radar: RadarGeometry, noise: float) -> np.ndarray:
    """Gradient of the radar SINR with respect to the ``(N, 2)`` receive positions."""
    kappa = radar.wavenumber
    p0, pq = direction(radar.target_angles), direction(radar.clutter_angles).reshape(-1, 2)
    cov = interference_covariance(W, r, t, radar, noise)
    d = clutter_weights(W, t, radar)
    a0 = radar.target_steering(r)
    Aq = radar.clutter_steering(r)
    u = cov.solve(a0)
    scale = radar.target_power * np.sum(np.abs(radar.target_steering(t).conj() @ W) ** 2)
    grad = 2 * kappa * np.imag(a0.conj() * u)[:, None] * p0[None, :]
    # d_q a_q^H u, taken from the capacitance solve to keep its tiny value accurate
    weighted = np.sqrt(d) * cov.clutter_projection(a0)
    grad += 2 * kappa * np.imag(u.conj()[:, None] * Aq * weighted[None, :]) @ pq
    return scale * grad
