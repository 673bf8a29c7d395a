"""Beamforming block: SCA over the transmit precoder with the auxiliary matrix fixed."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import convex
from .geometry import ChannelState
from .metrics import DesignVariables, comm_sinr, fp_objective

__all__ = [
    "effective_channels",
    "effective_gram",
    "signal_lower_bound",
    "sca_qos_constraint",
    "objective_terms",
    "BeamformingResult",
    "update_beamforming",
    "matched_beamformer",
    "zero_forcing_beamformer",
    "minimize_power",
]


def _vec(W) -> np.ndarray:
    """Column-major stacking ``[w_1; w_2; ...]``."""
    return np.asarray(W).ravel(order="F")


def _unvec(z, N: int, K: int) -> np.ndarray:
    return np.asarray(z).reshape((N, K), order="F")


def effective_channels(v, H, h) -> np.ndarray:
    """Rows ``e_k = h_k^H diag(v) H`` so that the link gain is ``e_k w_j``, shape ``(K, N)``."""
    return (np.asarray(h).conj() * v) @ H


def effective_gram(e_k) -> np.ndarray:
    """Rank-one PSD matrix ``e_k^H e_k`` with ``w^H (.) w = |e_k w|^2``."""
    return np.outer(np.conj(e_k), e_k)


def signal_lower_bound(w, w_l, Ht) -> float:
    """First-order under-estimator of ``w^H Ht w`` expanded at ``w_l``."""
    return float(2 * np.vdot(w_l, Ht @ w).real - np.vdot(w_l, Ht @ w_l).real)


def sca_qos_constraint(k: int, W_l, Ht, qos: float, noise: float):
    """Lifted ``(P, q, r)`` of the convexified QoS constraint of user ``k``.

    The constraint reads ``gamma (sum_{j != k} w_j^H Ht w_j + noise) - [2 Re(w_k^(l)H Ht w_k)
    - w_k^(l)H Ht w_k^(l)] <= 0``, divided through by ``noise``, over the real
    lifting of the column-major vector of ``W``.
    """
    W_l = np.asarray(W_l)
    N, K = W_l.shape
    Ht = np.asarray(Ht) / noise
    blocks = np.zeros((K, N, N), dtype=complex)
    for j in range(K):
        if j != k:
            blocks[j] = qos * Ht
    Pc = np.zeros((N * K, N * K), dtype=complex)
    for j in range(K):
        Pc[j * N:(j + 1) * N, j * N:(j + 1) * N] = blocks[j]
    a = np.zeros(N * K, dtype=complex)
    a[k * N:(k + 1) * N] = Ht @ W_l[:, k]
    r = qos + np.vdot(W_l[:, k], Ht @ W_l[:, k]).real
    return convex.lift_hermitian(Pc), -2 * convex.lift_linear(a), float(r)


def objective_terms(lam, r, t, channel: ChannelState):
    """Linear vector ``A_0^H Lambda`` and quadratic ``C`` of the FP surrogate in ``W``.

    The surrogate equals ``zeta_0^2 (2 Re tr(W^H B) - sum_k w_k^H C w_k) - const``.
    """
    radar = channel.radar
    B = radar.response(0, r, t).conj().T @ lam
    N = lam.shape[0]
    C = np.zeros((N, N), dtype=complex)
    for q in range(1, radar.Q + 1):
        Bq = radar.response(q, r, t).conj().T @ lam
        C += radar.clutter_powers[q - 1] * (Bq @ Bq.conj().T)
    const = channel.radar_noise * np.vdot(lam, lam).real
    return B, 0.5 * (C + C.conj().T), const


@dataclass
class BeamformingResult:
    W: np.ndarray
    status: str  # "updated" | "unchanged" | "infeasible"
    iterations: int
    value: float


def _problem(W_l, e, B, C, qos, noise, power, with_power=True, objective="radar"):
    N, K = W_l.shape
    n = 2 * N * K
    if objective == "radar":
        Cbig = np.kron(np.eye(K), C)
        p = convex.ConvexQCQP(n, obj_quad=-convex.lift_hermitian(Cbig),
                              obj_lin=2 * convex.lift_linear(_vec(B)))
    else:
        p = convex.ConvexQCQP(n, obj_quad=-np.eye(n))
    for k in range(K):
        p.add_constraint(*sca_qos_constraint(k, W_l, effective_gram(e[k]), qos[k], noise[k]))
    if with_power:
        p.add_constraint(np.eye(n), None, -power)
    return p


def _feasible(W, e, qos, noise, power) -> bool:
    gains = np.abs(e @ W) ** 2
    sig = np.diag(gains)
    sinr = sig / (gains.sum(axis=1) - sig + noise)
    return bool(np.all(sinr >= qos * (1 - 1e-9)) and np.vdot(W, W).real <= power * (1 + 1e-9))


def update_beamforming(state: DesignVariables, channel: ChannelState, qos, power: float,
                       max_inner: int = 10, inner_tol: float = 1e-4) -> BeamformingResult:
    """Maximize the FP surrogate over ``W`` with ``Lambda``, ``v`` and positions fixed.

    Never returns a precoder with a smaller surrogate value than the input; if
    the first convexified problem is infeasible the input is returned with
    status ``"infeasible"``.
    """
    W_in = np.asarray(state.W)
    N, K = W_in.shape
    qos = np.broadcast_to(np.asarray(qos, dtype=float), (K,))
    noise = np.asarray(channel.noise, dtype=float)
    e = effective_channels(state.v, channel.H(state.t), channel.h)
    B, C, _ = objective_terms(state.lam, state.r, state.t, channel)
    radar = channel.radar

    def value(W):
        return fp_objective(W, state.r, state.t, state.lam, radar, channel.radar_noise)

    f_in = value(W_in)
    W_l, f_l = W_in, f_in
    it = 0
    for it in range(1, max_inner + 1):
        p = _problem(W_l, e, B, C, qos, noise, power)
        rep = convex.solve(p, x0=convex.lift(_vec(W_l)))
        if rep.status == "infeasible":
            if it == 1:
                warnings.warn("beamforming subproblem infeasible; keeping current precoder",
                              RuntimeWarning, stacklevel=2)
                return BeamformingResult(W_in, "infeasible", it, f_in)
            break
        W_new = _unvec(convex.unlift(rep.x), N, K)
        if not _feasible(W_new, e, qos, noise, power):
            break
        f_new = value(W_new)
        if f_new < f_l:
            break
        rel = abs(f_new - f_l) / max(abs(f_l), 1e-300)
        W_l, f_l = W_new, f_new
        if rel < inner_tol:
            break
    if W_l is W_in or f_l < f_in:
        return BeamformingResult(W_in, "unchanged", it, f_in)
    return BeamformingResult(W_l, "updated", it, f_l)


def matched_beamformer(e, power: float) -> np.ndarray:
    """Columns ``e_k^H`` scaled to total power ``power``."""
    W = np.asarray(e).conj().T.copy()
    norm = np.linalg.norm(W)
    if norm == 0:
        return W
    return W * np.sqrt(power) / norm


def zero_forcing_beamformer(e, qos, noise, margin: float = 1e-3) -> np.ndarray | None:
    """Interference-free precoder meeting every SINR target with a small margin.

    Returns ``None`` when the effective channel matrix is rank deficient.
    """
    e = np.asarray(e)
    K, N = e.shape
    if K > N or np.linalg.matrix_rank(e) < K:
        return None
    Z = np.linalg.pinv(e)  # (N, K), e @ Z = I
    return Z * np.sqrt(np.asarray(qos) * np.asarray(noise) * (1 + margin))


def minimize_power(W0, e, qos, noise, max_iter: int = 30, tol: float = 1e-4):
    """SCA power minimization under the QoS constraints from a QoS-feasible ``W0``.

    Returns ``(W, power)``; every iterate stays QoS feasible.
    """
    W_l = np.asarray(W0)
    N, K = W_l.shape
    P_l = np.vdot(W_l, W_l).real
    for _ in range(max_iter):
        p = _problem(W_l, e, None, None, qos, noise, None, with_power=False, objective="power")
        rep = convex.solve(p, x0=convex.lift(_vec(W_l)))
        if rep.status == "infeasible":
            break
        W_new = _unvec(convex.unlift(rep.x), N, K)
        if not _feasible(W_new, e, qos, noise, np.inf):
            break
        P_new = np.vdot(W_new, W_new).real
        if P_new > P_l:
            break
        done = (P_l - P_new) <= tol * P_l
        W_l, P_l = W_new, P_new
        if done:
            break
    return W_l, P_l


def comm_feasible(W, v, t, channel: ChannelState, qos, power, rel: float = 1e-9) -> bool:
    sinr = comm_sinr(W, v, channel.H(t), channel.h, channel.noise)
    return bool(np.all(sinr >= np.asarray(qos) * (1 - rel))
                and np.vdot(W, W).real <= power * (1 + rel))
