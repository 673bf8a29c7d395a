"""RIS block: max-min SINR over the reflection coefficients with a penalty loop.

Inside this module the optimization variable is ``x = conj(v)``, which turns
every link gain into an inner product: ``h_k^H diag(v) H w_j = x^H g_kj``
with ``g_kj = conj(h_k) * (H w_j)``. Slack variables are normalized by the
user noise power, so ``z_k`` here means interference-plus-noise over noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import convex
from .config import PenaltyConfig
from .geometry import ChannelState
from .metrics import DesignVariables, comm_sinr

__all__ = [
    "ris_gain_vectors",
    "build_ris_quadratics",
    "bilinear_upper_bound",
    "penalty_lower_bound",
    "slack_init",
    "InnerStep",
    "ris_inner_step",
    "RisResult",
    "update_ris",
    "project_unit_modulus",
]


def ris_gain_vectors(H, h, W) -> np.ndarray:
    """``g[k, j] = conj(h_k) * (H w_j)``, shape ``(K, K, M)``; gain is ``v @ g[k, j]``."""
    HW = np.asarray(H) @ np.asarray(W)  # (M, K)
    return np.asarray(h).conj()[:, None, :] * HW.T[None, :, :]


def build_ris_quadratics(H, h, W):
    """Gain vectors and their rank-one Gram matrices ``g g^H`` of shape ``(K, K, M, M)``."""
    g = ris_gain_vectors(H, h, W)
    return g, np.einsum("kjm,kjn->kjmn", g, g.conj())


def bilinear_upper_bound(eta, z, eta_l, z_l):
    """Convex upper bound of ``eta * z``, tight at ``(eta_l, z_l)``."""
    if np.any(np.asarray(eta_l) <= 0) or np.any(np.asarray(z_l) <= 0):
        raise ValueError("expansion point of the bilinear bound must be positive")
    return 0.5 * (z_l / eta_l * np.square(eta) + eta_l / z_l * np.square(z))


def penalty_lower_bound(x, x_l) -> float:
    """Linear minorant ``2 Re(x_l^H x) - ||x_l||^2`` of ``||x||^2``."""
    return float(2 * np.vdot(x_l, x).real - np.vdot(x_l, x_l).real)


def _gains(x, g) -> np.ndarray:
    return np.abs(np.einsum("m,kjm->kj", np.conj(x), g)) ** 2


def slack_init(x, g, noise):
    """Tight slack values at ``x``: ``(min SINR, normalized interference-plus-noise)``."""
    p = _gains(x, g)
    sig = np.diag(p)
    z = (p.sum(axis=1) - sig + noise) / noise
    return float(np.min(sig / noise / z)), z


@dataclass
class InnerStep:
    x: np.ndarray
    eta: float
    z: np.ndarray
    status: str


def ris_inner_step(x_l, eta_l, z_l, g, noise, rho: float) -> InnerStep:
    """One convexified max-min step around ``(x_l, eta_l, z_l)``."""
    x_l = np.asarray(x_l, dtype=complex)
    noise = np.asarray(noise, dtype=float)
    K, _, M = g.shape
    vm = convex.VariableMap().add_complex("x", M).add_real("eta", 1).add_real("z", K)
    xs, es, zs = vm.slice("x"), vm.slice("eta").start, vm.slice("z")

    obj = vm.linear("eta", [1.0]) + rho * 2 * vm.linear("x", x_l)
    const = -rho * np.vdot(x_l, x_l).real - rho * M
    p = convex.ConvexQCQP(vm.n, obj_lin=obj, obj_const=const)

    for k in range(K):
        gk = g[k] / np.sqrt(noise[k])
        interf = sum(np.outer(gk[j], gk[j].conj()) for j in range(K) if j != k)
        lin = -vm.linear("z", np.eye(K)[k])
        if K > 1:
            p.add_constraint(vm.quad("x", interf), lin, 1.0)
        else:
            p.add_linear(lin, 1.0)

        Hkk = np.outer(gk[k], gk[k].conj())
        P = np.zeros((vm.n, vm.n))
        P[es, es] = 0.5 * z_l[k] / eta_l
        P[zs.start + k, zs.start + k] = 0.5 * eta_l / z_l[k]
        q = -2 * vm.linear("x", Hkk @ x_l)
        p.add_constraint(P, q, float(np.vdot(x_l, Hkk @ x_l).real))

    for m in range(M):
        P = np.zeros((vm.n, vm.n))
        P[xs.start + 2 * m, xs.start + 2 * m] = 1.0
        P[xs.start + 2 * m + 1, xs.start + 2 * m + 1] = 1.0
        p.add_constraint(P, None, -1.0)

    x0 = vm.pack(x=x_l, eta=[eta_l], z=z_l)
    rep = convex.solve(p, x0=x0)
    if rep.status == "infeasible":
        return InnerStep(x_l, eta_l, np.asarray(z_l), "infeasible")
    out = vm.unpack(rep.x)
    return InnerStep(out["x"], float(out["eta"][0]), out["z"], rep.status)


def project_unit_modulus(v, fallback) -> np.ndarray:
    """Elementwise ``v / |v|``; zero entries keep the phase of ``fallback``."""
    v = np.asarray(v, dtype=complex)
    mag = np.abs(v)
    out = np.where(mag > 0, v / np.where(mag > 0, mag, 1.0), np.exp(1j * np.angle(fallback)))
    # the division leaves |out| a couple of ulps off; pick the neighbouring
    # float pair whose modulus is closest to one
    err = np.abs(np.abs(out) - 1)
    best = out
    re, im = out.real, out.imag
    for dr in (-np.inf, None, np.inf):
        for di in (-np.inf, None, np.inf):
            cand = ((re if dr is None else np.nextafter(re, dr))
                    + 1j * (im if di is None else np.nextafter(im, di)))
            e = np.abs(np.abs(cand) - 1)
            better = e < err
            best = np.where(better, cand, best)
            err = np.where(better, e, err)
    return best


@dataclass
class RisResult:
    v: np.ndarray
    status: str  # "updated" | "unchanged" | "infeasible"
    norm_sq: float  # ||v||^2 before the final projection
    outer: int
    inner: int
    eta: float
    min_sinr_before: float
    min_sinr_after: float


def update_ris(state: DesignVariables, channel: ChannelState,
               penalty: PenaltyConfig = PenaltyConfig()) -> RisResult:
    """Penalty loop over the RIS phases; keeps the input if min-user SINR would drop."""
    v_in = np.asarray(state.v, dtype=complex)
    H = channel.H(state.t)
    noise = np.asarray(channel.noise, dtype=float)
    g = ris_gain_vectors(H, channel.h, state.W)
    M = v_in.size

    def min_sinr(v):
        return float(np.min(comm_sinr(state.W, v, H, channel.h, noise)))

    before = min_sinr(v_in)
    x = v_in.conj()
    rho = penalty.rho_init_fraction * M
    eta = before
    inner_total = outer = 0
    flagged = False
    for outer in range(1, penalty.max_outer + 1):
        for _ in range(penalty.max_inner):
            eta_l, z_l = slack_init(x, g, noise)
            if not eta_l > 0:
                flagged = True
                break
            step = ris_inner_step(x, eta_l, z_l, g, noise, rho)
            inner_total += 1
            if step.status == "infeasible":
                flagged = True
                break
            moved = float(np.vdot(step.x - x, step.x - x).real)
            x, eta = step.x, step.eta
            if moved <= penalty.xi1:
                break
        if flagged or np.vdot(x, x).real >= M - penalty.xi2:
            break
        rho *= penalty.tau

    norm_sq = float(np.vdot(x, x).real)
    v_out = project_unit_modulus(x.conj(), v_in)
    after = min_sinr(v_out)
    if flagged and inner_total <= 1:
        return RisResult(v_in, "infeasible", norm_sq, outer, inner_total, eta, before, before)
    if after < before:
        return RisResult(v_in, "unchanged", norm_sq, outer, inner_total, eta, before, before)
    return RisResult(v_out, "updated", norm_sq, outer, inner_total, eta, before, after)
