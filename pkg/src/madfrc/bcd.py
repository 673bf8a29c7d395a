"""Block coordinate ascent over (Lambda, W, v, t, r)."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .antenna import update_rx_positions, update_tx_positions
from .beamforming import (
    comm_feasible,
    effective_channels,
    matched_beamformer,
    minimize_power,
    update_beamforming,
    zero_forcing_beamformer,
)
from .config import BcdConfig, ScenarioConfig
from .geometry import ChannelState, planar_grid
from .metrics import DesignVariables, comm_sinr, fp_objective, optimal_lambda, radar_sinr
from .ris import RisResult, update_ris

__all__ = [
    "InfeasibleError",
    "BlockPlan",
    "PassRecord",
    "BcdResult",
    "random_phases",
    "repair_beamformer",
    "zf_power",
    "descend_zf_power",
    "initialize",
    "run",
]


class InfeasibleError(RuntimeError):
    """No QoS-feasible starting point was found for a channel realization."""


@dataclass(frozen=True)
class BlockPlan:
    """Which blocks move. ``positions`` replaces the continuous position
    updates when given: it maps ``(state, channel)`` to new ``(t, r)``."""

    ris: bool = True
    tx: bool = True
    rx: bool = True
    positions: Callable | None = None


@dataclass
class PassRecord:
    index: int
    objective: float  # FP surrogate at the end of the pass
    radar_sinr: float
    min_qos_margin: float  # min_k Gamma_k / gamma_k
    modulus_violation: float
    statuses: dict = field(default_factory=dict)
    seconds: float = 0.0


@dataclass
class BcdResult:
    state: DesignVariables
    trace: list[PassRecord]
    status: str  # "converged" | "max_outer" | "stalled"
    ris_updates: list[RisResult]

    @property
    def passes(self) -> int:
        return len(self.trace) - 1

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def random_phases(M: int, rng: np.random.Generator) -> np.ndarray:
    return np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=M))


def _qos_vec(scenario: ScenarioConfig, K: int) -> np.ndarray:
    return np.full(K, float(scenario.qos))


def repair_beamformer(v, t, channel: ChannelState, scenario: ScenarioConfig, max_iter: int = 30):
    """QoS-feasible precoder at full power for fixed ``v`` and ``t``, or ``None``.

    Tries matched beams first, then zero forcing followed by SCA power
    minimization. Any feasible result is scaled up to the power budget, which
    can only raise every user's SINR.
    """
    K = channel.K
    qos = _qos_vec(scenario, K)
    P = scenario.power
    e = effective_channels(v, channel.H(t), channel.h)
    W = matched_beamformer(e, P)
    if comm_feasible(W, v, t, channel, qos, P):
        return W, W
    Z = zero_forcing_beamformer(e, qos, channel.noise)
    if Z is None:
        return None, W
    if np.vdot(Z, Z).real > P:
        Z, _ = minimize_power(Z, e, qos, channel.noise, max_iter=max_iter)
    Z = Z * np.sqrt(P / np.vdot(Z, Z).real)
    if comm_feasible(Z, v, t, channel, qos, P):
        return Z, Z
    return None, Z


def zf_power(v, H, channel: ChannelState, qos) -> float:
    """Transmit power of the zero-forcing precoder that meets every SINR target exactly."""
    e = effective_channels(v, H, channel.h)
    if np.linalg.matrix_rank(e) < e.shape[0]:
        return np.inf
    Z = np.linalg.pinv(e)
    return float(np.sum(np.asarray(qos) * channel.noise * np.sum(np.abs(Z) ** 2, axis=0)))


def descend_zf_power(v, t, channel: ChannelState, scenario: ScenarioConfig, levels: int = 16,
                     sweeps: int = 10):
    """Element-wise phase search lowering the zero-forcing power at transmit layout ``t``.

    Each element in turn takes the best of ``levels`` equally spaced phases with
    the others fixed. Stops early once the power fits the budget.
    """
    H = channel.H(t)
    qos = _qos_vec(scenario, channel.K)
    v = np.array(v, dtype=complex)
    grid = np.exp(2j * np.pi * np.arange(levels) / levels)
    best = zf_power(v, H, channel, qos)
    for _ in range(sweeps):
        start = best
        for m in range(v.size):
            keep = v[m]
            for phase in grid:
                v[m] = phase
                val = zf_power(v, H, channel, qos)
                if val < best:
                    best, keep = val, phase
            v[m] = keep
        if best <= scenario.power or best >= start * (1 - 1e-3):
            break
    return v, best


def initialize(channel: ChannelState, scenario: ScenarioConfig, bcd: BcdConfig,
               rng: np.random.Generator, t=None, r=None, v=None, adapt_ris: bool = True,
               repair_rounds: int = 6) -> DesignVariables:
    """Feasible starting point.

    Positions default to the half-wavelength planar array; ``v`` defaults to
    random phases. When no feasible precoder exists for the drawn phases and
    ``adapt_ris`` is set, the phases are first moved by an element-wise search
    that lowers the zero-forcing power, then RIS max-min updates alternate
    with the precoder repair for up to ``repair_rounds`` rounds.
    """
    N = scenario.antennas
    grid = planar_grid(N, scenario.wavelength / 2)
    t = grid.copy() if t is None else np.asarray(t, dtype=float)
    r = grid.copy() if r is None else np.asarray(r, dtype=float)
    v = random_phases(channel.M, rng) if v is None else np.asarray(v, dtype=complex)

    W, direction = repair_beamformer(v, t, channel, scenario, bcd.init_max_iter)
    if W is None and adapt_ris:
        v, _ = descend_zf_power(v, t, channel, scenario)
        W, direction = repair_beamformer(v, t, channel, scenario, bcd.init_max_iter)
    rounds = repair_rounds if adapt_ris else 0
    for _ in range(rounds):
        if W is not None:
            break
        probe = DesignVariables(direction, v, t, r, np.zeros_like(direction))
        res = update_ris(probe, channel, bcd.penalty)
        if res.status != "updated":
            break
        v = res.v
        W, direction = repair_beamformer(v, t, channel, scenario, bcd.init_max_iter)
    if W is None:
        raise InfeasibleError("QoS targets cannot be met at the initial point")
    lam = optimal_lambda(W, r, t, channel.radar, channel.radar_noise)
    return DesignVariables(W, v, t, r, lam)


def _record(index, state, channel, scenario, statuses, seconds) -> PassRecord:
    radar, noise = channel.radar, channel.radar_noise
    sinr = comm_sinr(state.W, state.v, channel.H(state.t), channel.h, channel.noise)
    return PassRecord(
        index=index,
        objective=fp_objective(state.W, state.r, state.t, state.lam, radar, noise),
        radar_sinr=radar_sinr(state.W, state.r, state.t, radar, noise),
        min_qos_margin=float(np.min(sinr / scenario.qos)),
        modulus_violation=float(np.max(np.abs(np.abs(state.v) - 1.0))),
        statuses=statuses,
        seconds=seconds,
    )


def run(channel: ChannelState, scenario: ScenarioConfig, bcd: BcdConfig,
        state: DesignVariables, plan: BlockPlan = BlockPlan()) -> BcdResult:
    """Cycle Lambda -> W -> v -> t -> r until the surrogate stops improving."""
    state = state.copy()
    radar, noise = channel.radar, channel.radar_noise
    qos = _qos_vec(scenario, channel.K)
    trace = [_record(0, state, channel, scenario, {}, 0.0)]
    ris_updates: list[RisResult] = []
    status = "max_outer"
    idle = 0
    for index in range(1, bcd.max_outer + 1):
        start = time.perf_counter()
        statuses = {}
        for round_ in range(bcd.link_rounds):
            state.lam = optimal_lambda(state.W, state.r, state.t, radar, noise)
            before = fp_objective(state.W, state.r, state.t, state.lam, radar, noise)
            res_w = update_beamforming(state, channel, qos, scenario.power,
                                       bcd.w_max_inner, bcd.w_inner_tol)
            state.W = res_w.W
            if round_ == 0:
                statuses["W"] = res_w.status
            if plan.ris:
                res_v = update_ris(state, channel, bcd.penalty)
                ris_updates.append(res_v)
                state.v = res_v.v
                if round_ == 0 or res_v.status == "updated":
                    statuses["v"] = res_v.status
            after = fp_objective(state.W, state.r, state.t, state.lam, radar, noise)
            if not plan.ris or after - before <= bcd.link_tol * abs(before):
                break

        tol = bcd.pos_tol * scenario.wavelength
        if plan.positions is not None:
            state.t, state.r, statuses["positions"] = plan.positions(state, channel)
        else:
            if plan.tx:
                res_t = update_tx_positions(state, channel, qos, scenario.A, scenario.D,
                                            bcd.pos_max_inner, tol, bcd.pos_curvature_start)
                state.t = res_t.pos
                statuses["t"] = res_t.status
            if plan.rx:
                res_r = update_rx_positions(state, channel, scenario.A, scenario.D,
                                            bcd.pos_max_inner, tol, bcd.rx_adapt_filter)
                state.r = res_r.pos
                statuses["r"] = res_r.status
                if bcd.rx_adapt_filter:
                    state.lam = optimal_lambda(state.W, state.r, state.t, radar, noise)

        rec = _record(index, state, channel, scenario, statuses, time.perf_counter() - start)
        trace.append(rec)
        prev = trace[-2].objective
        if abs(rec.objective - prev) <= bcd.outer_tol * max(abs(prev), 1e-300):
            status = "converged"
            break
        blocked = all(s in ("infeasible", "skipped") for s in statuses.values())
        idle = idle + 1 if blocked else 0
        if idle >= 2:
            status = "stalled"
            break
    return BcdResult(state, trace, status, ris_updates)
