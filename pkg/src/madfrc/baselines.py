"""Comparison schemes built from the same initialization and block updates."""

from __future__ import annotations

import enum
from functools import partial

import numpy as np

from .bcd import BcdResult, BlockPlan, initialize, random_phases, run
from .config import BcdConfig, ScenarioConfig
from .geometry import ChannelState, planar_grid
from .metrics import DesignVariables, comm_sinr, fp_objective, optimal_lambda, radar_sinr

__all__ = [
    "SchemeTag",
    "fpa_layout",
    "rpa_layout",
    "random_ris",
    "grid_sites",
    "gas_initial_layout",
    "gas_positions",
    "run_scheme",
]


class SchemeTag(str, enum.Enum):
    PROPOSED = "proposed"
    FPA = "fpa"
    RPA = "rpa"
    RANDOM_RIS = "random_ris"
    GAS = "gas"


def fpa_layout(N: int, wavelength: float, region: float | None = None):
    """Half-wavelength planar array centered in the region, for both sides."""
    grid = planar_grid(N, wavelength / 2)
    if region is not None and np.max(np.abs(grid)) > region / 2 + 1e-12:
        raise ValueError(f"{N}-element half-wavelength grid does not fit in a {region} m region")
    return grid.copy(), grid.copy()


def _rejection_layout(N, region, D, rng, max_rejections):
    half = region / 2
    pts = np.empty((0, 2))
    rejections = 0
    while pts.shape[0] < N:
        cand = rng.uniform(-half, half, size=2)
        if pts.shape[0] == 0 or np.min(np.linalg.norm(pts - cand, axis=1)) >= D:
            pts = np.vstack([pts, cand])
            continue
        rejections += 1
        if rejections >= max_rejections:
            raise ValueError("could not place antennas at the minimum spacing; region too tight")
    return pts


def rpa_layout(N: int, region: float, D: float, rng: np.random.Generator,
               max_rejections: int = 10_000):
    """Uniformly random transmit and receive layouts with pairwise spacing at least ``D``."""
    t = _rejection_layout(N, region, D, rng, max_rejections)
    r = _rejection_layout(N, region, D, rng, max_rejections)
    return t, r


def random_ris(M: int, rng: np.random.Generator) -> np.ndarray:
    return random_phases(M, rng)


def grid_sites(region: float, spacing: float) -> np.ndarray:
    """Lattice of candidate positions covering ``[-region/2, region/2]^2`` including its edges."""
    count = int(np.floor(region / spacing + 1e-9)) + 1
    axis = (np.arange(count) - (count - 1) / 2) * spacing
    return np.array([(x, y) for y in axis for x in axis])


def gas_initial_layout(N: int, sites: np.ndarray, D: float) -> np.ndarray:
    """The ``N`` sites closest to the center that respect the spacing."""
    order = np.lexsort((sites[:, 0], sites[:, 1], np.round(np.hypot(*sites.T), 12)))
    chosen = []
    for i in order:
        if all(np.linalg.norm(sites[i] - sites[j]) >= D - 1e-12 for j in chosen):
            chosen.append(i)
        if len(chosen) == N:
            return sites[chosen].copy()
    raise ValueError("fewer feasible grid sites than antennas")


def _greedy_side(pos, sites, D, score, feasible=None):
    pos = pos.copy()
    best_val = score(pos)
    for n in range(pos.shape[0]):
        others = np.delete(pos, n, axis=0)
        for s in sites:
            if others.size and np.min(np.linalg.norm(others - s, axis=1)) < D - 1e-12:
                continue
            trial = pos.copy()
            trial[n] = s
            if feasible is not None and not feasible(trial):
                continue
            val = score(trial)
            if val > best_val:
                best_val, pos = val, trial
    return pos


def gas_positions(state: DesignVariables, channel: ChannelState, scenario: ScenarioConfig,
                  sites: np.ndarray, adapt_filter: bool = True):
    """One greedy sweep over grid sites for every transmit, then every receive antenna.

    Each antenna in turn moves to the vacant site with the highest surrogate
    value, provided spacing (and, on the transmit side, QoS) still holds.
    Returns ``(t, r, status)``.
    """
    radar, noise = channel.radar, channel.radar_noise
    D = scenario.D
    qos = scenario.qos

    def tx_score(t):
        return fp_objective(state.W, state.r, t, state.lam, radar, noise)

    def tx_ok(t):
        sinr = comm_sinr(state.W, state.v, channel.H(t), channel.h, channel.noise)
        return bool(np.all(sinr >= qos * (1 - 1e-9)))

    t = _greedy_side(state.t, sites, D, tx_score, tx_ok)

    if adapt_filter:
        def rx_score(r):
            return radar_sinr(state.W, r, t, radar, noise)
    else:
        def rx_score(r):
            return fp_objective(state.W, r, t, state.lam, radar, noise)

    r = _greedy_side(state.r, sites, D, rx_score)
    moved = not (np.array_equal(t, state.t) and np.array_equal(r, state.r))
    if adapt_filter:
        state.lam = optimal_lambda(state.W, r, t, radar, noise)
    return t, r, "updated" if moved else "unchanged"


def run_scheme(scheme: SchemeTag | str, channel: ChannelState, scenario: ScenarioConfig,
               bcd: BcdConfig, seed: int) -> BcdResult:
    """Initialize and run one scheme on one channel realization.

    ``seed`` selects the initialization stream ``[seed, 1]`` and the layout
    stream ``[seed, 2]``. Raises :class:`~madfrc.bcd.InfeasibleError` when no
    QoS-feasible start exists.
    """
    scheme = SchemeTag(scheme)
    init_rng = np.random.default_rng([seed, 1])
    layout_rng = np.random.default_rng([seed, 2])
    N, lam = scenario.antennas, scenario.wavelength

    if scheme is SchemeTag.PROPOSED:
        state = initialize(channel, scenario, bcd, init_rng)
        return run(channel, scenario, bcd, state, BlockPlan())
    if scheme is SchemeTag.FPA:
        t, r = fpa_layout(N, lam, scenario.A)
        state = initialize(channel, scenario, bcd, init_rng, t=t, r=r)
        return run(channel, scenario, bcd, state, BlockPlan(tx=False, rx=False))
    if scheme is SchemeTag.RPA:
        t, r = rpa_layout(N, scenario.A, scenario.D, layout_rng)
        state = initialize(channel, scenario, bcd, init_rng, t=t, r=r)
        return run(channel, scenario, bcd, state, BlockPlan(tx=False, rx=False))
    if scheme is SchemeTag.RANDOM_RIS:
        v = random_ris(channel.M, init_rng)
        state = initialize(channel, scenario, bcd, init_rng, v=v, adapt_ris=False)
        return run(channel, scenario, bcd, state, BlockPlan(ris=False))
    sites = grid_sites(scenario.A, lam / 2)
    if sites.shape[0] < N:
        raise ValueError("fewer grid sites than antennas")
    start = gas_initial_layout(N, sites, scenario.D)
    state = initialize(channel, scenario, bcd, init_rng, t=start, r=start.copy())
    step = partial(gas_positions, scenario=scenario, sites=sites, adapt_filter=bcd.rx_adapt_filter)
    return run(channel, scenario, bcd, state, BlockPlan(positions=step))
