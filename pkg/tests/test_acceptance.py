"""Acceptance suite: one test per criterion, each recording a pass/fail line.

The lines are collected in ``conftest.ACCEPTANCE_LINES`` and printed in the
terminal summary. The sweep criteria share one session-scoped run per sweep.
"""

import time

import numpy as np
import pytest

from madfrc.antenna import (
    curvature_bound,
    min_distance_rows,
    objective_gradient,
    pairwise_distances,
    position_objective,
    qos_function,
    transmit_factors,
)
from madfrc.baselines import run_scheme
from madfrc.bcd import InfeasibleError
from madfrc.beamforming import effective_gram, signal_lower_bound
from madfrc.config import BcdConfig, ScenarioConfig
from madfrc.experiments import format_number, parse_spec, run_experiment, write_outputs
from madfrc.geometry import sample_channels
from madfrc.metrics import (
    comm_sinr,
    filter_sinr,
    fp_objective,
    mvdr_filter,
    optimal_lambda,
    radar_sinr,
)
from madfrc.ris import bilinear_upper_bound

from conftest import ACCEPTANCE_LINES, crandn, random_point, scattered, small_scenario

pytestmark = pytest.mark.slow

DESK = ScenarioConfig().desk()
LAM = DESK.wavelength


def report(n, ok, detail):
    ACCEPTANCE_LINES[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[n])
    return ok


def fd_gradient(fun, pos, h=1e-6 * LAM):
    g = np.zeros_like(pos)
    for idx in np.ndindex(pos.shape):
        up, dn = pos.copy(), pos.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (fun(up) - fun(dn)) / (2 * h)
    return g


def test_c01_fp_tightness():
    sc = small_scenario()
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        ch = sample_channels(np.random.default_rng([seed, 0]), sc)
        x = random_point(rng, ch, sc)
        truth = radar_sinr(x.W, x.r, x.t, ch.radar, ch.radar_noise)
        lam = optimal_lambda(x.W, x.r, x.t, ch.radar, ch.radar_noise)
        sur = fp_objective(x.W, x.r, x.t, lam, ch.radar, ch.radar_noise)
        worst = max(worst, abs(sur - truth) / truth)
    secs = time.perf_counter() - start
    ok = worst <= 1e-8 and secs < 10
    assert report(1, ok, f"max rel gap {worst:.2e} (<= 1e-8), {secs:.1f} s (< 10 s)")


def test_c02_mvdr_dominance():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    worst = np.inf
    for seed in range(20):
        # radar noise from the nominal floor up to clutter level, so that random
        # filters are competitive on part of the instances
        sc = small_scenario(radar_noise=10.0 ** rng.uniform(-11, 1))
        ch = sample_channels(np.random.default_rng([seed, 0]), sc)
        x = random_point(rng, ch, sc)
        s = np.ones(ch.K)
        snap = x.W @ s
        u = mvdr_filter(x.W, x.r, x.t, ch.radar, ch.radar_noise, s)
        ref = filter_sinr(u, snap, x.W, x.r, x.t, ch.radar, ch.radar_noise)
        G = crandn(rng, 1000, sc.antennas)
        G /= np.linalg.norm(G, axis=1, keepdims=True)
        best = max(filter_sinr(g, snap, x.W, x.r, x.t, ch.radar, ch.radar_noise) for g in G)
        worst = min(worst, (ref - best) / ref)
    secs = time.perf_counter() - start
    ok = worst >= -1e-9 and secs < 30
    assert report(2, ok, f"min relative margin {worst:.3e} (>= -1e-9), {secs:.1f} s (< 30 s)")


def _surrogate_checks(rng):
    """name -> (worst violation, worst gap at the expansion point), both relative."""
    out = {}
    n = 1000

    # precoder signal term: linearized |e^H w|^2 under-estimates
    viol = gap = 0.0
    for _ in range(n):
        e, w_l = crandn(rng, 4), crandn(rng, 4)
        w = crandn(rng, 4) * rng.uniform(0.1, 3)
        Ht = effective_gram(e)
        true = abs(e @ w) ** 2
        viol = max(viol, (signal_lower_bound(w, w_l, Ht) - true) / max(true, 1e-300))
        at = abs(e @ w_l) ** 2
        gap = max(gap, abs(signal_lower_bound(w_l, w_l, Ht) - at) / at)
    out["precoder signal minorant"] = (viol, gap)

    # RIS signal term: linearized x^H R x under-estimates
    viol = gap = 0.0
    for _ in range(n):
        g, x_l = crandn(rng, 16), crandn(rng, 16)
        x = crandn(rng, 16) * rng.uniform(0.1, 3)
        q = lambda y: abs(np.vdot(y, g)) ** 2  # noqa: E731
        lin = lambda y: 2 * (np.vdot(x_l, g) * np.vdot(g, y)).real - q(x_l)  # noqa: E731
        viol = max(viol, (lin(x) - q(x)) / max(q(x), 1e-300))
        gap = max(gap, abs(lin(x_l) - q(x_l)) / q(x_l))
    out["RIS signal minorant"] = (viol, gap)

    # bilinear slack product: upper bound over-estimates
    eta, z = rng.uniform(1e-3, 1e3, n), rng.uniform(1e-3, 1e3, n)
    eta_l, z_l = rng.uniform(1e-3, 1e3, n), rng.uniform(1e-3, 1e3, n)
    ub = bilinear_upper_bound(eta, z, eta_l, z_l)
    out["bilinear majorant"] = (float(np.max((eta * z - ub) / (eta * z))),
                                float(np.max(np.abs(bilinear_upper_bound(eta_l, z_l, eta_l, z_l)
                                                    - eta_l * z_l) / (eta_l * z_l))))

    # position terms, on random design points of the desk scenario
    viol_o = gap_o = viol_q = gap_q = viol_d = gap_d = 0.0
    per_point = 10
    for seed in range(n // per_point):
        ch = sample_channels(np.random.default_rng([seed, 0]), DESK)
        x = random_point(rng, ch, DESK)
        f = transmit_factors(x.W, x.lam, x.r, ch.radar)
        delta = curvature_bound(f)
        q = qos_function(seed % ch.K, x.W, x.v, ch, DESK.qos)
        dq = q.curvature()
        p_l = x.t
        fo, go = position_objective(p_l, f), objective_gradient(p_l, f).ravel()
        fq, gq = q.value(p_l), q.gradient(p_l).ravel()
        rows, _ = min_distance_rows(p_l, DESK.D)
        scale_o = max(abs(fo), np.abs(f.b).sum())
        scale_q = max(abs(fq), q.offset)
        for _ in range(per_point):
            p = scattered(rng, DESK.antennas, DESK.A, DESK.D) if rng.random() < 0.5 else \
                rng.uniform(-DESK.A / 2, DESK.A / 2, p_l.shape)
            d = (p - p_l).ravel()
            viol_o = max(viol_o, (fo + go @ d - 0.5 * delta * d @ d - position_objective(p, f))
                         / scale_o)
            viol_q = max(viol_q, (q.value(p) - (fq + gq @ d + 0.5 * dq * d @ d)) / scale_q)
            dist2 = pairwise_distances(p) ** 2
            iu = np.triu_indices(DESK.antennas, 1)
            for (a, b), true in zip(rows, dist2[iu]):
                lin = DESK.D ** 2 - (a @ p.ravel() + b)
                viol_d = max(viol_d, (lin - true) / DESK.D ** 2)
        gap_o = max(gap_o, abs(position_objective(p_l, f) - fo) / scale_o)
        gap_q = max(gap_q, abs(q.value(p_l) - fq) / scale_q)
        dl2 = pairwise_distances(p_l)[np.triu_indices(DESK.antennas, 1)] ** 2
        for (a, b), true in zip(rows, dl2):
            gap_d = max(gap_d, abs(DESK.D ** 2 - (a @ p_l.ravel() + b) - true) / true)
    out["position objective minorant"] = (viol_o, gap_o)
    out["QoS function majorant"] = (viol_q, gap_q)
    out["distance minorant"] = (viol_d, gap_d)
    return out


def test_c03_surrogate_bounds():
    start = time.perf_counter()
    checks = _surrogate_checks(np.random.default_rng(303))
    secs = time.perf_counter() - start
    bad = [k for k, (viol, gap) in checks.items() if viol > 1e-10 or gap > 1e-10]
    worst_v = max(v for v, _ in checks.values())
    worst_g = max(g for _, g in checks.values())
    ok = not bad and secs < 60
    assert report(3, ok, f"6 bounds x 1000 points, worst violation {worst_v:.1e}, "
                         f"worst expansion gap {worst_g:.1e}, {secs:.1f} s (< 60 s)"
                         + (f"; failing: {', '.join(bad)}" if bad else ""))


def test_c04_gradients():
    rng = np.random.default_rng(404)
    start = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        ch = sample_channels(np.random.default_rng([seed, 0]), DESK)
        x = random_point(rng, ch, DESK)
        f = transmit_factors(x.W, x.lam, x.r, ch.radar)
        # the surrogate and the position objective differ by a constant in the transmit
        # positions; differencing the latter avoids cancelling that large constant
        num = fd_gradient(lambda p: position_objective(p, f), x.t)
        pairs = [(objective_gradient(x.t, f), num)]
        for k in range(ch.K):
            q = qos_function(k, x.W, x.v, ch, DESK.qos)
            pairs.append((q.gradient(x.t), fd_gradient(q.value, x.t)))
        for got, ref in pairs:
            worst = max(worst, np.linalg.norm(got - ref) / np.linalg.norm(ref))
    secs = time.perf_counter() - start
    ok = worst <= 1e-6 and secs < 60
    assert report(4, ok, f"max rel error {worst:.2e} over 50 points (<= 1e-6), {secs:.1f} s (< 60 s)")


@pytest.fixture(scope="session")
def desk_runs():
    """Proposed scheme on the first 20 seeds with a feasible start at desk defaults."""
    runs = []
    start = time.perf_counter()
    for seed in range(200):
        ch = sample_channels(np.random.default_rng([seed, 0]), DESK)
        try:
            res = run_scheme("proposed", ch, DESK, BcdConfig(), seed)
        except InfeasibleError:
            continue
        runs.append((seed, ch, res))
        if len(runs) == 20:
            break
    return runs, time.perf_counter() - start


def _first_converged_pass(objectives, tol=1e-3):
    for i, (a, b) in enumerate(zip(objectives, objectives[1:]), 1):
        if abs(b - a) <= tol * abs(a):
            return i
    return None


def test_c05_bcd_monotone_and_converges(desk_runs):
    runs, secs = desk_runs
    monotone = converged = 0
    passes = []
    for _, _, res in runs:
        obj = [rec.objective for rec in res.trace]
        monotone += all(b >= a - 1e-6 * abs(a) for a, b in zip(obj, obj[1:]))
        first = _first_converged_pass(obj)
        passes.append(first)
        converged += first is not None and first <= 10
    need = int(np.ceil(0.9 * len(runs)))
    ok = len(runs) == 20 and monotone == len(runs) and converged >= need and secs < 600
    shown = ",".join("-" if p is None else str(p) for p in passes)
    assert report(5, ok, f"monotone {monotone}/{len(runs)}, converged within 10 passes "
                         f"{converged}/{len(runs)} (need {need}), first pass below 1e-3: [{shown}], "
                         f"{secs:.0f} s (< 600 s)")


def test_c06_final_feasibility(desk_runs):
    runs, _ = desk_runs
    checked, failures = 0, []
    for seed, ch, res in runs:
        obj = [rec.objective for rec in res.trace]
        first = _first_converged_pass(obj)
        if first is None or first > 10:
            continue
        checked += 1
        s = res.state
        sinr = comm_sinr(s.W, s.v, ch.H(s.t), ch.h, ch.noise)
        conds = {
            "qos": np.all(sinr >= DESK.qos * (1 - 1e-4)),
            "power": np.vdot(s.W, s.W).real <= DESK.power * (1 + 1e-9),
            "modulus": np.max(np.abs(np.abs(s.v) - 1)) <= np.finfo(float).eps,
            "spacing": all(pairwise_distances(p)[np.triu_indices(DESK.antennas, 1)].min()
                           >= DESK.D - 1e-9 for p in (s.t, s.r)),
            "region": all(np.all(np.abs(p) <= DESK.A / 2 + 1e-12) for p in (s.t, s.r)),
        }
        failures += [f"seed {seed}: {k}" for k, good in conds.items() if not good]
    ok = checked > 0 and not failures
    assert report(6, ok, f"{checked} converged seeds checked, {len(failures)} violations"
                         + (f" ({'; '.join(failures)})" if failures else ""))


def _spec(extra):
    return parse_spec("run.scale = desk\n" + extra)


POWER_SPEC = ("sweep.axis = power\nsweep.values = 28, 30, 32\n"
              "run.schemes = proposed, fpa, rpa, random_ris\nrun.seeds = 30\n")
QOS_SPEC = "sweep.axis = qos\nsweep.values = 0, 5, 10\nrun.schemes = proposed, fpa\nrun.seeds = 30\n"


@pytest.fixture(scope="session")
def power_sweep():
    spec = _spec(POWER_SPEC)
    start = time.perf_counter()
    result = run_experiment(spec, workers=1)
    return result, time.perf_counter() - start


@pytest.fixture(scope="session")
def qos_sweep():
    spec = _spec(QOS_SPEC)
    start = time.perf_counter()
    result = run_experiment(spec, workers=1)
    return result, time.perf_counter() - start


def _table(result):
    """(scheme, sweep) -> {seed: radar SINR dB}; infeasible seeds are absent."""
    table = {}
    for o in result.outcomes:
        cell = table.setdefault((o.scheme, o.sweep), {})
        if o.row is not None:
            cell[o.seed] = o.row.radar_sinr_db
    return table


def test_c07_gain_over_baselines(power_sweep):
    result, secs = power_sweep
    table = _table(result)
    points = sorted({o.sweep for o in result.outcomes})
    pooled, pooled_seeds, notes, every_point = [], set(), [], True
    for p in points:
        prop = table[("proposed", p)]
        fpa = table[("fpa", p)]
        common = sorted(set(prop) & set(fpa))
        pooled += [prop[s] - fpa[s] for s in common]
        pooled_seeds |= set(common)
        gain = np.mean([prop[s] - fpa[s] for s in common]) if common else np.nan
        parts = [f"{p:g} dBm: vs fpa {gain:+.2f} dB (n={len(common)})"]
        for base in ("rpa", "random_ris"):
            other = table[(base, p)]
            common = sorted(set(prop) & set(other))
            if common:
                diff = np.mean([prop[s] for s in common]) - np.mean([other[s] for s in common])
                parts.append(f"vs {base} {diff:+.2f} dB (n={len(common)})")
                every_point &= diff > 0
            elif prop:
                # baseline infeasible on every seed the proposed design solves
                parts.append(f"vs {base} inf (baseline infeasible)")
            else:
                every_point = False
                parts.append(f"vs {base} n/a")
        notes.append(", ".join(parts))
    mean_gain = float(np.mean(pooled)) if pooled else np.nan
    trial_secs = sum(o.row.seconds for o in result.outcomes if o.row is not None)
    ok = (len(pooled_seeds) >= 20 and mean_gain >= 2.0 and every_point and secs < 1800)
    assert report(7, ok, f"paired gain over FPA {mean_gain:.2f} dB (>= 2) on {len(pooled)} pairs "
                         f"from {len(pooled_seeds)} seeds; {' | '.join(notes)}; "
                         f"{secs:.0f} s wall, {trial_secs:.0f} s in feasible trials (< 1800 s)")


def test_c08_qos_robustness(qos_sweep):
    result, secs = qos_sweep
    table = _table(result)
    points = sorted({o.sweep for o in result.outcomes})
    seeds = set.intersection(*(set(table[(s, p)]) for s in ("proposed", "fpa") for p in points))
    seeds = sorted(seeds)
    means = {s: [np.mean([table[(s, p)][k] for k in seeds]) for p in points]
             for s in ("proposed", "fpa")} if seeds else {}
    if seeds:
        change = max(means["proposed"]) - min(means["proposed"])
        fpa_drop = means["fpa"][0] - means["fpa"][-1]
        ok = len(seeds) >= 10 and change < 1.5 and fpa_drop > change and secs < 1800
        detail = (f"proposed change {change:.2f} dB (< 1.5), FPA degradation {fpa_drop:.2f} dB "
                  f"(must exceed it), {len(seeds)} seeds feasible at all of "
                  f"{', '.join(f'{p:g}' for p in points)} dB; proposed means "
                  f"{', '.join(f'{m:.2f}' for m in means['proposed'])}, FPA means "
                  f"{', '.join(f'{m:.2f}' for m in means['fpa'])}; {secs:.0f} s (< 1800 s)")
    else:
        ok, detail = False, "no seed feasible at every QoS point"
    assert report(8, ok, detail)


def test_c09_penalty_loop(desk_runs):
    runs, _ = desk_runs
    M, xi2 = DESK.ris_elements, BcdConfig().penalty.xi2
    n_upd = short = dropped = 0
    for _, _, res in runs:
        for upd in res.ris_updates:
            if upd.status == "infeasible":
                continue
            n_upd += 1
            short += upd.norm_sq < M - xi2
            dropped += upd.min_sinr_after < upd.min_sinr_before * (1 - 1e-6)
    ok = len(runs) == 20 and n_upd > 0 and short == 0 and dropped == 0
    assert report(9, ok, f"{n_upd} RIS updates on {len(runs)} seeds: {short} exits with "
                         f"||v||^2 < M - xi2, {dropped} min-SINR decreases")


def _data_rows(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


def test_c10_determinism(power_sweep, tmp_path):
    # repeat a slice of the power sweep twice and compare with each other and the full run
    result, _ = power_sweep
    spec = _spec(POWER_SPEC.replace("run.seeds = 30", "run.seeds = 0-2"))
    for sub in ("a", "b"):
        write_outputs(run_experiment(spec, workers=1), tmp_path / sub, plots=False)
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if p.name != "timing.csv")
    identical = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
                    for n in names)
    full = [o.row for o in result.outcomes if o.row is not None and o.seed <= 2]
    rerun = [o.row for o in run_experiment(spec, workers=1).outcomes if o.row is not None]
    key = lambda r: (r.scheme, r.sweep, r.seed)  # noqa: E731
    text = lambda r: ",".join(format_number(x) for x in  # noqa: E731
                              (r.radar_sinr_db, r.min_qos_margin_db, r.passes))
    same_rows = sorted(map(key, full)) == sorted(map(key, rerun)) and \
        {key(r): text(r) for r in full} == {key(r): text(r) for r in rerun}
    ok = identical and same_rows
    assert report(10, ok, f"{len(names)} CSV files byte-identical across reruns: {identical}; "
                          f"rows match the full sweep: {same_rows} (timing.csv holds wall-clock "
                          f"times and is excluded)")
