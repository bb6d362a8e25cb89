"""Acceptance criteria, each at its stated tolerance and time budget.

Every test prints one ``criterion N: PASS|FAIL (...)`` line, repeated in the
terminal summary, before asserting.
"""

import math
import time

import numpy as np
import pytest

from conftest import desk_scenario, random_plan, report
from mdsdelivery.baselines import unicast_multicast_gain
from mdsdelivery.caching import CacheAllocation, probc_place
from mdsdelivery.harness.config import (CacheSection, ExperimentConfig, ExperimentSection, LibrarySection,
                                        RadioSection, SolverSection, SweepSection)
from mdsdelivery.harness.experiment import run_experiment
from mdsdelivery.harness.oracles import (exhaustive_clustering, geneig_sinr, random_direction_sinr, sample_h1,
                                         simplex_grid_min_latency)
from mdsdelivery.metrics import DeliveryPlan, total_latency_multicast, total_latency_unicast
from mdsdelivery.network import Library, RadioParams, make_scenario
from mdsdelivery.optimizer import (PenaltySchedule, binarity_gap, penalty_h1, run_bcu, run_gbsc, update_bandwidth,
                                   update_bandwidth_unicast)
from mdsdelivery.sca import minorant_coeffs, minorant_value, rate_nats, whitened_rows


# -- 1: minorant --------------------------------------------------------


def test_criterion_1_minorant_suite():
    t0 = time.perf_counter()
    worst_gap, worst_tight, spot = -math.inf, 0.0, 0.0
    for seed in range(50):
        sc, cache = desk_scenario(seed)
        rng = np.random.default_rng(1000 + seed)
        plan = random_plan(sc, cache, rng)
        gidx = sc.requests.group_index()
        Vflat = plan.V.reshape(sc.F_req, -1)
        scales = 10.0 ** rng.uniform(-4, 0, 200) * np.abs(plan.V).max()
        noise = rng.normal(size=(200,) + Vflat.shape) + 1j * rng.normal(size=(200,) + Vflat.shape)
        Vp = Vflat[None] + scales[:, None, None] * noise
        G = whitened_rows(plan.U, sc) * math.sqrt(sc.params.noise_power)   # u_k^H H_k
        for k in range(sc.K):
            c = minorant_coeffs(plan.U[k], plan.V, sc, k)
            D0 = G[k] @ Vflat[gidx[k]]
            J0 = float(np.sum(np.abs(Vflat @ G[k]) ** 2) - abs(D0) ** 2 + sc.params.noise_power)
            worst_tight = max(worst_tight, abs(minorant_value(c, plan.U[k], plan.V, sc, k) - rate_nats(D0, J0)))
            proj = Vp @ G[k]                                   # (200, F_req)
            D = proj[:, gidx[k]]
            tot = np.sum(np.abs(proj) ** 2, axis=1) + sc.params.noise_power
            lower = c.q0 + 2 * (D * np.conj(c.q1)).real - tot * c.q2
            exact = np.log1p(np.abs(D) ** 2 / (tot - np.abs(D) ** 2))
            worst_gap = max(worst_gap, float(np.max(lower - exact)))
            # the vectorized bound is the library's minorant
            j = int(rng.integers(200))
            spot = max(spot, abs(lower[j] - minorant_value(c, plan.U[k], Vp[j].reshape(plan.V.shape), sc, k)))
    dt = time.perf_counter() - t0
    ok = worst_gap <= 1e-9 and worst_tight <= 1e-12 and dt < 10 and spot <= 1e-12
    report(1, ok, f"max minorant - rate {worst_gap:.2e} nats, tightness {worst_tight:.1e}, {dt:.1f} s")
    assert ok


# -- 2: bandwidth closed form -------------------------------------------


def test_criterion_2_bandwidth_closed_form():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    lib = Library()
    C = 10e6
    worst = -math.inf
    sizes = []
    for inst in range(100):
        F = int(rng.choice([2, 3, 4]))
        B = int(rng.integers(2, 5))
        cache = probc_place(lib, B, float(rng.uniform(0, 0.6)), seed=inst)
        files = tuple(sorted(rng.choice(lib.num_files, F, replace=False).tolist()))
        E = rng.integers(0, 2, (F, B)).astype(float)
        E[np.arange(F), rng.integers(0, B, F)] = 1.0
        s = (E * cache.residual[list(files)]).max(axis=1)
        if not np.any(s > 0):
            continue
        t = update_bandwidth(E, cache, files)
        with np.errstate(divide="ignore", invalid="ignore"):
            closed = float(np.max(np.where(s > 0, s / (t * C), 0.0)))
        grid = simplex_grid_min_latency(s, C, 0.005)
        worst = max(worst, closed - grid)
        sizes.append(F)
    dt = time.perf_counter() - t0
    ok = worst <= 0.005 and dt < 30 and len(sizes) >= 90 and set(sizes) == {2, 3, 4}
    report(2, ok, f"{len(sizes)} load vectors, max closed - grid {worst:.2e} s, {dt:.1f} s")
    assert ok


# -- 3: combiner --------------------------------------------------------


def test_criterion_3_combiner_optimality():
    t0 = time.perf_counter()
    worst_rel, dominated = 0.0, True
    for inst in range(100):
        sc, cache = desk_scenario(inst)
        rng = np.random.default_rng(3000 + inst)
        plan = random_plan(sc, cache, rng)
        k = inst % sc.K
        gidx = sc.requests.group_index()
        Hk = sc.channels.aggregate(k)
        a = Hk @ plan.v(gidx[k])
        J = sc.params.noise_power * np.eye(sc.params.user_antennas, dtype=complex)
        for i in range(sc.F_req):
            if i != gidx[k]:
                w = Hk @ plan.v(i)
                J += np.outer(w, w.conj())
        u = plan.U[k]
        got = abs(np.vdot(u, a)) ** 2 / np.vdot(u, J @ u).real
        ref = geneig_sinr(a, J)
        worst_rel = max(worst_rel, abs(got - ref) / ref)
        dominated &= got >= random_direction_sinr(a, J, 1000, rng) * (1 - 1e-12)
    dt = time.perf_counter() - t0
    ok = worst_rel <= 1e-6 and dominated and dt < 30
    report(3, ok, f"max relative SINR gap {worst_rel:.1e}, dominates random: {dominated}, {dt:.1f} s")
    assert ok


# -- 4: small penalty implies binary ------------------------------------


def test_criterion_4_binarization():
    pairs = sample_h1(10_000, (3, 4), np.random.default_rng(4))
    h = np.array([p[2] for p in pairs])
    recomputed = max(abs(penalty_h1(E, Z) - v) for E, Z, v in pairs[:200])
    small = [(E, Z) for E, Z, v in pairs if v <= 1e-9]
    bin_ok = all(binarity_gap(E) <= 1e-4 and np.linalg.norm(Z - E) <= 1e-4 for E, Z in small)
    ok = h.min() >= -1e-12 and bin_ok and len(small) > 0 and recomputed <= 1e-12
    report(4, ok, f"min h1 {h.min():.1e} over {len(h)} pairs, {len(small)} with h1 <= 1e-9 all binary: {bin_ok}")
    assert ok


# -- 5: monotone convergence --------------------------------------------


def test_criterion_5_monotone_convergence():
    t0 = time.perf_counter()
    worst = -math.inf
    binary = 0
    for seed in range(20):
        sc, cache = desk_scenario(seed)
        r = run_bcu(sc, cache, PenaltySchedule(lam0=0.1, eta=1.0), polish=False)
        obj = [row.objective for row in r.trace]
        worst = max(worst, max(b - a for a, b in zip(obj, obj[1:])))
        g = run_bcu(sc, cache, PenaltySchedule(lam0=0.1, eta=5.0, every=5), polish=False)
        binary += binarity_gap(g.relaxed_E) < 1e-3
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and binary >= 19 and dt < 300
    report(5, ok, f"max objective increase {worst:.1e}, binary in {binary}/20 runs, {dt:.0f} s")
    assert ok


# -- 6: unicast over multicast gain -------------------------------------


def test_criterion_6_unicast_multicast_gain():
    worst = 0.0
    for B in (2, 3, 10):
        p = RadioParams(num_sbs=B, tau0=1e-9)
        lib = Library()
        sc = make_scenario(p, lib, seed=B)
        n = lib.fragments
        cells = tuple(tuple(frozenset(range(b * n, b * n + 2)) for b in range(B)) for _ in range(lib.num_files))
        cache = CacheAllocation(cells, n, 0.4, lib.file_size)
        E = np.ones((sc.F_req, B))
        files = sc.requests.files
        plan = random_plan(sc, cache, np.random.default_rng(B), E)
        multi = total_latency_multicast(plan, sc, cache).T_F
        uni = total_latency_unicast(DeliveryPlan(E, plan.V, plan.U, T=update_bandwidth_unicast(E, cache, files)),
                                    sc, cache).T_F
        worst = max(worst, abs(uni / multi - B) / B, abs(unicast_multicast_gain(E, cache, files).ratio - B) / B)
    ok = worst <= 1e-9
    report(6, ok, f"max relative deviation of unicast/multicast from B {worst:.1e}")
    assert ok


# -- 7: small-instance oracle -------------------------------------------


def test_criterion_7_small_instance_oracle():
    t0 = time.perf_counter()
    p = RadioParams(num_sbs=2, num_users=2)
    lib = Library()
    worst = -math.inf
    for seed in range(10):
        sc = make_scenario(p, lib, seed=seed)
        cache = probc_place(lib, 2, 0.2, seed=seed)
        assert sc.F_req <= 2
        best, _, _ = exhaustive_clustering(sc, cache)
        ours = run_gbsc(run_bcu(sc, cache).plan, sc, cache).total
        worst = max(worst, ours / best - 1)
    dt = time.perf_counter() - t0
    ok = worst <= 0.05
    report(7, ok, f"worst BCU+GBSC excess over exhaustive {worst:+.3%}, {dt:.0f} s")
    assert ok


# -- 8: trends ----------------------------------------------------------


def _trend(memo, parameter, values, **sections):
    cfg = ExperimentConfig(experiment=ExperimentSection(algorithms=("mds-bcu",), trials=20),
                           sweep=SweepSection(parameter, tuple(values)), **sections)
    res = run_experiment(cfg, output=None, memo=memo)
    assert not res.failures, res.failures[:3]
    return [res.row(v, "mds-bcu").mean_total for v in values]


def _non_increasing(xs):
    return all(b <= a for a, b in zip(xs, xs[1:]))


@pytest.mark.slow
def test_criterion_8_trends(experiment_memo):
    t0 = time.perf_counter()
    memo = {}
    B = _trend(memo, "num_sbs", (2, 3, 4))
    mu = _trend(memo, "capacity", (0.0, 0.2, 0.4, 0.6))
    cf = _trend(memo, "fronthaul_capacity", (5e6, 15e6, 45e6))
    gam = _trend(memo, "zipf_gamma", (0.5, 1.0, 2.0))
    cfg = ExperimentConfig(experiment=ExperimentSection(algorithms=("mds-bcu", "uncoded1", "uncoded2"), trials=20),
                           sweep=SweepSection("capacity", (0.2,)))
    res = run_experiment(cfg, output=None, memo=memo)
    tot = {a: np.array([r.total for r in sorted((r for r in res.records if r.algorithm == a),
                                                 key=lambda r: r.trial)]) for a in cfg.experiment.algorithms}
    order = (np.all(tot["mds-bcu"] <= tot["uncoded1"] * 1.02) and np.all(tot["uncoded1"] <= tot["uncoded2"] * 1.02))
    dt = time.perf_counter() - t0
    experiment_memo.update(memo)
    checks = {"a": _non_increasing(B), "b": _non_increasing(mu), "c": _non_increasing(cf),
              "d": all(b < a for a, b in zip(gam, gam[1:])), "e": bool(order)}
    ok = all(checks.values()) and dt < 1200
    fmt = lambda xs: "/".join(f"{x:.2f}" for x in xs)  # noqa: E731
    report(8, ok, f"B {fmt(B)}, mu {fmt(mu)}, C_F {fmt(cf)}, gamma {fmt(gam)}, ordering {order}, "
                  f"failed {[k for k, v in checks.items() if not v]}, {dt:.0f} s")
    assert ok


# -- 9: large-scenario ratio --------------------------------------------


@pytest.mark.slow
def test_criterion_9_large_scenario_ratio():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(radio=RadioSection(num_sbs=10, num_users=15, sbs_antennas=8, user_antennas=3,
                                              fronthaul_capacity=30e6),
                           library=LibrarySection(), cache=CacheSection(capacity=0.0),
                           experiment=ExperimentSection(algorithms=("mds-bcu", "uncoded2"), trials=10),
                           sweep=SweepSection("capacity", (0.0,)), solver=SolverSection("clarabel", 1e-10))
    res = run_experiment(cfg, output=None)
    assert not res.failures, res.failures[:3]
    ratio = res.row(0.0, "mds-bcu").mean_total / res.row(0.0, "uncoded2").mean_total
    dt = time.perf_counter() - t0
    ok = 0.05 <= ratio <= 0.30
    report(9, ok, f"MDS / Uncoded II mean latency ratio {ratio:.4f}, {dt:.0f} s")
    assert ok
