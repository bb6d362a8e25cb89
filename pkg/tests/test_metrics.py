import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import desk_scenario, random_plan
from mdsdelivery.caching import CacheAllocation
from mdsdelivery.harness.oracles import enumerate_group_rate
from mdsdelivery.metrics import (DeliveryPlan, UnservedGroupError, group_rate, group_rates, sinr_terms,
                                 total_latency_multicast, total_latency_unicast, user_rates)
from mdsdelivery.network import Library, RadioParams, make_scenario
from mdsdelivery.optimizer import update_bandwidth, update_bandwidth_unicast


def _uniform_cache(F, B, count, n=5, S=100e6):
    cells = tuple(tuple(frozenset(range(b * n, b * n + count)) for b in range(B)) for _ in range(F))
    return CacheAllocation(cells, n, 1.0, S)


def _single_group(seed=0, B=3):
    lib = Library(num_files=1)
    return make_scenario(RadioParams(num_sbs=B), lib, seed=seed)


def test_single_group_has_no_interference(rng):
    sc = _single_group()
    cache = _uniform_cache(1, 3, 1)
    plan = random_plan(sc, cache, rng)
    for k in range(sc.K):
        _, J = sinr_terms(plan, sc, k)
        assert J == sc.params.noise_power


def test_zero_beamformers(rng, desk):
    sc, cache = desk
    plan = random_plan(sc, cache, rng)
    plan.V[:] = 0
    for k in range(sc.K):
        D, J = sinr_terms(plan, sc, k)
        assert D == 0 and J == sc.params.noise_power


def test_interference_term_by_term(rng):
    for seed in range(5):
        sc, cache = desk_scenario(seed)
        plan = random_plan(sc, cache, rng)
        gidx = sc.requests.group_index()
        for k in range(sc.K):
            Hk = sc.channels.aggregate(k)
            u = plan.U[k]
            J = sum(abs(np.vdot(u, Hk @ plan.v(i))) ** 2 for i in range(sc.F_req) if i != gidx[k])
            D, Jk = sinr_terms(plan, sc, k)
            assert D == pytest.approx(np.vdot(u, Hk @ plan.v(gidx[k])), rel=1e-12)
            assert Jk == pytest.approx(J + sc.params.noise_power, rel=1e-12)


def test_scalar_shannon_rate():
    p = RadioParams(num_sbs=1, num_users=1, sbs_antennas=1, user_antennas=1)
    sc = make_scenario(p, Library(num_files=1), seed=3)
    h = sc.channels.H[0, 0, 0, 0]
    P = 1.0
    plan = DeliveryPlan(np.ones((1, 1)), np.full((1, 1, 1), math.sqrt(P), dtype=complex),
                        np.ones((1, 1), dtype=complex), t=np.ones(1))
    expected = p.edge_bandwidth * math.log2(1 + P * abs(h) ** 2 / p.noise_power)
    assert group_rate(plan, sc, 0) == pytest.approx(expected, rel=1e-12)


def test_min_rule():
    r = user_rates(np.array([math.sqrt(3.0), 1.0]), np.array([1.0, 1.0]), 1.0)
    assert np.allclose(r, [2.0, 1.0])
    assert r.min() == 1.0


def test_group_rate_matches_enumeration(rng):
    checked = 0
    for seed in range(30):
        sc, cache = desk_scenario(seed, num_files=2)
        if sc.F_req != 2:
            continue
        plan = random_plan(sc, cache, rng)
        gidx = sc.requests.group_index()
        V = [plan.v(i) for i in range(sc.F_req)]
        for i in range(2):
            members = [(k, (sc.channels.aggregate(k), plan.U[k], gidx[k])) for k in range(sc.K) if gidx[k] == i]
            ref = enumerate_group_rate(None, None, V, members, sc.params.noise_power, sc.params.edge_bandwidth)
            assert group_rate(plan, sc, i) == pytest.approx(ref, rel=1e-10)
        checked += 1
    assert checked >= 2


def test_latency_fully_cached(rng):
    sc, _ = desk_scenario(1)
    cache = _uniform_cache(sc.library.num_files, sc.B, 5)
    plan = random_plan(sc, cache, rng)
    rep = total_latency_multicast(plan, sc, cache)
    assert rep.T_F == 0.0
    assert rep.total == sc.params.alpha_e * rep.T_E


def test_fronthaul_latency_division():
    # single group, s = 50 Mbit, t = 1, C_F = 10 Mbit/s, tau0 -> 0
    p = RadioParams(num_sbs=1, num_users=1, tau0=1e-12)
    sc = make_scenario(p, Library(num_files=1), seed=0)
    cache = CacheAllocation(((frozenset({0, 1}),),), 4, 1.0, 100e6)  # m' = S/2
    plan = DeliveryPlan(np.ones((1, 1)), np.zeros((1, 1, 5), complex), np.eye(1, 3, dtype=complex), t=np.ones(1))
    plan.V[0, 0, 0] = 1.0
    rep = total_latency_multicast(plan, sc, cache)
    assert rep.T_F == pytest.approx(5.0, rel=1e-12)
    uni = DeliveryPlan(plan.E, plan.V, plan.U, T=np.ones((1, 1)))
    assert total_latency_unicast(uni, sc, cache).T_F == pytest.approx(5.0, rel=1e-12)


def test_edge_latency_ten_seconds(monkeypatch):
    import mdsdelivery.metrics as m
    sc = _single_group()
    plan = DeliveryPlan(np.ones((1, 3)), np.zeros((1, 3, 5), complex), np.zeros((5, 3), complex), t=np.ones(1))
    monkeypatch.setattr(m, "group_rates", lambda *a, **k: np.array([10e6]))
    T_E, *_ = m._edge(plan, sc)
    assert T_E == pytest.approx(10.0)


def test_zero_rate_gives_infinite_latency(desk, rng):
    sc, cache = desk
    plan = random_plan(sc, cache, rng)
    plan.V[:] = 0
    rep = total_latency_multicast(plan, sc, cache)
    assert rep.T_E == math.inf and rep.total == math.inf


def test_unserved_group(desk, rng):
    sc, cache = desk
    plan = random_plan(sc, cache, rng)
    plan.E[0] = 0
    with pytest.raises(UnservedGroupError):
        total_latency_multicast(plan, sc, cache)


def test_unicast_full_cooperation_is_B_times_multicast():
    sc, _ = desk_scenario(2, tau0=1e-9)
    cache = _uniform_cache(sc.library.num_files, sc.B, 2)
    E = np.ones((sc.F_req, sc.B))
    files = sc.requests.files
    rng = np.random.default_rng(0)
    plan = random_plan(sc, cache, rng, E)
    m_prime = 0.6 * 100e6
    multi = total_latency_multicast(plan, sc, cache).T_F
    uni = total_latency_unicast(DeliveryPlan(E, plan.V, plan.U, T=update_bandwidth_unicast(E, cache, files)),
                                sc, cache).T_F
    tau_free = sc.B * sc.F_req * m_prime / sc.params.fronthaul_capacity
    assert uni == pytest.approx(tau_free, rel=1e-12)
    assert uni / multi == pytest.approx(sc.B, rel=1e-12)


def test_unicast_zero_residual(desk, rng):
    sc, _ = desk
    cache = _uniform_cache(sc.library.num_files, sc.B, 5)
    plan = random_plan(sc, cache, rng)
    E = plan.E
    uni = DeliveryPlan(E, plan.V, plan.U, T=update_bandwidth_unicast(E, cache, sc.requests.files))
    assert total_latency_unicast(uni, sc, cache).T_F == 0.0


@given(st.integers(0, 50), st.floats(1.0, 3.0))
def test_scaling_desired_group_never_lowers_its_rate(seed, alpha):
    sc, cache = desk_scenario(seed % 7)
    rng = np.random.default_rng(seed)
    plan = random_plan(sc, cache, rng)
    plan.V *= 0.3  # leave power headroom
    i = seed % sc.F_req
    before = group_rate(plan, sc, i)
    plan.V[i] *= alpha
    assert group_rate(plan, sc, i) >= before * (1 - 1e-12)


@given(st.integers(0, 200))
def test_multicast_fronthaul_never_above_unicast(seed):
    sc, cache = desk_scenario(seed % 5)
    rng = np.random.default_rng(seed)
    E = rng.integers(0, 2, (sc.F_req, sc.B)).astype(float)
    E[np.arange(sc.F_req), rng.integers(0, sc.B, sc.F_req)] = 1.0
    plan = random_plan(sc, cache, rng, E)
    files = sc.requests.files
    multi = total_latency_multicast(plan, sc, cache).T_F
    uni = total_latency_unicast(DeliveryPlan(E, plan.V, plan.U, T=update_bandwidth_unicast(E, cache, files)),
                                sc, cache).T_F
    assert multi <= uni * (1 + 1e-9)


def test_evaluation_is_pure(desk, rng):
    sc, cache = desk
    plan = random_plan(sc, cache, rng)
    a = total_latency_multicast(plan, sc, cache)
    b = total_latency_multicast(plan, sc, cache)
    assert (a.T_E, a.T_F, a.total) == (b.T_E, b.T_F, b.total)
    assert np.array_equal(group_rates(plan, sc), a.rates)


def test_plan_check(desk, rng):
    sc, cache = desk
    plan = random_plan(sc, cache, rng)
    plan.check(sc.params.power)
    plan.V *= 10
    with pytest.raises(ValueError):
        plan.check(sc.params.power)
    assert update_bandwidth(plan.E, cache, sc.requests.files).sum() == pytest.approx(1.0)
