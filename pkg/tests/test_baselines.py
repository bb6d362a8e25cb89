import math

import numpy as np
import pytest

from conftest import default_point_config, desk_scenario, random_plan
from mdsdelivery.baselines import (BaselineKind, unicast_multicast_gain, nearest_association, solve_baseline,
                                   solve_fullcoop_unicast, solve_nearest_association, solve_uncoded_unicast)
from mdsdelivery.caching import CacheAllocation, probc_place
from mdsdelivery.harness.experiment import run_experiment
from mdsdelivery.metrics import DeliveryPlan, total_latency_multicast, total_latency_unicast
from mdsdelivery.network import (Library, NetworkScenario, Placement, RadioParams, generate_channels, make_scenario,
                                 sample_requests)
from mdsdelivery.optimizer import StopRule, run_bcu, update_bandwidth, update_bandwidth_unicast

SHORT = StopRule(max_iters=25)


def _uniform_cache(F, B, count, n=5, S=100e6):
    cells = tuple(tuple(frozenset(range(b * n, b * n + count)) for b in range(B)) for _ in range(F))
    return CacheAllocation(cells, n, 1.0, S)


def _placed(sbs, users, seed=0, num_files=3):
    sbs = np.asarray(sbs, float)
    users = np.asarray(users, float)
    p = RadioParams(num_sbs=len(sbs), num_users=len(users))
    placement = Placement(sbs, users, 1000.0, 0.0)
    lib = Library(num_files=num_files)
    return NetworkScenario(p, placement, generate_channels(placement, p, seed=seed), lib,
                           sample_requests(lib, len(users), seed))


# -- uncoded unicast ----------------------------------------------------


def test_fully_cached_unicast_equals_multicast():
    sc, _ = desk_scenario(4)
    cache = _uniform_cache(sc.library.num_files, sc.B, 5)
    a = run_bcu(sc, cache, stop=SHORT)
    b = solve_uncoded_unicast(sc, cache, stop=SHORT)
    assert a.report.T_F == b.report.T_F == 0.0
    assert b.total == pytest.approx(a.total, rel=1e-9)


def test_two_sbs_equal_residuals():
    p = RadioParams(num_sbs=2, num_users=1, tau0=1e-12)
    sc = make_scenario(p, Library(num_files=1), seed=0)
    cache = CacheAllocation(((frozenset({0, 1}), frozenset({5, 6})),), 5, 1.0, 100e6)
    E = np.ones((1, 2))
    T = update_bandwidth_unicast(E, cache, sc.requests.files)
    assert np.allclose(T, [[0.5, 0.5]], rtol=1e-15)
    plan = random_plan(sc, cache, np.random.default_rng(0), E)
    m_prime = 0.6 * 100e6
    uni = total_latency_unicast(DeliveryPlan(E, plan.V, plan.U, T=T), sc, cache).T_F
    multi = total_latency_multicast(plan, sc, cache).T_F
    assert uni == pytest.approx(2 * m_prime / 10e6, rel=1e-9)
    assert multi == pytest.approx(m_prime / 10e6, rel=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_fixed_E_fronthaul_ratio_is_load_ratio(seed):
    sc, cache = desk_scenario(seed, tau0=1e-12)
    rng = np.random.default_rng(seed)
    E = rng.integers(0, 2, (sc.F_req, sc.B)).astype(float)
    E[np.arange(sc.F_req), rng.integers(0, sc.B, sc.F_req)] = 1.0
    files = sc.requests.files
    plan = random_plan(sc, cache, rng, E)
    multi = total_latency_multicast(plan, sc, cache).T_F
    uni = total_latency_unicast(DeliveryPlan(E, plan.V, plan.U, T=update_bandwidth_unicast(E, cache, files)),
                                sc, cache).T_F
    g = unicast_multicast_gain(E, cache, files)
    if g.fronthaul_free:
        assert uni == multi == 0.0
    else:
        assert uni / multi == pytest.approx(g.ratio, rel=1e-9)
        assert multi == pytest.approx(g.multicast_load / sc.params.fronthaul_capacity, rel=1e-9)


# -- full cooperation ----------------------------------------------------


def test_single_sbs_fullcoop_equals_uncoded_unicast():
    p = RadioParams(num_sbs=1)
    lib = Library()
    sc = make_scenario(p, lib, seed=3)
    cache = probc_place(lib, 1, 0.2, seed=3)
    a = solve_fullcoop_unicast(sc, cache, stop=SHORT)
    b = solve_uncoded_unicast(sc, cache, stop=SHORT)
    assert np.array_equal(a.plan.E, b.plan.E)
    assert b.total == pytest.approx(a.total, rel=1e-9)


@pytest.mark.parametrize("B", [2, 3])
def test_fullcoop_without_cache(B):
    p = RadioParams(num_sbs=B, tau0=1e-12)
    lib = Library()
    sc = make_scenario(p, lib, seed=B)
    cache = _uniform_cache(lib.num_files, B, 0)
    r = solve_fullcoop_unicast(sc, cache, stop=StopRule(max_iters=3))
    assert np.array_equal(r.plan.E, np.ones((sc.F_req, B)))
    assert r.report.T_F == pytest.approx(B * sc.F_req * lib.file_size / p.fronthaul_capacity, rel=1e-9)


# -- nearest association -------------------------------------------------


def test_nearest_association_geometry():
    sc = _placed([(1.0, 0.0), (5.0, 0.0)], [(0.0, 0.0)])
    E = nearest_association(sc)
    assert np.array_equal(E, [[1.0, 0.0]])


def test_all_users_near_one_sbs():
    sc = _placed([(900.0, 900.0), (0.0, 0.0), (-900.0, 900.0)], [(1.0, 2.0), (-3.0, 1.0), (2.0, -2.0), (0.5, 0.5)])
    E = nearest_association(sc)
    assert np.array_equal(np.flatnonzero(E.any(axis=0)), [1])
    assert np.all(E.sum(axis=1) == 1)


def test_nearest_association_tie_goes_to_lower_index():
    sc = _placed([(3.0, 0.0), (-3.0, 0.0)], [(0.0, 4.0)])
    assert np.array_equal(nearest_association(sc), [[1.0, 0.0]])


def test_na_keeps_its_clustering(desk):
    sc, cache = desk
    r = solve_nearest_association(sc, cache, stop=SHORT)
    assert np.array_equal(r.plan.E, nearest_association(sc))
    assert np.allclose(r.plan.t, update_bandwidth(r.plan.E, cache, sc.requests.files))


def test_solve_baseline_dispatch(desk):
    sc, cache = desk
    a = solve_baseline("nearest-association", sc, cache, stop=StopRule(max_iters=3))
    b = solve_baseline(BaselineKind.NEAREST_ASSOCIATION, sc, cache, stop=StopRule(max_iters=3))
    assert a.total == b.total
    with pytest.raises(ValueError):
        solve_baseline("sb-sca", sc, cache)


# -- gain calculator -----------------------------------------------------


@pytest.mark.parametrize("B", [3, 10])
def test_gain_full_cooperation_uniform_residuals(B):
    cache = _uniform_cache(4, B, 2)
    g = unicast_multicast_gain(np.ones((4, B)), cache, (0, 1, 2, 3))
    assert g.ratio == pytest.approx(B, rel=1e-12)


def test_gain_single_sbs_clusters():
    cache = _uniform_cache(3, 4, 1)
    E = np.eye(3, 4)
    assert unicast_multicast_gain(E, cache, (0, 1, 2)).ratio == 1.0


def test_gain_fronthaul_free():
    g = unicast_multicast_gain(np.ones((2, 3)), _uniform_cache(2, 3, 5), (0, 1))
    assert g.fronthaul_free and g.ratio == math.inf


def test_gain_rejects_fractional():
    with pytest.raises(ValueError):
        unicast_multicast_gain(np.full((2, 2), 0.5), _uniform_cache(2, 2, 1), (0, 1))


@pytest.mark.parametrize("seed", range(3))
def test_unicast_shares_equalize_and_beat_samples(seed):
    sc, cache = desk_scenario(seed)
    rng = np.random.default_rng(seed)
    E = np.ones((sc.F_req, sc.B))
    S = E * cache.residual[list(sc.requests.files)]
    T = update_bandwidth_unicast(E, cache, sc.requests.files)
    active = S > 0
    lat = S[active] / (T[active] * sc.params.fronthaul_capacity)
    assert np.ptp(lat) <= 1e-9 * lat.max()
    W = rng.dirichlet(np.ones(S.size), 10_000).reshape(-1, *S.shape)
    with np.errstate(divide="ignore"):
        sampled = np.max(np.where(active, S / (W * sc.params.fronthaul_capacity), 0.0), axis=(1, 2))
    assert lat.max() <= sampled.min() * (1 + 1e-12)


# -- paired comparisons over 20 trials -----------------------------------


@pytest.fixture(scope="module")
def paired(experiment_memo):
    cfg = default_point_config(("mds-bcu", "uncoded1", "uncoded2", "na"))
    res = run_experiment(cfg, output=None, memo=experiment_memo)
    assert not res.failures
    by = {}
    for r in res.records:
        by.setdefault(r.algorithm, {})[r.trial] = r.total
    return {a: np.array([v[t] for t in sorted(v)]) for a, v in by.items()}


@pytest.mark.slow
def test_fullcoop_not_better_than_uncoded_unicast(paired):
    assert paired["uncoded2"].mean() >= paired["uncoded1"].mean() * 0.98


@pytest.mark.slow
def test_na_not_better_than_bcu_on_average(paired):
    assert paired["na"].mean() >= paired["mds-bcu"].mean() * 0.98


@pytest.mark.slow
def test_design_ordering_per_trial(paired):
    assert np.all(paired["mds-bcu"] <= paired["uncoded1"] * 1.02)
    assert np.all(paired["uncoded1"] <= paired["uncoded2"] * 1.02)
