"""Shared scenario builders and hypothesis settings."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mdsdelivery.caching import probc_place
from mdsdelivery.metrics import DeliveryPlan
from mdsdelivery.network import Library, RadioParams, make_scenario
from mdsdelivery.optimizer import update_bandwidth, update_combiners

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def desk_scenario(seed=0, B=3, K=5, M=5, N=3, mu=0.2, tau0=None, **lib_kw):
    """Default-size scenario and ProbC cache for ``seed``."""
    params = RadioParams(num_sbs=B, num_users=K, sbs_antennas=M, user_antennas=N, tau0=tau0)
    lib = Library(**lib_kw)
    return make_scenario(params, lib, seed=seed), probc_place(lib, B, mu, seed=seed)


def random_plan(scenario, cache, rng, E=None):
    """Feasible multicast plan with random beamformers at half power."""
    Fq, B, M = scenario.F_req, scenario.B, scenario.M
    E = np.ones((Fq, B)) if E is None else E
    V = rng.normal(size=(Fq, B, M)) + 1j * rng.normal(size=(Fq, B, M))
    V *= E[:, :, None]
    P = scenario.params.power
    pw = np.sum(np.abs(V) ** 2, axis=(0, 2))
    V *= np.sqrt(0.5 * P / np.where(pw > 0, pw, 1.0))[None, :, None]
    U, _ = update_combiners(V, scenario)
    return DeliveryPlan(E, V, U, t=update_bandwidth(E, cache, scenario.requests.files))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk():
    return desk_scenario(0)


@pytest.fixture(scope="session")
def experiment_memo():
    """Trial records shared by every harness run in the session, keyed by config point."""
    return {}


def default_point_config(algorithms, trials=20, **sections):
    """Default desk configuration swept over the single cache-capacity value 0.2."""
    from mdsdelivery.harness.config import ExperimentConfig, ExperimentSection, SweepSection

    return ExperimentConfig(experiment=ExperimentSection(algorithms=tuple(algorithms), trials=trials),
                            sweep=SweepSection("capacity", (0.2,)), **sections)


ACCEPTANCE_LINES: list[str] = []


def report(number: int, ok: bool, detail: str) -> None:
    """Record and print one acceptance verdict line."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
