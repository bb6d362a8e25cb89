"""Comparison schemes: uncoded unicast fronthaul, full cooperation, nearest association.

All three reuse the BCU machinery of :mod:`mdsdelivery.optimizer`:

* uncoded unicast (``Uncoded I``): clustering optimized as in the coded
  design, but every SBS receives its own copy of the residual bits, so the
  fronthaul shares form a matrix ``T`` with ``t_{f,b} = e_{f,b} m'_{f,b} / ||S||_1``;
* full-cooperation unicast (``Uncoded II``): ``E`` frozen at all ones with the
  same unicast fronthaul accounting;
* nearest association: ``e_{f,b} = 1`` iff SBS ``b`` is the nearest SBS of some
  member of the group of ``f``, multicast fronthaul with the closed-form
  multicast shares, beamformers optimized by fixed-E BCU.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .caching import CacheAllocation
from .network import NetworkScenario
from .optimizer import BcuResult, InitPolicy, PenaltySchedule, StopRule, run_bcu


class BaselineKind(enum.Enum):
    UNCODED_UNICAST = "uncoded-unicast"
    UNCODED_FULLCOOP = "uncoded-fullcoop"
    NEAREST_ASSOCIATION = "nearest-association"


def solve_uncoded_unicast(scenario: NetworkScenario, cache: CacheAllocation,
                          schedule: PenaltySchedule = PenaltySchedule(), init: InitPolicy = InitPolicy(),
                          stop: StopRule = StopRule(), **kw) -> BcuResult:
    """BCU over (U, V, E, T) with unicast fronthaul accounting."""
    return run_bcu(scenario, cache, schedule, init, stop, unicast=True, **kw)


def solve_fullcoop_unicast(scenario: NetworkScenario, cache: CacheAllocation,
                           schedule: PenaltySchedule = PenaltySchedule(), init: InitPolicy = InitPolicy(),
                           stop: StopRule = StopRule(), **kw) -> BcuResult:
    """Every SBS serves every group; BCU over (U, V, T) only."""
    E = np.ones((scenario.F_req, scenario.B))
    return run_bcu(scenario, cache, schedule, init, stop, unicast=True, fixed_E=E, **kw)


def nearest_association(scenario: NetworkScenario) -> np.ndarray:
    """Binary E with e_{f,b} = 1 iff b is the nearest SBS of a member of the group of f."""
    E = np.zeros((scenario.F_req, scenario.B))
    gidx = scenario.requests.group_index()
    E[gidx, scenario.nearest_sbs()] = 1.0
    return E


def solve_nearest_association(scenario: NetworkScenario, cache: CacheAllocation,
                              schedule: PenaltySchedule = PenaltySchedule(), init: InitPolicy = InitPolicy(),
                              stop: StopRule = StopRule(), **kw) -> BcuResult:
    """Nearest-SBS clustering with multicast fronthaul; BCU over (U, V, t)."""
    return run_bcu(scenario, cache, schedule, init, stop, unicast=False,
                   fixed_E=nearest_association(scenario), **kw)


SOLVERS = {
    BaselineKind.UNCODED_UNICAST: solve_uncoded_unicast,
    BaselineKind.UNCODED_FULLCOOP: solve_fullcoop_unicast,
    BaselineKind.NEAREST_ASSOCIATION: solve_nearest_association,
}


def solve_baseline(kind: BaselineKind | str, scenario: NetworkScenario, cache: CacheAllocation,
                   **kw) -> BcuResult:
    return SOLVERS[BaselineKind(kind)](scenario, cache, **kw)


@dataclass(frozen=True)
class UnicastMulticastGain:
    """Ratio of unicast-optimal to multicast-optimal fronthaul latency for one E."""

    ratio: float
    unicast_load: float     # ||vec(S)||_1, bits
    multicast_load: float   # ||s||_1, bits

    @property
    def fronthaul_free(self) -> bool:
        return self.multicast_load == 0.0


def unicast_multicast_gain(E, cache: CacheAllocation, files) -> UnicastMulticastGain:
    """``||vec(S)||_1 / ||s||_1`` for a binary clustering ``E``.

    With the optimal shares both fronthaul latencies are (load sum) / C_F,
    so the ratio of the load sums is the exact latency ratio.  A clustering
    that needs no fronthaul at all reports an infinite gain.
    """
    E = np.asarray(E, float)
    if np.any((E != 0) & (E != 1)):
        raise ValueError("unicast_multicast_gain needs a binary clustering")
    S = E * cache.residual[list(files)]
    uni = float(S.sum())
    multi = float(S.max(axis=1).sum()) if S.size else 0.0
    if multi == 0.0:
        return UnicastMulticastGain(math.inf, uni, multi)
    return UnicastMulticastGain(uni / multi, uni, multi)
