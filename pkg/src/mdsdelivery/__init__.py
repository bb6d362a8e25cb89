"""Latency-minimizing delivery in MDS-coded, cache-enabled cloud small-cell networks.

Modules: :mod:`~mdsdelivery.network` (scenario generation),
:mod:`~mdsdelivery.caching` (coded placement), :mod:`~mdsdelivery.metrics`
(rates and latency), :mod:`~mdsdelivery.sca` (rate minorant and subproblem
encoding), :mod:`~mdsdelivery.conic` (cone-program solver),
:mod:`~mdsdelivery.optimizer` (BCU-SCA and greedy clustering),
:mod:`~mdsdelivery.baselines` and :mod:`~mdsdelivery.harness` (experiments).
"""

from .caching import CacheAllocation, fcd_place, probc_place
from .metrics import DeliveryPlan, LatencyReport, total_latency
from .network import Library, NetworkScenario, RadioParams, make_scenario
from .optimizer import InitPolicy, PenaltySchedule, StopRule, run_bcu, run_gbsc

__version__ = "0.1.0"

__all__ = [
    "CacheAllocation", "DeliveryPlan", "InitPolicy", "LatencyReport", "Library", "NetworkScenario",
    "PenaltySchedule", "RadioParams", "StopRule", "fcd_place", "make_scenario", "probc_place", "run_bcu",
    "run_gbsc", "total_latency",
]
