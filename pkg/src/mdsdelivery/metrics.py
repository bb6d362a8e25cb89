"""SINR terms, multicast group rates and latency objectives for a delivery plan."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .caching import CacheAllocation
from .network import NetworkScenario


class UnservedGroupError(ValueError):
    """Some requested file has no serving SBS (a zero row in E)."""


@dataclass
class DeliveryPlan:
    """Clustering, beamformers, combiners and fronthaul shares.

    Row ``i`` of ``E``, ``V`` and ``t``/``T`` refers to the i-th requested
    file (``scenario.requests.files[i]``).  ``V[i, b]`` is v_{f,b} in C^M and
    ``U[k]`` is the unit-norm combiner of user k.  Exactly one of ``t``
    (multicast fronthaul) and ``T`` (unicast fronthaul) is set.
    """

    E: np.ndarray                 # (F_req, B)
    V: np.ndarray                 # (F_req, B, M) complex
    U: np.ndarray                 # (K, N) complex
    t: np.ndarray | None = None   # (F_req,)
    T: np.ndarray | None = None   # (F_req, B)

    @property
    def mode(self) -> str:
        return "unicast" if self.T is not None else "multicast"

    def v(self, i: int) -> np.ndarray:
        """Aggregate beamformer v_f = [v_f1; ...; v_fB]."""
        return self.V[i].reshape(-1)

    def aggregate_v(self) -> np.ndarray:
        return self.V.reshape(self.V.shape[0], -1)

    def copy(self) -> "DeliveryPlan":
        return DeliveryPlan(self.E.copy(), self.V.copy(), self.U.copy(),
                            None if self.t is None else self.t.copy(),
                            None if self.T is None else self.T.copy())

    def check(self, power: np.ndarray, tol: float = 1e-6) -> None:
        pw = np.sum(np.abs(self.V) ** 2, axis=(0, 2))
        if np.any(pw > power * (1 + tol)):
            raise ValueError("per-SBS power budget exceeded")
        if np.any(np.abs(np.linalg.norm(self.U, axis=1) - 1) > tol):
            raise ValueError("combiners must have unit norm")
        shares = self.T if self.T is not None else self.t
        if np.any(shares < -tol) or abs(shares.sum() - 1) > tol:
            raise ValueError("fronthaul shares must lie on the simplex")
        link = np.sum(np.abs(self.V) ** 2, axis=2)
        if np.any(link > self.E * power[None, :] * (1 + tol) + tol):
            raise ValueError("beamformer active on a link with e_{f,b} = 0")


@dataclass
class LatencyReport:
    T_E: float
    T_F: float
    total: float
    rates: np.ndarray                 # R_f over F_req, bit/s
    D: np.ndarray = field(repr=False)  # per user
    J: np.ndarray = field(repr=False)

    CSV_FIELDS = ("T_E", "T_F", "total", "min_rate")

    def csv_row(self) -> dict:
        return {"T_E": self.T_E, "T_F": self.T_F, "total": self.total,
                "min_rate": float(self.rates.min()) if self.rates.size else math.inf}


def _interference(Hv: np.ndarray, u: np.ndarray, gidx: np.ndarray, noise):
    """D_k and J_k for all users from Hv[k, i] = H_k v_i (shape K x F_req x N)."""
    proj = np.einsum("kn,kin->ki", u.conj(), Hv)
    K = Hv.shape[0]
    D = proj[np.arange(K), gidx]
    J = np.sum(np.abs(proj) ** 2, axis=1) - np.abs(D) ** 2 + noise
    return D, J


def channel_products(plan: DeliveryPlan, scenario: NetworkScenario) -> np.ndarray:
    Hk = scenario.channels.aggregates()               # K x N x MB
    return np.einsum("knm,im->kin", Hk, plan.aggregate_v())


def all_sinr_terms(plan: DeliveryPlan, scenario: NetworkScenario):
    gidx = scenario.requests.group_index()
    noise = scenario.params.noise_power
    return _interference(channel_products(plan, scenario), plan.U, gidx, noise)


def sinr_terms(plan: DeliveryPlan, scenario: NetworkScenario, k: int) -> tuple[complex, float]:
    """D_k = u_k^H H_k v_{f_k} and J_k = sum_{f != f_k} |u_k^H H_k v_f|^2 + sigma^2."""
    Hk = scenario.channels.aggregate(k)
    u = plan.U[k]
    i_k = scenario.requests.group_index()[k]
    proj = np.array([u.conj() @ (Hk @ plan.v(i)) for i in range(plan.V.shape[0])])
    D = proj[i_k]
    J = float(np.sum(np.abs(proj) ** 2) - abs(D) ** 2 + scenario.params.noise_power)
    return complex(D), J


def user_rates(D, J, B0: float) -> np.ndarray:
    return B0 * np.log2(1.0 + np.abs(D) ** 2 / J)


def group_rates(plan: DeliveryPlan, scenario: NetworkScenario, D=None, J=None) -> np.ndarray:
    """R_f = min_{k in G_f} B0 log2(1 + |D_k|^2 / J_k), one entry per requested file."""
    if D is None:
        D, J = all_sinr_terms(plan, scenario)
    r = user_rates(D, J, scenario.params.edge_bandwidth)
    gidx = scenario.requests.group_index()
    out = np.full(scenario.F_req, math.inf)
    np.minimum.at(out, gidx, r)
    return out


def group_rate(plan: DeliveryPlan, scenario: NetworkScenario, i: int) -> float:
    return float(group_rates(plan, scenario)[i])


def _edge(plan, scenario):
    D, J = all_sinr_terms(plan, scenario)
    R = group_rates(plan, scenario, D, J)
    S = scenario.library.file_size
    rmin = float(R.min()) if R.size else math.inf
    T_E = S / rmin if rmin > 0 else math.inf
    return T_E, R, D, J


def weighted_total(alpha_e: float, T_E: float, alpha_f: float, T_F: float) -> float:
    # a zero weight switches its term off even when the latency is infinite
    return (alpha_e * T_E if alpha_e else 0.0) + (alpha_f * T_F if alpha_f else 0.0)


def _require_served(E: np.ndarray) -> None:
    if E.size and np.any(E.sum(axis=1) <= 0):
        raise UnservedGroupError("a requested file has no serving SBS")


def fronthaul_latency(E, shares, cache: CacheAllocation, scenario: NetworkScenario) -> float:
    """max_{f,b} e_{f,b} m'_{f,b} / (t C_F + tau0) for vector or matrix shares."""
    p = scenario.params
    load = np.asarray(E, float) * cache.residual[list(scenario.requests.files)]
    shares = np.asarray(shares, float)
    den = (shares[:, None] if shares.ndim == 1 else shares) * p.fronthaul_capacity + p.tau0
    return float(np.max(load / den, initial=0.0))


def _report(plan, scenario, cache, shares):
    _require_served(plan.E)
    T_E, R, D, J = _edge(plan, scenario)
    T_F = fronthaul_latency(plan.E, shares, cache, scenario)
    p = scenario.params
    total = weighted_total(p.alpha_e, T_E, p.alpha_f, T_F)
    return LatencyReport(T_E, T_F, total, R, D, J)


def total_latency_multicast(plan: DeliveryPlan, scenario: NetworkScenario, cache: CacheAllocation) -> LatencyReport:
    if plan.t is None:
        raise ValueError("plan carries unicast shares; use total_latency_unicast")
    return _report(plan, scenario, cache, plan.t)


def total_latency_unicast(plan: DeliveryPlan, scenario: NetworkScenario, cache: CacheAllocation) -> LatencyReport:
    if plan.T is None:
        raise ValueError("plan carries multicast shares; use total_latency_multicast")
    return _report(plan, scenario, cache, plan.T)


def total_latency(plan: DeliveryPlan, scenario: NetworkScenario, cache: CacheAllocation) -> LatencyReport:
    if plan.mode == "unicast":
        return total_latency_unicast(plan, scenario, cache)
    return total_latency_multicast(plan, scenario, cache)
