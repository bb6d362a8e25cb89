"""Penalty-based inexact BCU-SCA and greedy SBS clustering.

One BCU iteration solves the convex (V, E) subproblem built by
:mod:`mdsdelivery.sca` and then applies the closed-form updates of the
combiners U, the fronthaul shares t and the auxiliary matrix Z.  The penalty
weight grows geometrically so the relaxed clustering matrix is pushed to
binary values.  The monitored objective is

    alpha_E T_E(U, V) + alpha_F T_F(E, t) + lambda h1(E, Z),

with T_F evaluated on the relaxed E.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .caching import CacheAllocation
from .conic import solve
from .metrics import DeliveryPlan, LatencyReport, fronthaul_latency, total_latency, weighted_total
from .network import STREAM_INIT, NetworkScenario, stream
from .sca import R2State, build_r2, decode_r2, rate_nats


@dataclass(frozen=True)
class PenaltySchedule:
    lam0: float = 0.1
    eta: float = 5.0
    every: int = 5          # I
    lam_max: float = 1e6

    def __post_init__(self):
        if self.lam0 <= 0 or self.eta < 1 or self.every < 1:
            raise ValueError("need lam0 > 0, eta >= 1, I >= 1")

    def at(self, i: int) -> float:
        """Penalty weight used in (0-based) iteration ``i``."""
        return min(self.lam0 * self.eta ** (i // self.every), self.lam_max)


@dataclass(frozen=True)
class StopRule:
    rel_tol: float = 1e-4
    patience: int = 3
    binarity_tol: float = 1e-3
    max_iters: int = 200


@dataclass(frozen=True)
class InitPolicy:
    kind: str = "full"            # "full" (E = 1) or "random" (E ~ U[0, 1])
    power_fraction: float = 0.5
    seed: object = 0

    def __post_init__(self):
        if self.kind not in ("full", "random"):
            raise ValueError(f"unknown init kind {self.kind!r}")


@dataclass
class TraceRow:
    iteration: int
    objective: float
    lam: float
    binarity: float
    T_E: float
    T_F: float
    accepted: bool
    # increase of the true objective proposed by a rejected subproblem step
    rejected_increase: float = 0.0


@dataclass
class BcuResult:
    plan: DeliveryPlan
    report: LatencyReport
    trace: list[TraceRow] = field(default_factory=list)
    relaxed_E: np.ndarray | None = None
    repaired: bool = False
    # the returned plan is the refined full-cooperation start
    kept_start: bool = False

    @property
    def total(self) -> float:
        return self.report.total


TRACE_FIELDS = [f for f in TraceRow.__dataclass_fields__]


def write_trace(trace: list[TraceRow], path_or_fh) -> None:
    own = isinstance(path_or_fh, (str, bytes)) or hasattr(path_or_fh, "__fspath__")
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        w = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
        w.writeheader()
        for row in trace:
            w.writerow(asdict(row))
    finally:
        if own:
            fh.close()


# -- closed-form blocks -------------------------------------------------


def penalty_h1(E, Z) -> float:
    E = np.asarray(E, float)
    Z = np.asarray(Z, float)
    return float(E.size - np.sum((2 * E - 1) * (2 * Z - 1)))


def binarity_gap(E) -> float:
    E = np.asarray(E, float)
    return float(np.max(np.minimum(E, 1 - E), initial=0.0))


def update_Z(E) -> np.ndarray:
    """Maximizer of <2E-1, 2Z-1> over the ball ||2Z-1||_F^2 <= |E|."""
    E = np.asarray(E, float)
    D = 2 * E - 1
    nrm = np.linalg.norm(D)
    if nrm == 0.0:
        return np.full_like(E, 0.5)
    return math.sqrt(E.size) * D / (2 * nrm) + 0.5


def update_combiners(V: np.ndarray, scenario: NetworkScenario) -> tuple[np.ndarray, np.ndarray]:
    """MMSE-type combiners u_k = J_k^-1 H_k v_{f_k}, normalized.

    Returns the combiners and a per-user flag marking a zero desired signal
    (the combiner is then an arbitrary unit vector and the rate is zero).
    """
    Hk = scenario.channels.aggregates()
    gidx = scenario.requests.group_index()
    K, N = scenario.K, scenario.params.user_antennas
    sigma2 = scenario.params.noise_power
    Hv = np.einsum("knm,im->kin", Hk, V.reshape(V.shape[0], -1))   # K x F_req x N
    U = np.zeros((K, N), dtype=complex)
    zero = np.zeros(K, dtype=bool)
    for k in range(K):
        a = Hv[k, gidx[k]]
        other = np.delete(Hv[k], gidx[k], axis=0)
        J = other.T @ other.conj() + sigma2 * np.eye(N)
        w = np.linalg.solve(J, a)
        nrm = np.linalg.norm(w)
        if nrm == 0.0 or not np.isfinite(nrm):
            U[k, 0] = 1.0
            zero[k] = True
        else:
            U[k] = w / nrm
    return U, zero


def update_bandwidth(E, cache: CacheAllocation, files) -> np.ndarray:
    """t_f = s_f / ||s||_1 with s_f = max_b e_{f,b} m'_{f,b}; uniform if s = 0."""
    load = np.asarray(E, float) * cache.residual[list(files)]
    s = load.max(axis=1) if load.size else np.zeros(len(files))
    tot = s.sum()
    if tot <= 0:
        return np.full(len(files), 1.0 / len(files))
    return s / tot


def update_bandwidth_unicast(E, cache: CacheAllocation, files) -> np.ndarray:
    """t_{f,b} = e_{f,b} m'_{f,b} / ||vec(S)||_1; uniform if S = 0."""
    S = np.asarray(E, float) * cache.residual[list(files)]
    tot = S.sum()
    if tot <= 0:
        return np.full(S.shape, 1.0 / S.size)
    return S / tot


def _shares(E, cache, scenario, unicast: bool):
    fn = update_bandwidth_unicast if unicast else update_bandwidth
    return fn(E, cache, scenario.requests.files)


# -- objective ----------------------------------------------------------


def edge_latency(U, V, scenario: NetworkScenario) -> float:
    Hk = scenario.channels.aggregates()
    gidx = scenario.requests.group_index()
    proj = np.einsum("kn,knm,im->ki", U.conj(), Hk, V.reshape(V.shape[0], -1))
    D = proj[np.arange(scenario.K), gidx]
    J = np.sum(np.abs(proj) ** 2, axis=1) - np.abs(D) ** 2 + scenario.params.noise_power
    r = rate_nats(D, J)
    rmin = float(r.min()) if r.size else math.inf
    s_hat = scenario.library.file_size * math.log(2.0) / scenario.params.edge_bandwidth
    return s_hat / rmin if rmin > 0 else math.inf


def r1_objective(U, V, E, shares, Z, lam, scenario, cache) -> tuple[float, float, float]:
    """(objective, T_E, T_F) of the penalized problem at the given point."""
    p = scenario.params
    T_E = edge_latency(U, V, scenario)
    T_F = fronthaul_latency(E, shares, cache, scenario)
    obj = weighted_total(p.alpha_e, T_E, p.alpha_f, T_F)
    if Z is not None and lam:
        obj += lam * penalty_h1(E, Z)
    return obj, T_E, T_F


# -- initialization -----------------------------------------------------


def matched_filter_init(E: np.ndarray, scenario: NetworkScenario, power_fraction: float = 0.5) -> np.ndarray:
    """Per-SBS matched filters toward each group's strongest member.

    ||v_{f,b}||^2 = min(power_fraction / F_req, e_{f,b}) * P_b, which
    respects both the SBS power budget and the coupling constraint.
    """
    Fq, B, M = scenario.F_req, scenario.B, scenario.M
    H = scenario.channels.H
    P = scenario.params.power
    V = np.zeros((Fq, B, M), dtype=complex)
    for i, f in enumerate(scenario.requests.files):
        users = scenario.requests.groups[f]
        for b in range(B):
            k = max(users, key=lambda kk: np.linalg.norm(H[kk, b]))
            _, _, vh = np.linalg.svd(H[k, b])
            V[i, b] = vh[0].conj() * math.sqrt(min(power_fraction / Fq, E[i, b]) * P[b])
    return V


def initial_plan(scenario: NetworkScenario, cache: CacheAllocation, init: InitPolicy,
                 unicast: bool = False, E: np.ndarray | None = None) -> DeliveryPlan:
    Fq, B = scenario.F_req, scenario.B
    if E is None:
        if init.kind == "full":
            E = np.ones((Fq, B))
        else:
            E = stream(init.seed, STREAM_INIT).uniform(0.0, 1.0, (Fq, B))
    E = np.asarray(E, float)
    V = matched_filter_init(E, scenario, init.power_fraction)
    U, _ = update_combiners(V, scenario)
    sh = _shares(E, cache, scenario, unicast)
    return DeliveryPlan(E, V, U, T=sh) if unicast else DeliveryPlan(E, V, U, t=sh)


SNAP_TOL = 1e-7


def _snap(E: np.ndarray) -> np.ndarray:
    """Put clustering entries within SNAP_TOL of 0 or 1 exactly on the bound.

    Interior-point iterates stay strictly inside [0, 1]; under a large
    penalty weight that residue alone would dominate lambda * h1.
    """
    E = np.clip(E, 0.0, 1.0)
    E = np.where(E < SNAP_TOL, 0.0, E)
    return np.where(E > 1.0 - SNAP_TOL, 1.0, E)


def _project_power(V, E, P):
    """Scale away solver round-off so budgets hold exactly."""
    V = V.copy()
    link = np.sum(np.abs(V) ** 2, axis=2)
    cap = E * P[None, :]
    over = link > cap
    if np.any(over):
        scale = np.sqrt(np.where(over, cap / np.where(link > 0, link, 1.0), 1.0))
        V *= scale[:, :, None]
    tot = np.sum(np.abs(V) ** 2, axis=(0, 2))
    over = tot > P
    if np.any(over):
        V[:, over, :] *= np.sqrt(P[over] / tot[over])[None, :, None]
    return V


def _saturate_power(V, E, P):
    """Scale all beamformers by the largest common factor the budgets allow.

    With the combiners fixed, a common factor s >= 1 keeps every
    signal-to-interference ratio and shrinks the relative noise, so no rate
    decreases.  The SCA step alone raises |D_k| by at most a factor
    (1 + 1/SINR_k) per iteration, which stalls high-SINR links below full power.
    """
    link = np.sum(np.abs(V) ** 2, axis=2)
    tot = link.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        caps = np.concatenate([np.where(tot > 0, P / tot, np.inf).ravel(),
                               np.where(link > 0, E * P[None, :] / link, np.inf).ravel()])
    s2 = float(np.min(caps, initial=np.inf))
    if not np.isfinite(s2) or s2 <= 1.0:
        return V
    # stay a hair inside the budgets so round-off never breaks them
    return V * math.sqrt(s2 * (1.0 - 1e-12))


# -- penalized block coordinate update ----------------------------------


def run_bcu(scenario: NetworkScenario, cache: CacheAllocation, schedule: PenaltySchedule = PenaltySchedule(),
            init: InitPolicy = InitPolicy(), stop: StopRule = StopRule(), *, unicast: bool = False,
            fixed_E: np.ndarray | None = None, warm: DeliveryPlan | None = None, polish: bool = True,
            keep_start: bool = True, engine: str = "native", tol: float = 1e-8) -> BcuResult:
    """Inexact BCU-SCA.

    With ``fixed_E`` only (V, U, t) are optimized and the penalty is off;
    a single-SBS scenario is always run this way, its clustering being forced.
    ``warm`` supplies the starting (V, U); its beamformers on links that
    ``fixed_E`` switches off are zeroed.  With free E the relaxed result is
    thresholded at 1/2 (rows left empty get their largest entry) and, if
    ``polish`` is set, refined by a fixed-E run from the current iterate.
    With ``keep_start`` and the full-cooperation start, the polished plan is
    also compared with the start itself refined at E = 1, and the better of
    the two is returned.
    """
    P = scenario.params.power
    if fixed_E is None and scenario.B == 1:
        # every group must be served by the only SBS: the clustering is forced
        fixed_E = np.ones((scenario.F_req, 1))
    free = fixed_E is None
    if warm is not None:
        E = np.asarray(fixed_E if not free else warm.E, float).copy()
        V = warm.V * (E[:, :, None] > 0) if not free else warm.V.copy()
        U, _ = update_combiners(V, scenario)
        shares = _shares(E, cache, scenario, unicast)
    else:
        plan0 = initial_plan(scenario, cache, init, unicast, None if free else fixed_E)
        E, V, U = plan0.E, plan0.V, plan0.U
        shares = plan0.T if unicast else plan0.t
    Z = update_Z(E) if free else None

    trace: list[TraceRow] = []
    lam = schedule.at(0) if free else 0.0
    obj, T_E, T_F = r1_objective(U, V, E, shares, Z, lam, scenario, cache)
    trace.append(TraceRow(0, obj, lam, binarity_gap(E), T_E, T_F, True))
    calm = 0
    for it in range(stop.max_iters):
        lam = schedule.at(it) if free else 0.0
        prev, _, _ = r1_objective(U, V, E, shares, Z, lam, scenario, cache)
        state = R2State(U, V, shares, Z)
        # a rejected free-E step is retried with E held: under a large penalty
        # weight the penalty terms swamp the latency part of the subproblem
        # a binary E under a penalty weight above the current latency is frozen:
        # any fractional move costs more than it could gain, and the free-E
        # subproblem is badly degenerate there
        frozen = free and binarity_gap(E) == 0.0 and lam > prev
        attempts = [(lam, None), (0.0, E)] if free and not frozen else [(0.0, E)]
        accepted, bump = False, 0.0
        for lam_r2, fix in attempts:
            prog, lay = build_r2(scenario, cache, state, lam_r2, fix)
            res = solve(prog, tol=tol, engine=engine)
            if res.status not in ("optimal", "max-iters") or not np.all(np.isfinite(res.x)):
                continue
            sol = decode_r2(res.x, prog, lay, scenario, fix)
            En = _snap(sol.E) if fix is None else E
            Vn = _project_power(sol.V, En, P)
            cand, _, _ = r1_objective(U, Vn, En, shares, Z, lam, scenario, cache)
            if cand <= prev:
                V, E, accepted = Vn, En, True
                break
            bump = bump or cand - prev
        Vs = _saturate_power(V, E, P)
        if Vs is not V and r1_objective(U, Vs, E, shares, Z, lam, scenario, cache)[0] <= \
                r1_objective(U, V, E, shares, Z, lam, scenario, cache)[0]:
            V = Vs
        U, _ = update_combiners(V, scenario)
        t_new = _shares(E, cache, scenario, unicast)
        # the closed form ignores tau0; keep the old shares if it is not better
        if fronthaul_latency(E, t_new, cache, scenario) <= fronthaul_latency(E, shares, cache, scenario):
            shares = t_new
        if free:
            Z = update_Z(E)
        obj, T_E, T_F = r1_objective(U, V, E, shares, Z, lam, scenario, cache)
        gap = binarity_gap(E)
        trace.append(TraceRow(it + 1, obj, lam, gap, T_E, T_F, accepted, bump))
        change = abs(prev - obj) / max(abs(prev), 1e-300)
        calm = calm + 1 if change < stop.rel_tol else 0
        # with the weight saturated, a calm objective means the remaining
        # fractional entries sit where the linearized penalty is flat (e = 1/2
        # on a face the latency terms do not distinguish); no later iteration
        # can move them, so thresholding resolves them now
        stalled = free and lam >= schedule.lam_max
        if calm >= stop.patience and (gap < stop.binarity_tol or stalled):
            break

    relaxed = E.copy()
    repaired = False
    if free:
        Eb = (E >= 0.5).astype(float)
        for i in np.flatnonzero(Eb.sum(axis=1) == 0):
            Eb[i, int(np.argmax(E[i]))] = 1.0
            repaired = True
        V = V * (Eb[:, :, None] > 0)
        E = Eb
        shares = _shares(E, cache, scenario, unicast)
        U, _ = update_combiners(V, scenario)
        plan = DeliveryPlan(E, V, U, T=shares) if unicast else DeliveryPlan(E, V, U, t=shares)
        if polish:
            pol = run_bcu(scenario, cache, schedule, init, stop, unicast=unicast, fixed_E=E, warm=plan,
                          engine=engine, tol=tol)
            pol.trace = trace + [TraceRow(len(trace) + r.iteration, r.objective, 0.0, 0.0, r.T_E, r.T_F,
                                          r.accepted, r.rejected_increase) for r in pol.trace[1:]]
            pol.relaxed_E = relaxed
            pol.repaired = repaired
            if keep_start and init.kind == "full" and not np.all(E == 1.0):
                # the growing penalty can settle on a clustering worse than the
                # one it started from; the start is a valid plan, so keep it
                start = run_bcu(scenario, cache, schedule, init, stop, unicast=unicast,
                                fixed_E=np.ones_like(E), engine=engine, tol=tol)
                if start.total < pol.total:
                    pol.plan, pol.report = start.plan, start.report
                    pol.kept_start = True
            return pol
    plan = DeliveryPlan(E, V, U, T=shares) if unicast else DeliveryPlan(E, V, U, t=shares)
    return BcuResult(plan, total_latency(plan, scenario, cache), trace, relaxed, repaired)


# -- greedy cluster pruning ---------------------------------------------


def run_gbsc(plan0: DeliveryPlan, scenario: NetworkScenario, cache: CacheAllocation,
             stop: StopRule = StopRule(), *, unicast: bool = False, engine: str = "native",
             tol: float = 1e-8, executor=None) -> BcuResult:
    """Greedy removal of serving links starting from a binary clustering.

    Each candidate removal is scored by a fixed-E BCU run warm-started from
    the current plan.  As in the greedy rule, the best removal of the first
    round is always taken (T_min starts at +inf) and later rounds continue
    only while they improve; the best plan seen, including ``plan0``, is
    returned.
    """
    E0 = np.asarray(plan0.E, float)
    if np.any((E0 != 0) & (E0 != 1)) or np.any(E0.sum(axis=1) < 1):
        raise ValueError("GBSC needs a binary, feasible clustering")

    def score(E, warm):
        return run_bcu(scenario, cache, stop=stop, unicast=unicast, fixed_E=E, warm=warm,
                       engine=engine, tol=tol)

    best_plan = plan0
    best_total = total_latency(plan0, scenario, cache).total
    best_res = None
    cur_plan, cur_E = plan0, E0.copy()
    t_min = math.inf
    while True:
        cands = []
        for i, b in zip(*np.nonzero(cur_E)):
            if cur_E[i].sum() >= 2:
                E = cur_E.copy()
                E[i, b] = 0.0
                cands.append(E)
        if not cands:
            break
        if executor is not None:
            results = list(executor.map(lambda E: score(E, cur_plan), cands))
        else:
            results = [score(E, cur_plan) for E in cands]
        j = int(np.argmin([r.total for r in results]))
        r = results[j]
        if not r.total < t_min:
            break
        t_min = r.total
        cur_plan, cur_E = r.plan, cands[j]
        if r.total < best_total:
            best_plan, best_total, best_res = r.plan, r.total, r
    if best_res is None:
        return BcuResult(best_plan, total_latency(best_plan, scenario, cache), [], None, False)
    return best_res
