"""Quadratic rate minorant and the conic encoding of the (V, E) subproblem.

For fixed combiner u_k the rate function phi(D, J) = ln(1 + |D|^2 / J) is
bounded below by the concave quadratic

    phi~(D', J') = q0 + 2 Re{D' q1*} - (|D'|^2 + J') q2,

which is tight at the expansion point (D_bar, J_bar).  Because
|D'|^2 + J' = sum_f |u^H H_k v_f|^2 + sigma^2, the bound is a concave
quadratic in the stacked beamformers and fits a rotated second-order cone.

All conic algebra runs on noise-whitened channels g_k = u_k^H H_k / sigma_k,
which leaves rates unchanged and keeps the program well scaled.  Rates in
the program are in nats per Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .caching import CacheAllocation
from .conic import ConicProgram
from .network import NetworkScenario


@dataclass(frozen=True)
class MinorantCoeffs:
    q0: float      # nats
    q1: complex
    q2: float      # >= 0
    D_bar: complex
    J_bar: float


def rate_nats(D, J):
    return np.log1p(np.abs(D) ** 2 / J)


def _coeffs(D_bar: complex, J_bar: float) -> MinorantCoeffs:
    a = abs(D_bar) ** 2
    phi = math.log1p(a / J_bar)
    q1 = D_bar / J_bar
    # 1/J - 1/(J + a) = a / (J (J + a)), written to avoid cancellation
    q2 = a / (J_bar * (J_bar + a))
    return MinorantCoeffs(phi - a / J_bar, q1, q2, D_bar, J_bar)


def whitened_rows(U: np.ndarray, scenario: NetworkScenario) -> np.ndarray:
    """g_k = u_k^H H_k / sigma_k, shape (K, M*B)."""
    Hk = scenario.channels.aggregates()
    return np.einsum("kn,knm->km", U.conj(), Hk) / math.sqrt(scenario.params.noise_power)


def minorant_coeffs(u: np.ndarray, V: np.ndarray, scenario: NetworkScenario, k: int) -> MinorantCoeffs:
    """Coefficients of phi~_k expanded at (u, V), in physical units (J in W)."""
    Hk = scenario.channels.aggregate(k)
    i_k = scenario.requests.group_index()[k]
    proj = np.array([u.conj() @ (Hk @ V[i].reshape(-1)) for i in range(V.shape[0])])
    D = complex(proj[i_k])
    J = float(np.sum(np.abs(proj) ** 2) - abs(D) ** 2 + scenario.params.noise_power)
    if J <= 0:
        raise ValueError("interference-plus-noise must be positive")
    return _coeffs(D, J)


def minorant_value(c: MinorantCoeffs, u: np.ndarray, V: np.ndarray, scenario: NetworkScenario, k: int) -> float:
    """phi~_k at beamformers V with the combiner held at u."""
    Hk = scenario.channels.aggregate(k)
    i_k = scenario.requests.group_index()[k]
    proj = np.array([u.conj() @ (Hk @ V[i].reshape(-1)) for i in range(V.shape[0])])
    Dp = proj[i_k]
    tot = float(np.sum(np.abs(proj) ** 2) + scenario.params.noise_power)  # |D'|^2 + J'
    return c.q0 + 2.0 * (Dp * np.conj(c.q1)).real - tot * c.q2


@dataclass
class R2State:
    """Expansion point for the subproblem: combiners, beamformers, shares, Z."""

    U: np.ndarray
    V: np.ndarray
    shares: np.ndarray          # t (F_req,) or T (F_req, B)
    Z: np.ndarray | None = None


class _Rows:
    """Accumulates one cone block as sparse triplets."""

    def __init__(self):
        self.r, self.c, self.v, self.b = [], [], [], []

    def row(self, cols=(), vals=(), const=0.0):
        i = len(self.b)
        self.r.extend([i] * len(cols))
        self.c.extend(cols)
        self.v.extend(vals)
        self.b.append(const)
        return i

    def add(self, cols, vals):
        """Add entries to the last row."""
        i = len(self.b) - 1
        self.r.extend([i] * len(cols))
        self.c.extend(cols)
        self.v.extend(vals)

    def matrix(self, n):
        return sp.csr_matrix((self.v, (self.r, self.c)), shape=(len(self.b), n)), np.array(self.b, float)


@dataclass
class R2Layout:
    pairs: list[tuple[int, int]]   # active (group row, SBS) pairs, in v order
    M: int
    free_E: bool
    n: int
    e_sign: np.ndarray | None = None
    e_off: np.ndarray | None = None

    def e_value(self, xe: np.ndarray) -> np.ndarray:
        return self.e_off + self.e_sign * xe

    def v_cols(self, p: int) -> np.ndarray:
        return np.arange(2 * self.M * p, 2 * self.M * (p + 1))

    @property
    def nv(self) -> int:
        return 2 * self.M * len(self.pairs)

    @property
    def e0(self) -> int:
        return self.nv

    @property
    def ne(self) -> int:
        return len(self.pairs) if self.free_E else 0


def build_r2(scenario: NetworkScenario, cache: CacheAllocation, state: R2State, lam: float = 0.0,
             fixed_E: np.ndarray | None = None) -> tuple[ConicProgram, R2Layout]:
    """Conic encoding of the (V, E, t_E, t_F, rho) subproblem at ``state``.

    With ``fixed_E`` the clustering variables and the penalty are dropped
    and only beamformers of active links remain.  ``state.shares`` selects
    multicast (vector) or unicast (matrix) fronthaul accounting.
    """
    p = scenario.params
    Fq, B, M, K = scenario.F_req, scenario.B, scenario.M, scenario.K
    if state.V.shape != (Fq, B, M) or state.U.shape != (K, p.user_antennas):
        raise ValueError("state shapes do not match the scenario")
    shares = np.asarray(state.shares, float)
    if shares.shape not in ((Fq,), (Fq, B)):
        raise ValueError(f"shares have shape {shares.shape}")
    free_E = fixed_E is None
    if free_E:
        if state.Z is None or state.Z.shape != (Fq, B):
            raise ValueError("free-E subproblem needs Z of shape (F_req, B)")
        pairs = [(i, b) for i in range(Fq) for b in range(B)]
    else:
        fixed_E = np.asarray(fixed_E)
        pairs = [(i, b) for i in range(Fq) for b in range(B) if fixed_E[i, b] > 0.5]
    npair = len(pairs)
    ne = npair if free_E else 0
    nv = 2 * M * npair
    o_e, o_rho = nv, nv + ne
    o_tE, o_tF = o_rho + K, o_rho + K + 1
    n = o_tF + 1
    pidx = {pr: j for j, pr in enumerate(pairs)}

    P = p.power
    mres = cache.residual[list(scenario.requests.files)]
    gidx = scenario.requests.group_index()
    G = whitened_rows(state.U, scenario)           # K x MB
    Vbar = state.V

    c = np.zeros(n)
    c[o_tE] = p.alpha_e
    c[o_tF] = p.alpha_f
    const = 0.0
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[o_tF] = 0.0
    # e_{f,b} = off + sign * x: entries whose Z leans to 1 are carried as
    # 1 - e so that c @ x stays on the scale of the latency, not of lambda
    sign = np.ones(ne)
    off = np.zeros(ne)
    if free_E:
        zz = 2.0 * state.Z - 1.0
        for j, (i, b) in enumerate(pairs):
            if zz[i, b] > 0:
                sign[j], off[j] = -1.0, 1.0
            c[o_e + j] = -2.0 * lam * zz[i, b] * sign[j]
        const = lam * (B * Fq + zz.sum()) - 2.0 * lam * sum(zz[i, b] * off[j] for j, (i, b) in enumerate(pairs))
        lb[o_e:o_e + ne] = 0.0
        ub[o_e:o_e + ne] = 1.0
    lay = R2Layout(pairs, M, free_E, n, sign, off)

    prog = ConicProgram(n=n, c=c, const=const, lb=lb, ub=ub,
                        slices={"v": slice(0, nv), "e": slice(o_e, o_e + ne), "rho": slice(o_rho, o_rho + K),
                                "t_E": slice(o_tE, o_tE + 1), "t_F": slice(o_tF, o_tF + 1)})

    # per-SBS power: sqrt(P_b) >= ||v_{., b}||
    for b in range(B):
        js = [j for j, (_, bb) in enumerate(pairs) if bb == b]
        if not js:
            continue
        rows = _Rows()
        rows.row(const=math.sqrt(P[b]))
        for j in js:
            for col in lay.v_cols(j):
                rows.row([col], [1.0])
        prog.add("soc", *rows.matrix(n), name=f"power{b}")

    if free_E:
        # coupling: 2 (e P_b)(1/2) >= ||v_{f,b}||^2
        for j, (i, b) in enumerate(pairs):
            rows = _Rows()
            rows.row([o_e + j], [P[b] * sign[j]], P[b] * off[j])
            rows.row(const=0.5)
            for col in lay.v_cols(j):
                rows.row([col], [1.0])
            prog.add("rsoc", *rows.matrix(n), name=f"couple{i},{b}")
        # every requested file keeps at least one serving SBS
        rows = _Rows()
        for i in range(Fq):
            js = [pidx[(i, b)] for b in range(B)]
            rows.row([o_e + j for j in js], [sign[j] for j in js], sum(off[j] for j in js) - 1.0)
        prog.add("nonneg", *rows.matrix(n), name="served")

    # fronthaul latency epigraph
    den = (shares[:, None] if shares.ndim == 1 else shares) * p.fronthaul_capacity + p.tau0
    coef = mres / den
    if free_E:
        rows = _Rows()
        for j, (i, b) in enumerate(pairs):
            if coef[i, b] > 0:
                rows.row([o_tF, o_e + j], [1.0, -coef[i, b] * sign[j]], -coef[i, b] * off[j])
        if rows.b:
            prog.add("nonneg", *rows.matrix(n), name="t_F")
    else:
        floor_tF = max((coef[i, b] for i, b in pairs), default=0.0)
        prog.lb[o_tF] = max(0.0, floor_tF)

    # edge latency: t_E rho_k >= S ln2 / B0, as 2 t_E rho_k >= 2 s_hat
    s_hat = scenario.library.file_size * math.log(2.0) / p.edge_bandwidth
    for k in range(K):
        rows = _Rows()
        rows.row([o_tE], [1.0])
        rows.row([o_rho + k], [1.0])
        rows.row(const=math.sqrt(2.0 * s_hat))
        prog.add("rsoc", *rows.matrix(n), name=f"rate{k}")

    # rate minorants
    for k in range(K):
        g = G[k].reshape(B, M)
        ik = gidx[k]
        proj = np.array([G[k] @ Vbar[i].reshape(-1) for i in range(Fq)])
        D_bar = complex(proj[ik])
        J_bar = float(np.sum(np.abs(proj) ** 2) - abs(D_bar) ** 2 + 1.0)
        co = _coeffs(D_bar, J_bar)

        def lin(i, part):
            """Columns/values of Re (part 0) or Im (part 1) of g_k v_i."""
            cols, vals = [], []
            for b in range(B):
                j = pidx.get((i, b))
                if j is None:
                    continue
                vc = lay.v_cols(j)
                gr, gi = g[b].real, g[b].imag
                if part == 0:
                    cols += list(vc[:M]) + list(vc[M:])
                    vals += list(gr) + list(-gi)
                else:
                    cols += list(vc[:M]) + list(vc[M:])
                    vals += list(gi) + list(gr)
            return cols, vals

        rows = _Rows()
        # u0 = q0 - q2 + 2 Re{D' q1*} - rho_k
        rows.row([o_rho + k], [-1.0], co.q0 - co.q2)
        cr, vr = lin(ik, 0)
        ci, vi = lin(ik, 1)
        rows.add(cr, list(2.0 * co.q1.real * np.asarray(vr)))
        rows.add(ci, list(2.0 * co.q1.imag * np.asarray(vi)))
        if co.q2 <= 0.0:
            prog.add("nonneg", *rows.matrix(n), name=f"minorant{k}")
            continue
        rows.row(const=0.5)
        sq = math.sqrt(co.q2)
        for i in range(Fq):
            for part in (0, 1):
                cols, vals = lin(i, part)
                if cols:
                    rows.row(cols, list(sq * np.asarray(vals)))
        prog.add("rsoc", *rows.matrix(n), name=f"minorant{k}")

    return prog, lay


@dataclass
class R2Solution:
    V: np.ndarray
    E: np.ndarray
    rho: np.ndarray
    t_E: float
    t_F: float
    objective: float


def decode_r2(x: np.ndarray, prog: ConicProgram, lay: R2Layout, scenario: NetworkScenario,
              fixed_E: np.ndarray | None = None, objective: float | None = None) -> R2Solution:
    Fq, B, M = scenario.F_req, scenario.B, scenario.M
    V = np.zeros((Fq, B, M), dtype=complex)
    for j, (i, b) in enumerate(lay.pairs):
        vc = x[lay.v_cols(j)]
        V[i, b] = vc[:M] + 1j * vc[M:]
    if lay.free_E:
        E = np.zeros((Fq, B))
        ev = np.clip(lay.e_value(prog.part(x, "e")), 0.0, 1.0)
        for j, (i, b) in enumerate(lay.pairs):
            E[i, b] = ev[j]
    else:
        E = np.asarray(fixed_E, float).copy()
    return R2Solution(V, E, prog.part(x, "rho").copy(), float(prog.part(x, "t_E")[0]),
                      float(prog.part(x, "t_F")[0]),
                      prog.objective(x) if objective is None else objective)


def encode_point(lay: R2Layout, prog: ConicProgram, V: np.ndarray, E: np.ndarray | None,
                 rho: np.ndarray, t_E: float, t_F: float) -> np.ndarray:
    """Decision vector for a given (V, E, rho, t_E, t_F); inverse of ``decode_r2``."""
    x = np.zeros(lay.n)
    M = lay.M
    for j, (i, b) in enumerate(lay.pairs):
        vc = lay.v_cols(j)
        x[vc[:M]] = V[i, b].real
        x[vc[M:]] = V[i, b].imag
        if lay.free_E:
            x[lay.e0 + j] = (E[i, b] - lay.e_off[j]) * lay.e_sign[j]
    x[prog.slices["rho"]] = rho
    x[prog.slices["t_E"]] = t_E
    x[prog.slices["t_F"]] = t_F
    return x
