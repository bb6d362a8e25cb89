"""Brute-force reference computations used by the tests and ``mdsdelivery oracle``.

Each oracle recomputes a quantity by a method unrelated to the production
code path (grid search, sampling, eigen-solver, enumeration).  The
exhaustive clustering search is the exception: by design it shares the
convex machinery and only replaces the clustering search.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.linalg as la

from ..network import Library, RadioParams, make_scenario


def simplex_grid_min_latency(loads, capacity: float, step: float = 0.005) -> float:
    """min over a ``step``-grid of the simplex of max_f s_f / (t_f C_F).

    Every grid point is evaluated; the last two free coordinates are
    enumerated as an array, the others by an explicit loop.
    """
    s = np.asarray(loads, float)
    F = s.size
    n = int(round(1.0 / step))
    if F == 1:
        return float(s[0] / capacity)
    inner = min(F - 1, 2)
    axes = np.indices((n + 1,) * inner).reshape(inner, -1)
    best = math.inf
    for head in itertools.product(range(n + 1), repeat=F - 1 - inner):
        rem = n - sum(head)
        if rem < 0:
            continue
        last = rem - axes.sum(axis=0)
        ok = last >= 0
        t = np.vstack([np.repeat(np.array(head, float)[:, None], ok.sum(), axis=1), axes[:, ok],
                       last[ok][None, :]]) / n
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(s[:, None] > 0, s[:, None] / (t * capacity), 0.0)
        best = min(best, float(r.max(axis=0).min()))
    return best


def sinr(u, a, J) -> float:
    """|u^H a|^2 / (u^H J u)."""
    return float(abs(np.vdot(u, a)) ** 2 / np.real(np.vdot(u, J @ u)))


def geneig_sinr(a, J) -> float:
    """Top generalized eigenvalue of (a a^H, J): the best SINR over all combiners."""
    w = la.eigh(np.outer(a, a.conj()), J, eigvals_only=True)
    return float(w[-1])


def random_direction_sinr(a, J, n: int, rng: np.random.Generator) -> float:
    """Largest SINR over ``n`` random unit combiners."""
    N = a.size
    Z = rng.standard_normal((n, N)) + 1j * rng.standard_normal((n, N))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    num = np.abs(Z.conj() @ a) ** 2
    den = np.real(np.einsum("in,nm,im->i", Z.conj(), J, Z))
    return float(np.max(num / den))


def sample_h1(n: int, shape, rng: np.random.Generator):
    """Random (E, Z) feasible for 0 <= E <= 1 and ||2Z - 1||_F^2 <= |E|, with h1 values.

    Half of the draws put E near binary points and Z near E, so the small-h1
    region is exercised as well.
    """
    size = int(np.prod(shape))
    out = []
    for i in range(n):
        if i % 2:
            E = rng.integers(0, 2, size).astype(float)
            E = np.clip(E + rng.normal(0, 10.0 ** rng.uniform(-12, -1), size), 0, 1)
        else:
            E = rng.uniform(0, 1, size)
        D = rng.normal(size=size)
        if i % 2:
            D = (2 * E - 1) + rng.normal(0, 10.0 ** rng.uniform(-12, -1), size)
        # pull 2Z - 1 into the ball of radius sqrt(|E|)
        r = math.sqrt(size) * min(1.0, rng.uniform(0.5, 1.2))
        D = D * min(1.0, r / max(np.linalg.norm(D), 1e-300))
        Z = (D + 1) / 2
        h1 = size - float(np.sum((2 * E - 1) * (2 * Z - 1)))
        out.append((E.reshape(shape), Z.reshape(shape), h1))
    return out


def best_sampled_z_score(E, n: int, rng: np.random.Generator) -> float:
    """Largest <2E-1, 2Z-1> over ``n`` random Z on or inside the ball ||2Z-1||_F^2 <= |E|."""
    E = np.asarray(E, float).ravel()
    d = E.size
    D = rng.normal(size=(n, d))
    D *= (math.sqrt(d) * rng.uniform(0, 1, (n, 1)) ** (1.0 / d)) / np.linalg.norm(D, axis=1, keepdims=True)
    return float(np.max(D @ (2 * E - 1)))


def single_link_edge_latency(H, power: float, noise: float, file_size: float, bandwidth: float) -> float:
    """S / (B0 log2(1 + P sigma_max(H)^2 / noise)): the best single-link edge latency."""
    smax = float(np.linalg.svd(H, compute_uv=False)[0])
    return file_size / (bandwidth * math.log2(1.0 + power * smax ** 2 / noise))


def enumerate_group_rate(H_list, u_list, V, members, noise: float, bandwidth: float) -> float:
    """Min over the members of a group of their rate, each computed term by term."""
    rates = []
    for k, (Hk, uk, i_k) in members:
        sig = abs(np.vdot(uk, Hk @ V[i_k])) ** 2
        interf = sum(abs(np.vdot(uk, Hk @ V[j])) ** 2 for j in range(len(V)) if j != i_k)
        rates.append(bandwidth * math.log2(1.0 + sig / (interf + noise)))
    return min(rates)


def grid_socp(c, cons, box: float, step: float):
    """min c x over a grid of [-box, box]^n subject to callables cons(x) >= 0.

    Only meant for programs with two or three variables.
    """
    axis = np.arange(-box, box + step / 2, step)
    best, arg = math.inf, None
    for x in itertools.product(axis, repeat=len(c)):
        x = np.array(x)
        if all(g(x) >= 0 for g in cons):
            v = float(np.dot(c, x))
            if v < best:
                best, arg = v, x
    return best, arg


def feasible_clusterings(F_req: int, B: int):
    """Every binary F_req x B matrix with no empty row."""
    rows = [r for r in itertools.product((0.0, 1.0), repeat=B) if any(r)]
    for combo in itertools.product(rows, repeat=F_req):
        yield np.array(combo, float)


def exhaustive_clustering(scenario, cache, unicast: bool = False, **bcu_kw):
    """Best fixed-E BCU total over every feasible binary clustering.

    Returns (best total, best E, list of (E, total)).
    """
    from ..optimizer import run_bcu

    results = []
    for E in feasible_clusterings(scenario.F_req, scenario.B):
        r = run_bcu(scenario, cache, unicast=unicast, fixed_E=E, **bcu_kw)
        results.append((E, r.total))
    E_best, t_best = min(results, key=lambda p: p[1])
    return t_best, E_best, results


def _demo_rng(seed: int = 0):
    return np.random.default_rng(seed)


def demo(name: str, seed: int = 0) -> dict:
    """Run one oracle on a seeded random instance and return its reference values."""
    rng = _demo_rng(seed)
    if name == "bandwidth-grid":
        loads = rng.uniform(0.1, 1.0, 3) * 1e8
        return {"loads": loads.tolist(), "grid_min_latency": simplex_grid_min_latency(loads, 10e6),
                "closed_form_latency": float(loads.sum() / 10e6)}
    if name == "combiner-eig":
        N = 3
        a = rng.normal(size=N) + 1j * rng.normal(size=N)
        X = rng.normal(size=(N, 4)) + 1j * rng.normal(size=(N, 4))
        J = X @ X.conj().T + np.eye(N)
        return {"generalized_eigenvalue": geneig_sinr(a, J),
                "best_of_1000_random": random_direction_sinr(a, J, 1000, rng)}
    if name == "h1-sampling":
        vals = [h for _, _, h in sample_h1(10_000, (2, 3), rng)]
        return {"min_h1": float(min(vals)), "samples": len(vals)}
    if name == "z-sampling":
        E = rng.uniform(0, 1, (2, 2))
        D = 2 * E - 1
        return {"E": E.tolist(), "closed_form_score": float(math.sqrt(E.size) * np.linalg.norm(D)),
                "best_sampled_score": best_sampled_z_score(E, 100_000, rng)}
    if name == "single-link":
        p = RadioParams(num_sbs=1, num_users=1)
        sc = make_scenario(p, Library(num_files=1), seed=seed)
        H = sc.channels.H[0, 0]
        return {"T_E": single_link_edge_latency(H, float(p.power[0]), p.noise_power, sc.library.file_size,
                                                p.edge_bandwidth)}
    if name == "exhaustive-e":
        from ..caching import probc_place

        p = RadioParams(num_sbs=2, num_users=2)
        lib = Library()
        sc = make_scenario(p, lib, seed=seed)
        cache = probc_place(lib, 2, 0.2, seed=seed)
        best, E, res = exhaustive_clustering(sc, cache)
        return {"best_total": best, "best_E": E.tolist(),
                "all": [(e.astype(int).tolist(), t) for e, t in res]}
    raise KeyError(name)


ORACLES = ("bandwidth-grid", "combiner-eig", "h1-sampling", "z-sampling", "single-link", "exhaustive-e")
