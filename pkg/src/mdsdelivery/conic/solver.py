"""Primal-dual interior-point solver for nonnegative / second-order cone programs.

The native engine runs a homogeneous self-dual embedding with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step.  Each
iteration solves the scaled KKT system through dense normal equations,
which suits the few-hundred-variable programs produced for desk-scale
scenarios.  ``engine="clarabel"`` hands the same standardized data to the
Clarabel solver for larger instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .program import ConicProgram

STATUSES = ("optimal", "infeasible", "unbounded", "max-iters")
_SQRT_HALF = math.sqrt(0.5)
_REFINE_STEPS = 4


@dataclass
class SolveResult:
    status: str
    x: np.ndarray
    objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    z: np.ndarray | None = None
    certificate: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


@dataclass
class StandardForm:
    """``min c x  s.t.  G x + s = h,  s in R+^l x Q^{q1} x ...``"""

    c: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    l: int
    soc_dims: list[int]
    row_scale: np.ndarray | None = None  # G, h rows were multiplied by this

    @property
    def offs(self) -> np.ndarray:
        return np.cumsum([self.l] + list(self.soc_dims)).astype(np.int64)


def _row_max_abs(A: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    """Per row, the largest magnitude in [A b]."""
    big = np.abs(b).astype(float)
    nnz = np.diff(A.indptr)
    rows = np.flatnonzero(nnz)
    if rows.size:
        big[rows] = np.maximum(big[rows], np.maximum.reduceat(np.abs(A.data), A.indptr[rows]))
    return big


def _rsoc_rotation(kinds_rows: list[tuple[str, int]], start: int, m: int) -> sp.csr_matrix:
    """Block-diagonal map taking (u0, u1, u2) to ((u0+u1)/sqrt2, (u0-u1)/sqrt2, u2) for rsoc blocks.

    The image of the rotated cone under this map is the standard second-order cone.
    """
    diag = np.ones(m)
    ri, ci, vals = [], [], []
    pos = start
    for kind, r in kinds_rows:
        if kind == "rsoc":
            diag[pos + 1] = -1.0
            diag[pos] = diag[pos + 1] = 0.0
            ri += [pos, pos, pos + 1, pos + 1]
            ci += [pos, pos + 1, pos, pos + 1]
            vals += [_SQRT_HALF, _SQRT_HALF, _SQRT_HALF, -_SQRT_HALF]
        pos += r
    d = np.flatnonzero(diag)
    T = sp.coo_matrix((np.concatenate([diag[d], vals]), (np.concatenate([d, ri]), np.concatenate([d, ci]))),
                      shape=(m, m))
    return T.tocsr()


def standardize(prog: ConicProgram, equilibrate: bool = True) -> StandardForm:
    """Stack the blocks as ``G x + s = h`` with the orthant rows first.

    With ``equilibrate`` every row is multiplied by a positive factor that
    brings the largest entry of its [A b] row to 1.  Orthant rows get their
    own factor, while the rows of a second-order block share one, since cones
    are invariant under positive scaling.
    """
    n = prog.n
    lin = [blk for blk in prog.blocks if blk.kind == "nonneg"]
    con = [blk for blk in prog.blocks if blk.kind != "nonneg"]
    mats = [blk.A for blk in lin]
    vecs = [blk.b for blk in lin]
    eye = sp.identity(n, format="csr")
    for bound, sign in ((prog.lb, 1.0), (prog.ub, -1.0)):
        if bound is not None:
            fin = np.flatnonzero(np.isfinite(bound))
            mats.append(sign * eye[fin])
            vecs.append(-sign * bound[fin])
    l = int(sum(a.shape[0] for a in mats))
    mats += [blk.A for blk in con]
    vecs += [blk.b for blk in con]
    dims = [blk.rows for blk in con]
    if mats:
        A = sp.vstack(mats, format="csr")
        b = np.concatenate(vecs).astype(float)
    else:
        A = sp.csr_matrix((0, n))
        b = np.zeros(0)
    m = A.shape[0]
    if any(blk.kind == "rsoc" for blk in con):
        T = _rsoc_rotation([(blk.kind, blk.rows) for blk in con], l, m)
        A, b = (T @ A).tocsr(), T @ b
    if equilibrate and m:
        big = _row_max_abs(A, b)
        scale = 1.0 / np.where(big > 0, big, 1.0)
        if dims:
            starts = np.cumsum([l] + dims[:-1])
            top = np.maximum.reduceat(big[l:], starts - l)
            scale[l:] = np.repeat(1.0 / np.where(top > 0, top, 1.0), dims)
        A = sp.diags(scale) @ A
        b = scale * b
    else:
        scale = np.ones(m)
    return StandardForm(c=prog.c.copy(), G=sp.csr_matrix(-A), h=b, l=l, soc_dims=dims, row_scale=scale)


def solve(prog: ConicProgram, tol: float = 1e-8, max_iters: int = 100,
          engine: str = "native", kernels=None, verbose: bool = False) -> SolveResult:
    """Solve ``prog`` to relative accuracy ``tol``.

    ``kernels`` overrides the cone-kernel module for the native engine
    (benchmarks use it to compare the compiled and pure-Python paths).
    """
    prog.validate()
    std = standardize(prog)
    if engine == "native":
        res = _native(std, tol, max_iters, kernels, verbose)
    elif engine == "clarabel":
        res = _clarabel(std, tol, max_iters)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    if std.row_scale is not None:
        # duals of the equilibrated rows back to the caller's scaling
        if res.z is not None:
            res.z = res.z * std.row_scale
        if res.status == "infeasible" and res.certificate is not None:
            res.certificate = res.certificate * std.row_scale
    res.objective += prog.const
    res.dual_objective += prog.const
    return res


def _unit(l: int, offs: np.ndarray, m: int) -> np.ndarray:
    e = np.zeros(m)
    e[:l] = 1.0
    e[offs[:-1]] = 1.0
    return e


def _native(std: StandardForm, tol: float, max_iters: int, K, verbose: bool = False) -> SolveResult:
    # near the cone boundary the scaled system can overflow; the iteration then
    # stops on a non-finite direction and the best iterate is reported
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _native_ipm(std, tol, max_iters, K, verbose)


def _native_ipm(std: StandardForm, tol: float, max_iters: int, K, verbose: bool) -> SolveResult:
    if K is None:
        from . import kernels as K
    c, h, l = std.c, std.h, std.l
    G = std.G.toarray()
    m, n = G.shape
    offs = std.offs
    nsoc = len(std.soc_dims)
    deg = l + nsoc
    e = _unit(l, offs, m)
    resx0 = max(1.0, float(np.linalg.norm(c)))
    resz0 = max(1.0, float(np.linalg.norm(h)))

    if m == 0:
        if np.any(c != 0):
            return SolveResult("unbounded", np.zeros(n), -math.inf, -math.inf, 0.0, 0.0, 0.0, 0,
                               certificate=-c / np.linalg.norm(c))
        return SolveResult("optimal", np.zeros(n), 0.0, 0.0, 0.0, 0.0, 0.0, 0)

    # starting point: least-squares primal / least-norm dual, shifted into the cone
    GtG = G.T @ G
    reg = 1e-12 * max(1.0, float(np.max(np.abs(np.diag(GtG)))) if n else 1.0)
    cho = la.cho_factor(GtG + reg * np.eye(n))
    x = la.cho_solve(cho, G.T @ h)
    s = h - G @ x
    z = -G @ la.cho_solve(cho, c)
    for v in (s, z):
        a = -K.min_eig(v, l, offs)
        if a >= -1e-8 * max(float(np.linalg.norm(v)), 1.0):
            v += (1.0 + a) * e
    tau = kappa = 1.0

    status = "max-iters"
    cert = None
    it = 0
    pres = dres = gap = math.inf
    best = None
    for it in range(max_iters + 1):
        rx = G.T @ z + c * tau
        rs = -(G @ x) + h * tau - s
        rk = -(c @ x) - (h @ z) - kappa
        sz = float(s @ z)
        mu = (sz + tau * kappa) / (deg + 1)
        pcost = float(c @ x) / tau
        dcost = -float(h @ z) / tau
        pres = float(np.linalg.norm(rs)) / tau / resz0
        dres = float(np.linalg.norm(rx)) / tau / resx0
        gap = sz / tau ** 2
        scale_obj = 1.0 + abs(pcost)
        if verbose:
            print(f"{it:3d} pcost {pcost: .9e} dcost {dcost: .9e} pres {pres:.2e} dres {dres:.2e} "
                  f"gap {gap:.2e} tau {tau:.2e} kappa {kappa:.2e}")
        merit = max(pres, dres, gap / scale_obj, abs(pcost - dcost) / scale_obj)
        if best is None or merit < best[0]:
            best = (merit, x / tau, z / tau, pres, dres, gap, it)
        if merit <= tol:
            status = "optimal"
            break
        hz = float(h @ z)
        if hz < 0:
            pinf = float(np.linalg.norm(G.T @ z)) / resx0 / -hz
            if pinf <= tol:
                status = "infeasible"
                cert = z / -hz
                break
        cx = float(c @ x)
        if cx < 0:
            dinf = float(np.linalg.norm(G @ x + s)) / resz0 / -cx
            if dinf <= tol:
                status = "unbounded"
                cert = x / -cx
                break
        if it == max_iters:
            break

        d, beta, wbar, lmbda = K.nt_scaling(s, z, l, offs)
        Gs = K.scale_rows(d, beta, wbar, l, offs, G, True)
        if merit > 1e-4:
            # far from optimal: Cholesky of the explicitly formed normal matrix
            H = Gs.T @ Gs
            H[np.diag_indices(n)] += 1e-13 * max(1.0, float(np.max(np.diag(H))))
            try:
                cf = la.cho_factor(H, check_finite=False)
            except la.LinAlgError:
                cf = None
        else:
            cf = None
        if cf is not None:
            def hsolve(v, cf=cf):
                return la.cho_solve(cf, v, check_finite=False)
        else:
            # near the boundary: H = R'R from a QR of Gs, which avoids
            # squaring the condition number of Gs
            R = la.qr(Gs, mode="r", check_finite=False)[0][:n]
            rdiag = np.abs(np.diag(R))
            floor = 1e-13 * max(1.0, float(rdiag.max()))
            if rdiag.min() < floor:
                R = R.copy()
                idx = np.flatnonzero(rdiag < floor)
                R[idx, idx] = np.where(R[idx, idx] < 0, -floor, floor)

            def hsolve(v, R=R):
                y = la.solve_triangular(R, v, trans="T", check_finite=False)
                return la.solve_triangular(R, y, check_finite=False)

        def kkt(a, b):
            # [0 G'; G -W^2] [dx; dz] = [a; b] via the normal equations, refined
            # on the unreduced system until the residual stops shrinking
            dx = np.zeros(n)
            dz = np.zeros(m)
            ra, rb = a, b
            rnorm = math.inf
            for _ in range(_REFINE_STEPS):
                bs = K.scale(d, beta, wbar, l, offs, rb, True)
                ddx = hsolve(ra + Gs.T @ bs)
                ddz = K.scale(d, beta, wbar, l, offs, Gs @ ddx - bs, True)
                nx, nz = dx + ddx, dz + ddz
                ra_n = a - G.T @ nz
                rb_n = b - (G @ nx - K.scale(d, beta, wbar, l, offs,
                                             K.scale(d, beta, wbar, l, offs, nz, False), False))
                rn = math.hypot(float(np.linalg.norm(ra_n)),
                                float(np.linalg.norm(K.scale(d, beta, wbar, l, offs, rb_n, True))))
                if rn >= rnorm:
                    break
                dx, dz, ra, rb, rnorm = nx, nz, ra_n, rb_n, rn
                if rn <= 1e-15 * (1.0 + float(np.linalg.norm(a))):
                    break
            return dx, dz

        dx1, dz1 = kkt(-c, h)
        wdz1 = K.scale(d, beta, wbar, l, offs, dz1, False)
        denom = float(wdz1 @ wdz1) + kappa / tau

        def direction(eta, ds_rhs, dk_rhs):
            r2 = eta * rs - K.scale(d, beta, wbar, l, offs, K.jdiv(lmbda, ds_rhs, l, offs), False)
            dx0, dz0 = kkt(-eta * rx, r2)
            dtau = (-eta * rk + c @ dx0 + h @ dz0 + dk_rhs / tau) / denom
            dx = dx0 + dtau * dx1
            dz = dz0 + dtau * dz1
            wdz = K.scale(d, beta, wbar, l, offs, dz, False)
            # ds from the linear primal row keeps the residual update exact
            ds = eta * rs - G @ dx + h * dtau
            ds_scaled = K.scale(d, beta, wbar, l, offs, ds, True)
            dkappa = (dk_rhs - kappa * dtau) / tau
            return dx, dz, ds, dtau, dkappa, ds_scaled, wdz

        def step_to_boundary(ds_scaled, wdz, dtau, dkappa):
            a = min(K.max_step(lmbda, ds_scaled, l, offs), K.max_step(lmbda, wdz, l, offs))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        lsq = K.jprod(lmbda, lmbda, l, offs)
        aff = direction(1.0, -lsq, -tau * kappa)
        a_aff = min(1.0, step_to_boundary(aff[5], aff[6], aff[3], aff[4]))
        sigma = (1.0 - a_aff) ** 3
        corr = K.jprod(aff[5], aff[6], l, offs)
        ds_rhs = -lsq + sigma * mu * e - corr
        dk_rhs = -tau * kappa + sigma * mu - aff[3] * aff[4]
        dx, dz, ds, dtau, dkappa, ds_scaled, wdz = direction(1.0 - sigma, ds_rhs, dk_rhs)
        if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dz)) and math.isfinite(dtau)):
            break
        amax = step_to_boundary(ds_scaled, wdz, dtau, dkappa)
        alpha = min(1.0, 0.99 * amax)
        if alpha < 1e-12:
            break
        x = x + alpha * dx
        z = z + alpha * dz
        s = s + alpha * ds
        tau += alpha * dtau
        kappa += alpha * dkappa
        # guard against drifting onto the cone boundary from rounding
        if K.min_eig(s, l, offs) <= 0 or K.min_eig(z, l, offs) <= 0:
            break

    if status in ("infeasible", "unbounded"):
        xo, zo = x / tau, z / tau
    else:
        # rounding can stall the final iterations; report the best certified iterate
        _, xo, zo, pres, dres, gap, _ = best
    return SolveResult(
        status=status,
        x=xo,
        objective=float(c @ xo),
        dual_objective=float(-h @ zo),
        primal_residual=pres,
        dual_residual=dres,
        gap=gap,
        iterations=it,
        z=zo,
        certificate=cert,
    )


def _clarabel(std: StandardForm, tol: float, max_iters: int) -> SolveResult:
    import clarabel

    n = std.c.shape[0]
    P = sp.csc_matrix((n, n))
    A = sp.csc_matrix(std.G)
    cones = []
    if std.l:
        cones.append(clarabel.NonnegativeConeT(std.l))
    cones.extend(clarabel.SecondOrderConeT(q) for q in std.soc_dims)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iters
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_infeas_abs = tol
    settings.tol_infeas_rel = tol
    sol = clarabel.DefaultSolver(P, std.c, A, std.h, cones, settings).solve()
    st = str(sol.status)
    if st in ("Solved", "AlmostSolved"):
        status = "optimal"
    elif "PrimalInfeasible" in st:
        status = "infeasible"
    elif "DualInfeasible" in st:
        status = "unbounded"
    else:
        status = "max-iters"
    x = np.asarray(sol.x)
    z = np.asarray(sol.z)
    s = np.asarray(sol.s)
    pres = float(np.linalg.norm(std.G @ x + s - std.h)) / max(1.0, float(np.linalg.norm(std.h)))
    dres = float(np.linalg.norm(std.G.T @ z + std.c)) / max(1.0, float(np.linalg.norm(std.c)))
    return SolveResult(
        status=status,
        x=x,
        objective=float(std.c @ x),
        dual_objective=float(-std.h @ z),
        primal_residual=pres,
        dual_residual=dres,
        gap=float(s @ z),
        iterations=int(sol.iterations),
        z=z,
    )
