"""Pure-numpy cone kernels.

Every routine works on a packed vector laid out as ``l`` nonnegative
coordinates followed by second-order cones whose absolute start indices are
``offs[0] .. offs[-2]`` (``offs[-1]`` is the total length).  The compiled
module ``_kernels`` exposes the same functions with the same signatures.
"""

import math

import numpy as np


def nt_scaling(s, z, l, offs):
    """Nesterov-Todd scaling point for the pair ``(s, z)``.

    Returns ``(d, beta, wbar, lmbda)`` where ``d`` scales the orthant,
    ``beta``/``wbar`` describe each second-order block and ``lmbda = W z``.
    """
    nsoc = len(offs) - 1
    d = np.sqrt(s[:l] / z[:l])
    beta = np.empty(nsoc)
    wbar = np.empty(len(s) - l)
    lmbda = np.empty(len(s))
    lmbda[:l] = np.sqrt(s[:l] * z[:l])
    for i in range(nsoc):
        a, b = offs[i], offs[i + 1]
        si, zi = s[a:b], z[a:b]
        sn = math.sqrt(max(si[0] ** 2 - si[1:] @ si[1:], 1e-300))
        zn = math.sqrt(max(zi[0] ** 2 - zi[1:] @ zi[1:], 1e-300))
        sb = si / sn
        zb = zi / zn
        gamma = math.sqrt(max((1.0 + sb @ zb) / 2.0, 1e-300))
        w = np.empty(b - a)
        w[0] = (sb[0] + zb[0]) / (2.0 * gamma)
        w[1:] = (sb[1:] - zb[1:]) / (2.0 * gamma)
        beta[i] = math.sqrt(sn / zn)
        wbar[a - l:b - l] = w
        # lambda = W z, expressed through the normalized pair for accuracy
        lm = np.empty(b - a)
        lm[0] = gamma
        lm[1:] = ((gamma + zb[0]) * sb[1:] + (gamma + sb[0]) * zb[1:]) / (
            sb[0] + zb[0] + 2.0 * gamma)
        lmbda[a:b] = math.sqrt(sn * zn) * lm
    return d, beta, wbar, lmbda


def scale(d, beta, wbar, l, offs, x, inverse):
    """Apply ``W`` (or ``W^{-1}``) to a packed vector."""
    y = np.empty_like(x)
    y[:l] = x[:l] / d if inverse else x[:l] * d
    sgn = -1.0 if inverse else 1.0
    for i in range(len(offs) - 1):
        a, b = offs[i], offs[i + 1]
        w = wbar[a - l:b - l]
        xi = x[a:b]
        t = w[1:] @ xi[1:]
        f = beta[i] ** (-1 if inverse else 1)
        y[a] = f * (w[0] * xi[0] + sgn * t)
        y[a + 1:b] = f * (xi[1:] + (sgn * xi[0] + t / (1.0 + w[0])) * w[1:])
    return y


def scale_rows(d, beta, wbar, l, offs, G, inverse):
    """Apply ``W`` (or ``W^{-1}``) to every column of a dense matrix."""
    Y = np.empty_like(G)
    Y[:l] = G[:l] / d[:, None] if inverse else G[:l] * d[:, None]
    sgn = -1.0 if inverse else 1.0
    for i in range(len(offs) - 1):
        a, b = offs[i], offs[i + 1]
        w = wbar[a - l:b - l]
        Gi = G[a:b]
        t = w[1:] @ Gi[1:]
        f = beta[i] ** (-1 if inverse else 1)
        Y[a] = f * (w[0] * Gi[0] + sgn * t)
        Y[a + 1:b] = f * (Gi[1:] + np.outer(w[1:], sgn * Gi[0] + t / (1.0 + w[0])))
    return Y


def jprod(x, y, l, offs):
    """Jordan product ``x o y``."""
    r = np.empty_like(x)
    r[:l] = x[:l] * y[:l]
    for i in range(len(offs) - 1):
        a, b = offs[i], offs[i + 1]
        r[a] = x[a:b] @ y[a:b]
        r[a + 1:b] = x[a] * y[a + 1:b] + y[a] * x[a + 1:b]
    return r


def jdiv(lmbda, v, l, offs):
    """Solve ``lmbda o u = v`` for ``u``."""
    u = np.empty_like(v)
    u[:l] = v[:l] / lmbda[:l]
    for i in range(len(offs) - 1):
        a, b = offs[i], offs[i + 1]
        la, va = lmbda[a:b], v[a:b]
        det = la[0] ** 2 - la[1:] @ la[1:]
        u0 = (la[0] * va[0] - la[1:] @ va[1:]) / det
        u[a] = u0
        u[a + 1:b] = (va[1:] - u0 * la[1:]) / la[0]
    return u


def max_step(x, dx, l, offs):
    """Largest ``alpha >= 0`` keeping ``x + alpha dx`` in the cone (``inf`` if unbounded)."""
    alpha = math.inf
    if l:
        neg = dx[:l] < 0
        if neg.any():
            alpha = float(np.min(-x[:l][neg] / dx[:l][neg]))
    for i in range(len(offs) - 1):
        a, b = offs[i], offs[i + 1]
        xi, di = x[a:b], dx[a:b]
        qa = di[0] ** 2 - di[1:] @ di[1:]
        qb = 2.0 * (xi[0] * di[0] - xi[1:] @ di[1:])
        qc = xi[0] ** 2 - xi[1:] @ xi[1:]
        if qc <= 0.0:
            return 0.0
        disc = qb * qb - 4.0 * qa * qc
        if qa < 0.0:
            r = 2.0 * qc / (-qb + math.sqrt(disc))
        elif qb < 0.0 and disc >= 0.0:
            r = 2.0 * qc / (-qb + math.sqrt(disc))
        else:
            continue
        alpha = min(alpha, r)
    return alpha


def min_eig(x, l, offs):
    """Smallest Jordan eigenvalue over all blocks (``inf`` for an empty cone)."""
    m = math.inf
    if l:
        m = float(np.min(x[:l]))
    for i in range(len(offs) - 1):
        a, b = offs[i], offs[i + 1]
        m = min(m, x[a] - float(np.linalg.norm(x[a + 1:b])))
    return m
