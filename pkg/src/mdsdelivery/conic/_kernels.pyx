# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled cone kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


cdef inline double _dot(const double[:] x, const double[:] y, Py_ssize_t a, Py_ssize_t b) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(a, b):
        acc += x[j] * y[j]
    return acc


def nt_scaling(const double[:] s, const double[:] z, Py_ssize_t l, const cnp.int64_t[:] offs):
    cdef Py_ssize_t m = s.shape[0]
    cdef Py_ssize_t nsoc = offs.shape[0] - 1
    d_arr = np.empty(l)
    beta_arr = np.empty(nsoc)
    wbar_arr = np.empty(m - l)
    lm_arr = np.empty(m)
    cdef double[:] d = d_arr
    cdef double[:] beta = beta_arr
    cdef double[:] wbar = wbar_arr
    cdef double[:] lm = lm_arr
    cdef Py_ssize_t i, j, a, b
    cdef double sn, zn, ss, zz, sz, gamma, den, rt
    with nogil:
        for j in range(l):
            d[j] = sqrt(s[j] / z[j])
            lm[j] = sqrt(s[j] * z[j])
        for i in range(nsoc):
            a = offs[i]
            b = offs[i + 1]
            ss = s[a] * s[a]
            zz = z[a] * z[a]
            for j in range(a + 1, b):
                ss -= s[j] * s[j]
                zz -= z[j] * z[j]
            sn = sqrt(ss if ss > 1e-300 else 1e-300)
            zn = sqrt(zz if zz > 1e-300 else 1e-300)
            sz = 0.0
            for j in range(a, b):
                sz += (s[j] / sn) * (z[j] / zn)
            gamma = (1.0 + sz) / 2.0
            gamma = sqrt(gamma if gamma > 1e-300 else 1e-300)
            wbar[a - l] = (s[a] / sn + z[a] / zn) / (2.0 * gamma)
            for j in range(a + 1, b):
                wbar[j - l] = (s[j] / sn - z[j] / zn) / (2.0 * gamma)
            beta[i] = sqrt(sn / zn)
            rt = sqrt(sn * zn)
            den = s[a] / sn + z[a] / zn + 2.0 * gamma
            lm[a] = rt * gamma
            for j in range(a + 1, b):
                lm[j] = rt * ((gamma + z[a] / zn) * s[j] / sn + (gamma + s[a] / sn) * z[j] / zn) / den
    return d_arr, beta_arr, wbar_arr, lm_arr


def scale(const double[:] d, const double[:] beta, const double[:] wbar, Py_ssize_t l,
          const cnp.int64_t[:] offs, const double[:] x, bint inverse):
    cdef Py_ssize_t m = x.shape[0]
    y_arr = np.empty(m)
    cdef double[:] y = y_arr
    cdef Py_ssize_t i, j, a, b
    cdef double t, f, sgn = -1.0 if inverse else 1.0, c
    with nogil:
        for j in range(l):
            y[j] = x[j] / d[j] if inverse else x[j] * d[j]
        for i in range(offs.shape[0] - 1):
            a = offs[i]
            b = offs[i + 1]
            t = 0.0
            for j in range(a + 1, b):
                t += wbar[j - l] * x[j]
            f = 1.0 / beta[i] if inverse else beta[i]
            y[a] = f * (wbar[a - l] * x[a] + sgn * t)
            c = sgn * x[a] + t / (1.0 + wbar[a - l])
            for j in range(a + 1, b):
                y[j] = f * (x[j] + c * wbar[j - l])
    return y_arr


def scale_rows(const double[:] d, const double[:] beta, const double[:] wbar, Py_ssize_t l,
               const cnp.int64_t[:] offs, const double[:, :] G, bint inverse):
    cdef Py_ssize_t m = G.shape[0], n = G.shape[1]
    Y_arr = np.empty((m, n))
    cdef double[:, :] Y = Y_arr
    t_arr = np.empty(n)
    cdef double[:] t = t_arr
    cdef Py_ssize_t i, j, k, a, b
    cdef double f, w0, wj, sgn = -1.0 if inverse else 1.0, inv1w
    with nogil:
        for j in range(l):
            f = 1.0 / d[j] if inverse else d[j]
            for k in range(n):
                Y[j, k] = G[j, k] * f
        for i in range(offs.shape[0] - 1):
            a = offs[i]
            b = offs[i + 1]
            f = 1.0 / beta[i] if inverse else beta[i]
            w0 = wbar[a - l]
            inv1w = 1.0 / (1.0 + w0)
            for k in range(n):
                t[k] = 0.0
            for j in range(a + 1, b):
                wj = wbar[j - l]
                for k in range(n):
                    t[k] += wj * G[j, k]
            for k in range(n):
                Y[a, k] = f * (w0 * G[a, k] + sgn * t[k])
                t[k] = sgn * G[a, k] + t[k] * inv1w
            for j in range(a + 1, b):
                wj = wbar[j - l]
                for k in range(n):
                    Y[j, k] = f * (G[j, k] + t[k] * wj)
    return Y_arr


def jprod(const double[:] x, const double[:] y, Py_ssize_t l, const cnp.int64_t[:] offs):
    cdef Py_ssize_t m = x.shape[0]
    r_arr = np.empty(m)
    cdef double[:] r = r_arr
    cdef Py_ssize_t i, j, a, b
    with nogil:
        for j in range(l):
            r[j] = x[j] * y[j]
        for i in range(offs.shape[0] - 1):
            a = offs[i]
            b = offs[i + 1]
            r[a] = _dot(x, y, a, b)
            for j in range(a + 1, b):
                r[j] = x[a] * y[j] + y[a] * x[j]
    return r_arr


def jdiv(const double[:] lmbda, const double[:] v, Py_ssize_t l, const cnp.int64_t[:] offs):
    cdef Py_ssize_t m = v.shape[0]
    u_arr = np.empty(m)
    cdef double[:] u = u_arr
    cdef Py_ssize_t i, j, a, b
    cdef double det, u0, lv
    with nogil:
        for j in range(l):
            u[j] = v[j] / lmbda[j]
        for i in range(offs.shape[0] - 1):
            a = offs[i]
            b = offs[i + 1]
            det = lmbda[a] * lmbda[a]
            lv = 0.0
            for j in range(a + 1, b):
                det -= lmbda[j] * lmbda[j]
                lv += lmbda[j] * v[j]
            u0 = (lmbda[a] * v[a] - lv) / det
            u[a] = u0
            for j in range(a + 1, b):
                u[j] = (v[j] - u0 * lmbda[j]) / lmbda[a]
    return u_arr


def max_step(const double[:] x, const double[:] dx, Py_ssize_t l, const cnp.int64_t[:] offs):
    cdef double alpha = INFINITY, r, qa, qb, qc, disc
    cdef Py_ssize_t i, j, a, b
    with nogil:
        for j in range(l):
            if dx[j] < 0.0:
                r = -x[j] / dx[j]
                if r < alpha:
                    alpha = r
        for i in range(offs.shape[0] - 1):
            a = offs[i]
            b = offs[i + 1]
            qa = dx[a] * dx[a]
            qb = x[a] * dx[a]
            qc = x[a] * x[a]
            for j in range(a + 1, b):
                qa -= dx[j] * dx[j]
                qb -= x[j] * dx[j]
                qc -= x[j] * x[j]
            qb *= 2.0
            if qc <= 0.0:
                alpha = 0.0
                break
            disc = qb * qb - 4.0 * qa * qc
            if qa < 0.0 or (qb < 0.0 and disc >= 0.0):
                r = 2.0 * qc / (-qb + sqrt(disc))
                if r < alpha:
                    alpha = r
    return alpha


def min_eig(const double[:] x, Py_ssize_t l, const cnp.int64_t[:] offs):
    cdef double m = INFINITY, nrm
    cdef Py_ssize_t i, j, a, b
    with nogil:
        for j in range(l):
            if x[j] < m:
                m = x[j]
        for i in range(offs.shape[0] - 1):
            a = offs[i]
            b = offs[i + 1]
            nrm = 0.0
            for j in range(a + 1, b):
                nrm += x[j] * x[j]
            nrm = x[a] - sqrt(nrm)
            if nrm < m:
                m = nrm
    return m
