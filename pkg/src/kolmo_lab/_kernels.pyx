# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Signatures mirror :mod:`kolmo_lab._kernels_py` exactly."""

from libc.math cimport fabs, pow

import numpy as np



def kinetic_step(const double[:, ::1] u, const double[:, ::1] a_half,
                 const double[::1] vel, const double[:, ::1] drift,
                 const double[:, ::1] creact, const double[:, ::1] src,
                 double dt, double hv, double hx, double[:, ::1] out):
    cdef Py_ssize_t nv = u.shape[0], nx = u.shape[1]
    cdef Py_ssize_t j, i
    cdef double ihv2 = 1.0 / (hv * hv), ihv = 1.0 / hv, ihx = 1.0 / hx
    cdef double rhs, w, b, c0
    with nogil:
        for i in range(nx):
            out[0, i] = u[0, i]
            out[nv - 1, i] = u[nv - 1, i]
        for j in range(1, nv - 1):
            w = vel[j]
            for i in range(nx):
                c0 = u[j, i]
                if w > 0.0:
                    if i == nx - 1:
                        out[j, i] = c0
                        continue
                    rhs = w * (u[j, i + 1] - c0) * ihx
                elif w < 0.0:
                    if i == 0:
                        out[j, i] = c0
                        continue
                    rhs = w * (c0 - u[j, i - 1]) * ihx
                else:
                    rhs = 0.0
                rhs = rhs + (a_half[j, i] * (u[j + 1, i] - c0)
                             - a_half[j - 1, i] * (c0 - u[j - 1, i])) * ihv2
                b = drift[j, i]
                if b > 0.0:
                    rhs = rhs + b * (u[j + 1, i] - c0) * ihv
                elif b < 0.0:
                    rhs = rhs + b * (c0 - u[j - 1, i]) * ihv
                rhs = rhs + creact[j, i] * c0 - src[j, i]
                out[j, i] = c0 + dt * rhs


cdef inline double _phi(double a, double pm2) nogil:
    # p = 2 and p = 3 avoid pow, which dominates the pair loop otherwise
    if a == 0.0:
        return 0.0
    if pm2 == 0.0:
        return a
    if pm2 == 1.0:
        return fabs(a) * a
    return pow(fabs(a), pm2) * a


def frac_plap_power(const double[::1] u, const double[::1] v, const double[::1] w,
                    double p, double coef, double expo,
                    const long[::1] nodes, double[::1] out):
    cdef Py_ssize_t n = u.shape[0], m = nodes.shape[0]
    cdef Py_ssize_t k, i, j, q
    cdef double acc, pm2 = p - 2.0, d, h
    cdef bint uniform = n > 1
    cdef double[::1] table
    if uniform:
        h = v[1] - v[0]
        for j in range(1, n):
            if fabs(v[j] - v[j - 1] - h) > 1e-12 * fabs(h):
                uniform = False
                break
    if uniform:
        # on a uniform grid the kernel depends on |i - j| only
        table = np.empty(n)
        table[0] = 0.0
        for q in range(1, n):
            table[q] = coef * pow(fabs(v[q] - v[0]), -expo)
        with nogil:
            for k in range(m):
                i = nodes[k]
                acc = 0.0
                for j in range(n):
                    if j == i:
                        continue
                    q = i - j if i > j else j - i
                    acc = acc + w[j] * _phi(u[i] - u[j], pm2) * table[q]
                out[k] = acc
        return
    with nogil:
        for k in range(m):
            i = nodes[k]
            acc = 0.0
            for j in range(n):
                if j == i:
                    continue
                d = fabs(v[i] - v[j])
                acc = acc + w[j] * _phi(u[i] - u[j], pm2) * coef * pow(d, -expo)
            out[k] = acc


def frac_plap_matrix(const double[::1] u, const double[:, ::1] kmat,
                     const double[::1] w, double p,
                     const long[::1] nodes, double[::1] out):
    cdef Py_ssize_t n = u.shape[0], m = nodes.shape[0]
    cdef Py_ssize_t k, i, j
    cdef double acc, pm2 = p - 2.0
    with nogil:
        for k in range(m):
            i = nodes[k]
            acc = 0.0
            for j in range(n):
                if j == i:
                    continue
                acc = acc + w[j] * _phi(u[i] - u[j], pm2) * kmat[k, j]
            out[k] = acc


def pgs_tridiag(const double[::1] lower, const double[::1] diag,
                const double[::1] upper, const double[::1] rhs,
                const double[::1] psi, double[::1] x,
                double omega, double tol, long maxit):
    cdef Py_ssize_t n = x.shape[0], i
    cdef long it = 0
    cdef double r, new, change, s
    with nogil:
        while it < maxit:
            change = 0.0
            for i in range(n):
                s = rhs[i] - diag[i] * x[i]
                if i > 0:
                    s = s - lower[i] * x[i - 1]
                if i < n - 1:
                    s = s - upper[i] * x[i + 1]
                new = x[i] + omega * s / diag[i]
                if new < psi[i]:
                    new = psi[i]
                r = fabs(new - x[i])
                if r > change:
                    change = r
                x[i] = new
            it = it + 1
            if change < tol:
                break
    return it, change
