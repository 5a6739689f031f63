"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Every function here has the same signature and writes into the same ``out``
buffers as its compiled twin, so the two are interchangeable.
"""

import numpy as np


def kinetic_step(u, a_half, vel, drift, creact, src, dt, hv, hx, out):
    nv, nx = u.shape
    out[...] = u
    c = u[1:-1]
    w = vel[1:-1, None]

    fwd = np.zeros_like(c)
    bwd = np.zeros_like(c)
    fwd[:, :-1] = (u[1:-1, 1:] - u[1:-1, :-1]) / hx
    bwd[:, 1:] = (u[1:-1, 1:] - u[1:-1, :-1]) / hx
    rhs = np.where(w > 0, w * fwd, np.where(w < 0, w * bwd, 0.0))

    rhs += (a_half[1:, :] * (u[2:] - c) - a_half[:-1, :] * (c - u[:-2])) / hv**2
    b = drift[1:-1]
    rhs += np.where(b > 0, b * (u[2:] - c), b * (c - u[:-2])) / hv
    rhs += creact[1:-1] * c - src[1:-1]

    new = c + dt * rhs
    # inflow x-faces have no upwind neighbour; caller imposes data there
    blocked = np.zeros(c.shape, dtype=bool)
    blocked[:, -1] |= (vel[1:-1] > 0)
    blocked[:, 0] |= (vel[1:-1] < 0)
    out[1:-1] = np.where(blocked, c, new)


def _phi(a, p):
    mag = np.abs(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(mag > 0, mag ** (p - 2.0) * a, 0.0)
    return val


def frac_plap_power(u, v, w, p, coef, expo, nodes, out):
    for start in range(0, len(nodes), 256):
        idx = nodes[start:start + 256]
        d = np.abs(v[idx, None] - v[None, :])
        diff = u[idx, None] - u[None, :]
        with np.errstate(divide="ignore"):
            k = np.where(d > 0, coef * d ** (-expo), 0.0)
        k[np.arange(len(idx)), idx] = 0.0
        out[start:start + len(idx)] = (_phi(diff, p) * k) @ w


def frac_plap_matrix(u, kmat, w, p, nodes, out):
    diff = u[nodes, None] - u[None, :]
    k = kmat.copy()
    k[np.arange(len(nodes)), nodes] = 0.0
    out[:] = (_phi(diff, p) * k) @ w


def pgs_tridiag(lower, diag, upper, rhs, psi, x, omega, tol, maxit):
    n = len(x)
    it = 0
    change = np.inf
    while it < maxit:
        change = 0.0
        for i in range(n):
            s = rhs[i] - diag[i] * x[i]
            if i > 0:
                s -= lower[i] * x[i - 1]
            if i < n - 1:
                s -= upper[i] * x[i + 1]
            new = max(psi[i], x[i] + omega * s / diag[i])
            change = max(change, abs(new - x[i]))
            x[i] = new
        it += 1
        if change < tol:
            break
    return it, change
