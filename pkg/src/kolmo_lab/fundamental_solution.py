"""Explicit fundamental solution of the constant-coefficient operator

    L0 u = div(A0 D u) + <B x, D u> - d_t u

together with finite-difference residuals and Gamma-potentials.
"""

import numpy as np

from . import group_geometry as gg
from .errors import DomainError, ExponentError, NumericalError, PreconditionError

POLE_CUTOFF = 1e-12


class GammaEvaluator:
    """Evaluates ``Gamma(z, zeta) = Gamma(zeta^{-1} o z, 0)``.

    Relies on the scaling identity ``C(t) = D(sqrt t) C(1) D(sqrt t)`` with
    ``D(r) = diag(r^alpha)``, valid for every matrix in block form. So a
    single Cholesky factor of ``C(1)`` serves all times and stays well
    conditioned even when ``C(t)`` itself spans many orders of magnitude.
    """

    def __init__(self, L, a0):
        self.L = L
        self.a0 = np.atleast_2d(np.asarray(a0, dtype=float))
        ok, rep = gg.hypoellipticity_check(L, self.a0)
        if not ok:
            raise PreconditionError(f"C(t) is not positive definite: {rep}")
        self.K = gg.covariance_coefficients(L, self.a0)
        C1 = self.K.sum(axis=0)
        self.chol1 = np.linalg.cholesky(C1)
        self.logdet1 = 2.0 * np.sum(np.log(np.diag(self.chol1)))
        self.traceB = L.traceB
        self.N = L.N
        self.Q = L.Q

    def cov(self, t):
        return gg.covariance(self.L, self.a0, t)

    def _whiten(self, x, t):
        """``w`` with ``|w|^2 = <C(t)^{-1} x, x>``."""
        from scipy.linalg import solve_triangular

        y = x / t[:, None] ** (0.5 * self.L.alpha)
        return solve_triangular(self.chol1, y.T, lower=True).T

    def gamma0(self, z):
        """``Gamma((x, t), 0)``; zero for ``t <= 0``."""
        z = np.asarray(z, dtype=float)
        shape = z.shape[:-1]
        z = z.reshape(-1, self.N + 1)
        x, t = z[:, :-1], z[:, -1]
        out = np.zeros(len(t))
        pos = t > 0
        if np.any(pos & (t < POLE_CUTOFF)):
            bad = float(t[pos & (t < POLE_CUTOFF)].min())
            raise NumericalError(f"relative time {bad:.3e} below pole cutoff {POLE_CUTOFF}")
        if np.any(pos):
            tp = t[pos]
            w = self._whiten(x[pos], tp)
            logdet = self.Q * np.log(tp) + self.logdet1
            out[pos] = np.exp(-0.5 * self.N * np.log(4 * np.pi) - 0.5 * logdet
                              - 0.25 * np.sum(w * w, axis=1) - tp * self.traceB)
        out = out.reshape(shape)
        return out if out.ndim else float(out)

    def __call__(self, z, zeta=None):
        if zeta is None:
            return self.gamma0(z)
        return self.gamma0(gg.compose(self.L, gg.inverse(self.L, zeta), z))

    def grad_zeta(self, z, zeta):
        """``D_{m0}`` of ``Gamma(z, .)`` at ``zeta``, shape ``(..., m0)``.

        With ``y = x - E(s) xi`` and ``s = t - tau``:
        ``grad_xi Gamma = 1/2 E(s)^T C(s)^{-1} y Gamma``.
        """
        w = gg.compose(self.L, gg.inverse(self.L, zeta), z)
        w = np.asarray(w, dtype=float)
        shape = w.shape[:-1]
        w = w.reshape(-1, self.N + 1)
        y, s = w[:, :-1], w[:, -1]
        g = np.atleast_1d(self.gamma0(w))
        out = np.zeros((len(s), self.L.m0))
        pos = g > 0
        if np.any(pos):
            Cs = self.cov(s[pos])
            cy = np.linalg.solve(Cs, y[pos][..., None])[..., 0]
            E = gg.exp_group(self.L, s[pos])
            full = 0.5 * np.einsum("kji,kj->ki", E, cy) * g[pos, None]
            out[pos] = full[:, :self.L.m0]
        return out.reshape(shape + (self.L.m0,))


def gamma_homogeneity_residual(G, z, r):
    """``|Gamma(delta_r z) - r^{-Q} Gamma(z)| / Gamma(z)``."""
    g = np.asarray(G.gamma0(z))
    if np.any(g == 0):
        raise DomainError("Gamma(z, 0) = 0: homogeneity residual undefined")
    gr = G.gamma0(gg.dilate(G.L, r, z))
    return np.abs(gr - np.asarray(r, dtype=float) ** (-G.Q) * g) / g


def gamma_mass(G, t, epsabs=1e-11):
    """``int Gamma((x, t), 0) dx`` by adaptive quadrature (scipy ``nquad``).

    Integration runs over the box of 12 standard deviations per axis, which
    loses less than 1e-30 of Gaussian mass.
    """
    from scipy.integrate import nquad

    C = G.cov(t)
    half = 12.0 * np.sqrt(2.0 * np.diag(C))

    def f(*x):
        return G.gamma0(np.array(list(x) + [t]))

    val, err = nquad(f, [(-h, h) for h in half], opts={"epsabs": epsabs, "epsrel": 1e-10, "limit": 200})
    return val


def apply_principal_fd(L, A0, u, z, h):
    """Centered finite-difference evaluation of ``L0 u`` at ``z``.

    Second and mixed derivatives in the first ``m0`` coordinates, first
    derivatives (drift and time) by central differences, all with step ``h``;
    the stencil is exact on quadratics. ``u`` maps arrays ``(..., N+1)`` to
    values.
    """
    z = np.asarray(z, dtype=float)
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    N = L.N
    m0 = L.m0
    I = np.eye(N + 1)
    pts = [z]
    # collect all stencil points, evaluate once
    for i in range(N + 1):
        pts += [z + h * I[i], z - h * I[i]]
    for i in range(m0):
        for j in range(i + 1, m0):
            for si in (1, -1):
                for sj in (1, -1):
                    pts.append(z + h * (si * I[i] + sj * I[j]))
    vals = np.asarray(u(np.array(pts)), dtype=float)
    u0 = vals[0]
    plus = vals[1:2 * (N + 1):2]
    minus = vals[2:2 * (N + 1) + 1:2]
    first = (plus - minus) / (2 * h)
    second = (plus - 2 * u0 + minus) / h ** 2
    res = sum(A0[i, i] * second[i] for i in range(m0))
    k = 1 + 2 * (N + 1)
    for i in range(m0):
        for j in range(i + 1, m0):
            pp, pm, mp, mm = vals[k:k + 4]
            k += 4
            res += 2 * A0[i, j] * (pp - pm - mp + mm) / (4 * h ** 2)
    Bx = L.B @ z[:-1]
    res += float(Bx @ first[:N]) - first[N]
    return float(res)


def gamma_pde_residual(G, z, h):
    """``|L0 Gamma(., 0)|`` at ``z`` by :func:`apply_principal_fd`.

    Refuses points with ``|z| < 10 h`` or too close to ``t = 0``.
    """
    z = np.asarray(z, dtype=float)
    if gg.homogeneous_norm(G.L, z) < 10 * h:
        raise DomainError("point too close to the pole for step h")
    if z[-1] - h <= POLE_CUTOFF:
        raise DomainError("stencil crosses t = 0")
    return abs(apply_principal_fd(G.L, G.a0, G.gamma0, z, h))


# ---------------------------------------------------------------- potentials

def _gauss_box(order, d):
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    grids = np.meshgrid(*([x] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.meshgrid(*([w] * d), indexing="ij"), axis=0).ravel()
    return nodes, weights


class BoxFunction:
    """Callable ``func`` supported in the box ``[lo, hi]``, cut into ``ncell`` cells."""

    def __init__(self, func, lo, hi, ncell):
        self.func = func
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.ncell = np.asarray(ncell, dtype=int)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        inside = np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)
        out = np.zeros(pts.shape[:-1])
        if np.any(inside):
            out[inside] = self.func(pts[inside])
        return out


def _is_zero(f):
    from .grid import GridField

    return isinstance(f, GridField) and not np.any(f.values)


def _as_callable(f):
    """Field to callable; GridField data are interpolated multilinearly."""
    from .grid import GridField

    if isinstance(f, BoxFunction):
        return f, f.lo, f.hi, f.ncell
    if isinstance(f, GridField):
        from scipy.interpolate import RegularGridInterpolator

        itp = RegularGridInterpolator(f.axes, f.values, bounds_error=False, fill_value=0.0)
        return itp, np.array([a[0] for a in f.axes]), np.array([a[-1] for a in f.axes]), \
            np.array([len(a) - 1 for a in f.axes])
    raise DomainError("unsupported field type for potentials (need GridField or BoxFunction)")


def _integrate(kernel, fcall, lo, hi, ncell, z, order, levels, chunk=200000):
    """Cellwise Gauss quadrature of ``kernel(zeta) f(zeta)`` with dyadic refinement.

    Cells whose box, widened by one cell, contains ``z`` are split in ``2^d``
    children ``levels`` times.
    """
    d = len(lo)
    h = (hi - lo) / ncell
    idx = np.stack(np.meshgrid(*[np.arange(n) for n in ncell], indexing="ij"), -1).reshape(-1, d)
    clo = lo + idx * h
    chi = clo + h
    nodes, weights = _gauss_box(order, d)
    corners = np.stack(np.meshgrid(*([[0, 1]] * d), indexing="ij"), -1).reshape(-1, d)
    total = 0.0

    def integrate_cells(a, b):
        acc = 0.0
        per = len(weights)
        step = max(1, chunk // per)
        for s in range(0, len(a), step):
            aa, bb = a[s:s + step], b[s:s + step]
            pts = aa[:, None, :] + (bb - aa)[:, None, :] * nodes[None]
            vol = np.prod(bb - aa, axis=1)
            flat = pts.reshape(-1, d)
            fv = fcall(flat)
            mask = fv != 0
            kv = np.zeros(fv.shape + kernel_shape)
            if np.any(mask):
                kv[mask] = kernel(flat[mask])
            val = (kv * fv.reshape(fv.shape + (1,) * len(kernel_shape)))
            val = val.reshape((len(aa), per) + kernel_shape)
            acc = acc + np.einsum("cq...,q,c->...", val, weights, vol)
        return acc

    probe = np.asarray(kernel(clo[:1] + 0.5 * h))
    kernel_shape = probe.shape[1:]
    total = np.zeros(kernel_shape)
    for _ in range(levels + 1):
        width = chi - clo
        near = np.all((z >= clo - width) & (z <= chi + width), axis=1)
        if _ == levels:
            near[:] = False
        total = total + integrate_cells(clo[~near], chi[~near])
        if not np.any(near):
            break
        a, b = clo[near], chi[near]
        half = 0.5 * (b - a)
        clo = (a[:, None, :] + corners[None] * half[:, None, :]).reshape(-1, d)
        chi = clo + np.repeat(half, len(corners), axis=0)
    return total


def gamma_potential(G, f, z, order=4, levels=6):
    """``Gamma(f)(z) = int Gamma(z, zeta) f(zeta) d zeta``.

    ``f`` is a :class:`GridField` on (x_1..x_N, t), interpolated
    multilinearly and zero outside its grid, or a :class:`BoxFunction`.
    """
    z = np.asarray(z, dtype=float)
    if _is_zero(f):
        return 0.0
    fcall, lo, hi, ncell = _as_callable(f)

    def kern(zeta):
        return G(np.broadcast_to(z, zeta.shape), zeta)

    return float(_integrate(kern, fcall, lo, hi, ncell, z, order, levels))


def gamma_gradient_potential(G, f, z, order=4, levels=6):
    """``int -D^{(zeta)}_{m0} Gamma(z, zeta) f(zeta) d zeta`` (vector of length m0).

    When ``z`` lies inside the support box the value ``f(z)`` is subtracted
    under the integral and added back through the exact identity
    ``int_box d_i Gamma = (flux through the two faces normal to e_i)``,
    which leaves an integrand one homogeneous degree less singular.
    """
    z = np.asarray(z, dtype=float)
    if _is_zero(f):
        return np.zeros(G.L.m0)
    fcall, lo, hi, ncell = _as_callable(f)

    def kern(zeta):
        return -G.grad_zeta(np.broadcast_to(z, zeta.shape), zeta)

    inside = bool(np.all((z > lo) & (z < hi)))
    fz = float(fcall(z[None])[0]) if inside else 0.0
    if fz == 0.0:
        return np.asarray(_integrate(kern, fcall, lo, hi, ncell, z, order, levels))

    def fsub(pts):
        box = np.all((pts >= lo) & (pts <= hi), axis=-1)
        return fcall(pts) - fz * box

    body = np.asarray(_integrate(kern, fsub, lo, hi, ncell, z, order, levels))
    flux = np.zeros(G.L.m0)
    d = G.N + 1
    top = min(hi[-1], z[-1])
    for i in range(G.L.m0):
        keep = [k for k in range(d) if k != i]
        flo, fhi = lo[keep].copy(), hi[keep].copy()
        fhi[-1] = top
        if fhi[-1] <= flo[-1]:
            continue
        for sign, face in ((1.0, hi[i]), (-1.0, lo[i])):
            def face_gamma(q, face=face):
                full = np.insert(q, i, face, axis=1)
                return G(np.broadcast_to(z, full.shape), full)[:, None]
            val = _integrate(face_gamma, lambda q: np.ones(len(q)), flo, fhi,
                             ncell[keep] * 2, z[keep], order, 0)
            flux[i] += sign * float(val[0])
    return body - fz * flux


def chapman_kolmogorov(G, z, zeta, s, half_width=8.0, order=24):
    """``int_{R^N} Gamma(z, (y, s)) Gamma((y, s), zeta) dy`` for ``tau < s < t``.

    Tensor Gauss-Legendre quadrature over a box of ``half_width`` standard
    deviations of the second factor, split into 8 panels per axis.
    """
    z = np.asarray(z, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if not zeta[-1] < s < z[-1]:
        raise DomainError("need tau < s < t")
    N = G.N
    # centre of the Gaussian Gamma((y, s), zeta) in y
    centre = gg.exp_group(G.L, s - zeta[-1]) @ zeta[:-1]
    sd = np.sqrt(2.0 * np.diag(G.cov(s - zeta[-1])))
    x, w = np.polynomial.legendre.leggauss(order)
    panels = 8
    edges = np.linspace(-1, 1, panels + 1)
    px = np.concatenate([0.5 * (edges[k + 1] - edges[k]) * x + 0.5 * (edges[k + 1] + edges[k]) for k in range(panels)])
    pw = np.concatenate([0.5 * (edges[k + 1] - edges[k]) * w for k in range(panels)])
    axes = [centre[i] + half_width * sd[i] * px for i in range(N)]
    ws = [half_width * sd[i] * pw for i in range(N)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, N)
    wt = np.prod(np.stack(np.meshgrid(*ws, indexing="ij"), -1).reshape(-1, N), axis=1)
    pts = np.column_stack([mesh, np.full(len(mesh), s)])
    a = G(np.broadcast_to(z, pts.shape), pts)
    b = G(pts, np.broadcast_to(zeta, pts.shape))
    return float(np.sum(a * b * wt))


def sobolev_exponents(Q, p):
    """``(p*, p**)`` with ``1/p* = 1/p - 1/(Q+2)``, ``1/p** = 1/p - 2/(Q+2)``."""
    if p <= 1:
        raise ExponentError("need p > 1")
    inv1 = 1.0 / p - 1.0 / (Q + 2)
    inv2 = 1.0 / p - 2.0 / (Q + 2)
    if inv2 <= 0:
        raise ExponentError(f"p = {p} >= (Q+2)/2 = {(Q + 2) / 2}: p** undefined")
    return 1.0 / inv1, 1.0 / inv2


def potential_estimate_check(G, fields, p, eval_axes, order=3, levels=3):
    """Ratios ``|Gamma(f)|_{p**} / |f|_p`` and ``|Gamma(D f)|_{p*} / |f|_p``.

    Parameters
    ----------
    fields : list of GridField
        Test functions on (x, t).
    eval_axes : tuple of ndarray
        Tensor grid on which both potentials are evaluated; norms use
        trapezoid weights on it.

    Returns
    -------
    dict
        Per-field ratios and the fitted constants (their maxima). ``Gamma(D f)``
        is evaluated as ``int -D^{(zeta)} Gamma f``, i.e. after integrating by
        parts, so no derivative of ``f`` is taken.
    """
    from .grid import GridField

    pstar, pss = sobolev_exponents(G.Q, p)
    shell = GridField(eval_axes, np.zeros(tuple(len(a) for a in eval_axes)))
    w = shell.weights().ravel()
    pts = np.stack([m.ravel() for m in shell.mesh()], -1)
    r1, r2 = [], []
    for f in fields:
        fw = f.weights()
        fnorm = float(np.sum(fw * np.abs(f.values) ** p) ** (1.0 / p))
        if fnorm == 0:
            r1.append(0.0)
            r2.append(0.0)
            continue
        pv = np.array([gamma_potential(G, f, z, order, levels) for z in pts])
        gv = np.array([gamma_gradient_potential(G, f, z, order, levels) for z in pts])
        n2 = np.sum(w * np.abs(pv) ** pss) ** (1.0 / pss)
        n1 = np.sum(w * np.linalg.norm(gv, axis=-1) ** pstar) ** (1.0 / pstar)
        r1.append(float(n2 / fnorm))
        r2.append(float(n1 / fnorm))
    return {"p": p, "p_star": pstar, "p_star_star": pss,
            "ratio_potential": r1, "ratio_gradient": r2,
            "fitted_potential": max(r1) if r1 else 0.0,
            "fitted_gradient": max(r2) if r2 else 0.0}
