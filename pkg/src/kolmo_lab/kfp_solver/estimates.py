"""Numerical checks of the local estimates for kinetic Kolmogorov equations.

Every check works on a solved :class:`~kolmo_lab.grid.GridField` with axes
``(v, x, t)``. Quantities over cylinders and boxes are not read off the
solver nodes directly. The field is interpolated (multilinearly) onto
evaluation nodes fixed in advance: tensor Gauss-Legendre nodes for integrals
and uniform scan lattices for suprema and infima. This keeps the
evaluation identical across grid refinements so that refinement drift
measures the solution, not the sampling.

Reports are plain dicts with the keys ``check, params, lhs, rhs,
fitted_constant, resolution, pass`` plus check-specific extras.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solve_banded

from ..errors import (DomainError, ExponentError, GeometryError,
                      InsufficientResolutionError, LocalizationError,
                      PreconditionError)
from ..group_geometry import (LieStructure, compose, dilate, dilation_exponents,
                              in_unit_cylinder, inverse, pair_seminorm)
from .solver import OperatorSpec

N_GAUSS = 12
N_SCAN = 33
YU_NOTE = ("Yu approximated by first-order upwind differences; "
           "L2H^-1 norm taken slice-wise in v with zero boundary values")


# ---------------------------------------------------------------- sampling

class FieldSampler:
    """Multilinear interpolant of a grid field, refusing extrapolation."""

    def __init__(self, u):
        self.u = u
        self._f = RegularGridInterpolator(u.axes, u.values, method="linear",
                                          bounds_error=True)
        self._lo = np.array([a[0] for a in u.axes])
        self._hi = np.array([a[-1] for a in u.axes])

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        tol = 1e-12 * (1 + np.abs(self._hi - self._lo))
        if np.any(pts < self._lo - tol) or np.any(pts > self._hi + tol):
            lo = np.minimum(pts.reshape(-1, pts.shape[-1]).min(axis=0), self._lo)
            hi = np.maximum(pts.reshape(-1, pts.shape[-1]).max(axis=0), self._hi)
            raise LocalizationError("evaluation region leaves the grid",
                                    suggested_bounds=list(zip(lo, hi)))
        return self._f(np.clip(pts, self._lo, self._hi))


def _gauss_nodes(lo, hi, n=N_GAUSS):
    """Tensor Gauss-Legendre nodes and weights on the box ``[lo, hi]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    axes = [0.5 * (a + b) + 0.5 * (b - a) * x for a, b in zip(lo, hi)]
    wts = [0.5 * (b - a) * w for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    W = wts[0]
    for wa in wts[1:]:
        W = np.multiply.outer(W, wa)
    return pts, W.ravel()


def _scan_nodes(lo, hi, n=N_SCAN):
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _unit_box(L):
    N = L.N
    return np.append(-np.ones(N), -1.0), np.append(np.ones(N), 0.0)


def cylinder_nodes(L, z0, r, kind="gauss", n=None):
    """Evaluation nodes of ``Q_r(z0)`` (and weights for ``kind='gauss'``).

    Nodes of the box enclosing the unit cylinder are masked to the cylinder,
    dilated by ``r`` and left-translated by ``z0``; the translation has unit
    Jacobian so weights scale by ``r^(Q+2)``.
    """
    lo, hi = _unit_box(L)
    if kind == "gauss":
        pts, w = _gauss_nodes(lo, hi, n or N_GAUSS)
    else:
        pts, w = _scan_nodes(lo, hi, n or N_SCAN), None
    keep = in_unit_cylinder(L, pts) | (pts[:, -1] == -1.0)
    pts = pts[keep]
    z = compose(L, np.asarray(z0, dtype=float), dilate(L, r, pts))
    if w is None:
        return z
    return z, w[keep] * r ** (L.Q + 2)


def _box(lo, hi, kind="gauss", n=None):
    if kind == "gauss":
        return _gauss_nodes(lo, hi, n or N_GAUSS)
    return _scan_nodes(lo, hi, n or N_SCAN)


def _lq_norm(f, pts, w, q):
    """``||f||_{L^q}`` of a constant, callable ``f(v, x, t)`` or OperatorSpec."""
    if isinstance(f, OperatorSpec):
        f = f.f
    if f is None:
        return 0.0
    if callable(f):
        vals = np.asarray(f(*pts.T), dtype=float) * np.ones(len(pts))
    else:
        vals = np.full(len(pts), float(f))
    return float(np.sum(w * np.abs(vals) ** q) ** (1.0 / q))


def _report(check, params, lhs, rhs, fitted, resolution, ok, **extra):
    rep = {"check": check, "params": params, "lhs": float(lhs), "rhs": float(rhs),
           "fitted_constant": float(fitted), "resolution": resolution, "pass": bool(ok)}
    rep.update(extra)
    return rep


def _resolution(u):
    return [len(a) for a in u.axes]


def _kinetic(u):
    return LieStructure.kinetic(1)


# ---------------------------------------------------------------- geometry

@dataclass
class HarnackGeometry:
    """Boxes of the Harnack and weak Poincare statements (kinetic, n = 1).

    ``Q_plus = B_w x B_{w^3} x (-w^2, 0]``,
    ``Q_minus_tilde = B_r x B_{r^3} x (-1 + r^2, -1 + 2 r^2)`` with ``r = rho``,
    ``Q_minus = B_w x B_{w^3} x (-1, -1 + w^2]`` (weak Harnack),
    ``Q_zero = B_eta x B_{eta^3} x (-1 - eta^2, -1]``,
    ``Q_ext = B_{2R} x B_{8R} x (-1 - eta^2, 0]``.
    """

    omega: float = 0.5
    rho: float = 0.3
    eta: float = 0.5
    R: float = 1.1
    theta0: tuple = (0.1, 0.25, 0.4, 0.55, 0.7, 0.85)
    theta_primary: float = 0.25

    def __post_init__(self):
        w, r = self.omega, self.rho
        if not (0 < w < 1 and 0 < r < 1):
            raise GeometryError("omega and rho must lie in (0, 1)")
        if not r < w / np.sqrt(2):
            raise GeometryError("need rho < omega / sqrt(2)")
        if not -1 + 2 * r * r < -w * w:
            raise GeometryError("Q_minus_tilde must end before Q_plus starts")
        if not 0 < self.eta < 1:
            raise GeometryError("eta must lie in (0, 1)")
        if not self.R > 1:
            raise GeometryError("R must exceed 1")
        if any(not 0 < th < 1 for th in tuple(self.theta0) + (self.theta_primary,)):
            raise GeometryError("theta0 values must lie in (0, 1)")

    def _b(self, s, t0, t1):
        return (np.array([-s, -s ** 3, t0]), np.array([s, s ** 3, t1]))

    @property
    def q_plus(self):
        return self._b(self.omega, -self.omega ** 2, 0.0)

    @property
    def q_minus_tilde(self):
        return self._b(self.rho, -1 + self.rho ** 2, -1 + 2 * self.rho ** 2)

    @property
    def q_minus(self):
        return self._b(self.omega, -1.0, -1 + self.omega ** 2)

    @property
    def q_zero(self):
        return self._b(self.eta, -1 - self.eta ** 2, -1.0)

    @property
    def q_ext(self):
        R = self.R
        return (np.array([-2 * R, -8 * R, -1 - self.eta ** 2]),
                np.array([2 * R, 8 * R, 0.0]))

    @property
    def q_one(self):
        return self._b(1.0, -1.0, 0.0)

    def as_dict(self):
        return {"omega": self.omega, "rho": self.rho, "eta": self.eta, "R": self.R,
                "theta0": list(self.theta0), "theta_primary": self.theta_primary}


# ---------------------------------------------------------------- Moser

def moser_check(spec, u, z0=(0.0, 0.0, 0.0), rho=0.5, r=1.0, p=1.0, C=None):
    """Local boundedness: ``sup_{Q_rho} u_l^p`` against ``||u_l^p||_{L^beta(Q_r)}``.

    ``u_l = u + ||f||_{L^q(Q_r)}`` and ``beta = q / (q - 1)``. The fitted
    constant is ``sup / norm * (r - rho)^((Q+2)/beta)``. When ``C`` is given
    the report passes iff ``sup <= C norm / (r - rho)^((Q+2)/beta)``.
    """
    if not 0 < rho < r:
        raise GeometryError("need 0 < rho < r")
    if r > 1:
        raise GeometryError("need r <= 1")
    if p < 1:
        raise ExponentError("need p >= 1")
    L = _kinetic(u)
    q = spec.q
    beta = q / (q - 1)
    ev = FieldSampler(u)
    gz, gw = cylinder_nodes(L, z0, r, "gauss")
    fn = _lq_norm(spec, gz, gw, q)
    ul_int = np.maximum(ev(gz) + fn, 0.0) ** p
    norm = float(np.sum(gw * ul_int ** beta) ** (1 / beta))
    sz = cylinder_nodes(L, z0, rho, "scan")
    sup = float(np.max(np.maximum(ev(sz) + fn, 0.0) ** p))
    scale = (r - rho) ** ((L.Q + 2) / beta)
    fitted = sup / norm * scale if norm > 0 else (0.0 if sup == 0 else np.inf)
    rhs = norm / scale
    ok = np.isfinite(fitted) if C is None else sup <= C * rhs * (1 + 1e-12)
    return _report("moser", {"z0": list(map(float, z0)), "rho": rho, "r": r, "p": p,
                             "q": q, "beta": beta, "f_norm": fn},
                   sup, rhs, fitted, _resolution(u), ok, sup=sup, norm=norm)


# ---------------------------------------------------------------- Harnack

def harnack_ratio(u, geom, f_norm=0.0, p=None, C=None):
    """``sup_{Q_minus_tilde} u / (inf_{Q_plus} u + f_norm)``.

    With ``p`` the weak-Harnack numerator ``(int_{Q_minus} u^p)^(1/p)`` is
    reported as well (``weak_ratio``). An infinite ratio is flagged rather
    than raised.
    """
    ev = FieldSampler(u)
    lo1, hi1 = geom.q_one
    if ev(_scan_nodes(lo1, hi1, 17)).min() < -1e-12:
        raise PreconditionError("u must be non-negative on the unit cylinder")
    sup_m = float(ev(_box(*geom.q_minus_tilde, "scan")).max())
    inf_p = float(ev(_box(*geom.q_plus, "scan")).min())
    den = inf_p + f_norm
    ratio = sup_m / den if den > 0 else np.inf
    extra = {"sup_minus": sup_m, "inf_plus": inf_p, "infinite": not np.isfinite(ratio)}
    if p is not None:
        pts, w = _box(*geom.q_minus, "gauss")
        num = float(np.sum(w * np.maximum(ev(pts), 0.0) ** p) ** (1.0 / p))
        extra["weak_numerator"] = num
        extra["weak_ratio"] = num / den if den > 0 else np.inf
    ok = np.isfinite(ratio) if C is None else sup_m <= C * den * (1 + 1e-12)
    return _report("harnack", {**geom.as_dict(), "f_norm": f_norm, "p": p},
                   sup_m, den, ratio, _resolution(u), ok, **extra)


def harnack_admissible(L, z_late, z_early, rho, n_radii=400):
    """Scaled radius ``r`` placing the pair in a Harnack cylinder pair, or None.

    The later point is the centre ``z*`` of ``Q_r(z*)`` (top of the scaled
    ``Q_plus``); the earlier point must map into the scaled
    ``Q_minus_tilde``, i.e. ``delta_{1/r}(z*^{-1} o z_early)`` has time in
    ``(-1 + rho^2, -1 + 2 rho^2)`` and space in ``B_rho x B_{rho^3}``.
    """
    z_late = np.asarray(z_late, dtype=float)
    z_early = np.asarray(z_early, dtype=float)
    gap = z_late[-1] - z_early[-1]
    if gap <= 0:
        return None
    lo = np.sqrt(gap / (1 - rho ** 2))
    hi = np.sqrt(gap / (1 - 2 * rho ** 2))
    w = compose(L, inverse(L, z_late), z_early)
    a = dilation_exponents(L)
    off = L.block.offsets
    for r in np.linspace(lo, hi, n_radii + 2)[1:-1]:
        zeta = w / r ** a
        ok = True
        for j in range(len(L.block.m)):
            if np.linalg.norm(zeta[off[j]:off[j + 1]]) >= rho ** (2 * j + 1):
                ok = False
                break
        if ok:
            return float(r)
    return None


def harnack_chain(u, points, rho=0.3):
    """Per-link constants ``C_j = max(1, u(z_j) / u(z_{j-1}))``.

    Points run backward in time (``z_j`` earlier than ``z_{j-1}``), as in a
    chain propagating positivity from a late point into the past. Each link
    reports the admissible Harnack radius (None when the pair cannot be
    placed in a scaled cylinder pair).
    """
    pts = np.asarray(points, dtype=float)
    L = _kinetic(u)
    vals = FieldSampler(u)(pts)
    links = []
    broken = False
    for j in range(1, len(pts)):
        prev = float(vals[j - 1])
        if prev <= 0:
            broken = True
            links.append({"j": j, "C": np.inf, "admissible": False, "radius": None,
                          "broken": True})
            continue
        r = harnack_admissible(L, pts[j - 1], pts[j], rho)
        links.append({"j": j, "C": max(1.0, float(vals[j]) / prev),
                      "admissible": r is not None, "radius": r, "broken": False})
    total = float(np.prod([lk["C"] for lk in links])) if links else 1.0
    return {"check": "harnack_chain", "links": links, "product": total,
            "broken": broken, "admissible": all(lk["admissible"] for lk in links),
            "values": vals.tolist()}


# ---------------------------------------------------------------- Hoelder

def holder_estimate(u, f=None, q=4.0, levels=3, z0=(0.0, 0.0, 0.0), C=None,
                    n_scan=9, n_pairs=400000):
    """Empirical Hoelder exponent and seminorm bound on ``Q_{1/2}(z0)``.

    ``osc(r_k)`` over ``Q_{r_k}(z0)``, ``r_k = 2^-(k+1)``, is fitted as
    ``~ r^alpha`` (least squares in log-log). The seminorm over scan nodes
    of ``Q_{1/2}`` is then compared with ``||u||_{L^2(Q_1)} + ||f||_{L^q(Q_1)}``.
    A level is resolvable when the cylinder spans at least one cell in
    ``v`` and one snapshot interval in ``t``.
    """
    L = _kinetic(u)
    hv = u.spacings[0]
    ht = u.spacings[-1]
    radii = [2.0 ** -(k + 1) for k in range(levels)]
    ok_lv = [r >= hv and r * r >= ht for r in radii]
    if sum(ok_lv) < 3 or not all(ok_lv):
        raise InsufficientResolutionError(
            f"only {sum(ok_lv)} of {levels} dyadic levels resolvable (need >= 3)")
    ev = FieldSampler(u)
    osc = []
    for r in radii:
        vals = ev(cylinder_nodes(L, z0, r, "scan", 17))
        osc.append(float(vals.max() - vals.min()))
    osc = np.array(osc)
    scale = max(osc.max(), 1e-300)
    if np.all(osc <= 1e-13 * max(1.0, float(np.abs(u.values).max()))):
        slope = np.inf
        alpha = 1.0
    else:
        slope = float(np.polyfit(np.log(radii), np.log(np.maximum(osc, 1e-16 * scale)), 1)[0])
        alpha = float(np.clip(slope, 1e-3, 1.0))
    pts = cylinder_nodes(L, z0, 0.5, "scan", n_scan)
    semi = pair_seminorm(L, pts, ev(pts), alpha, n_pairs=n_pairs)
    gz, gw = cylinder_nodes(L, z0, 1.0, "gauss")
    l2 = float(np.sqrt(np.sum(gw * ev(gz) ** 2)))
    fq = _lq_norm(f, gz, gw, q)
    rhs = l2 + fq
    fitted = semi / rhs if rhs > 0 else (0.0 if semi == 0 else np.inf)
    ok = np.isfinite(fitted) if C is None else semi <= C * rhs * (1 + 1e-12)
    return _report("holder", {"z0": list(map(float, z0)), "levels": levels, "q": q},
                   semi, rhs, fitted, _resolution(u), ok, alpha=alpha, slope=slope,
                   radii=radii, oscillation=osc.tolist(), seminorm=semi)


# ---------------------------------------------------------------- H^-1 and Poincare

def dual_norm_Hm1(g, h_v):
    """Discrete ``H^-1`` norm on a velocity line with zero boundary values.

    ``g`` holds samples at all nodes including both endpoints (endpoint
    values are ignored). Solves ``(-D_vv + 1) w = g`` on the interior and
    returns ``sqrt(h sum g w)``. Extra trailing axes are independent lines
    and give an array of norms.
    """
    g = np.asarray(g, dtype=float)
    inner = g[1:-1]
    n = inner.shape[0]
    if n == 0:
        return np.zeros(g.shape[1:]) if g.ndim > 1 else 0.0
    ab = np.empty((3, n))
    ab[0] = -1.0 / h_v ** 2
    ab[1] = 2.0 / h_v ** 2 + 1.0
    ab[2] = -1.0 / h_v ** 2
    w = solve_banded((1, 1), ab, inner.reshape(n, -1))
    val = np.sqrt(np.maximum(h_v * np.sum(inner.reshape(n, -1) * w, axis=0), 0.0))
    return float(val[0]) if g.ndim == 1 else val.reshape(g.shape[1:])


def _sub_axes(u, lo, hi):
    """Index slices of the grid nodes inside the box; the box must be covered."""
    sl = []
    for a, l, h in zip(u.axes, lo, hi):
        step = a[1] - a[0]
        if a[0] > l + 0.5 * step or a[-1] < h - 0.5 * step:
            raise LocalizationError(f"grid [{a[0]}, {a[-1]}] does not cover [{l}, {h}]",
                                    suggested_bounds=(float(l), float(h)))
        idx = np.nonzero((a >= l - 1e-12) & (a <= h + 1e-12))[0]
        sl.append(slice(idx[0], idx[-1] + 1))
    return tuple(sl)


def _trap(a):
    w = np.full(len(a), a[1] - a[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def lie_derivative(W, v, x, t, orientation=1.0):
    """``Y W = s v d_x W - d_t W`` by upwind ``x`` and backward ``t`` differences.

    The first time slice has no backward neighbour and is set to zero.
    """
    hx = x[1] - x[0]
    vel = orientation * v[:, None, None]
    fwd = np.zeros_like(W)
    bwd = np.zeros_like(W)
    fwd[:, :-1] = np.diff(W, axis=1) / hx
    bwd[:, 1:] = np.diff(W, axis=1) / hx
    Y = np.where(vel > 0, vel * fwd, vel * bwd)
    dt = np.zeros_like(W)
    dt[..., 1:] = np.diff(W, axis=2) / np.diff(t)
    Y = Y - dt
    Y[..., 0] = 0.0
    return Y


def l2_hm1_norm(G, v, x, t):
    """``L^2((x, t); H^-1_v)`` norm of samples ``G[v, x, t]``, slice-wise in ``v``."""
    dual = dual_norm_Hm1(G, v[1] - v[0])
    return float(np.sqrt(np.sum(_trap(x)[:, None] * _trap(t)[None, :] * dual ** 2)))


def weak_poincare_check(u, geom, level=None, C=None, orientation=1.0):
    """Weak Poincare inequality ``||(w - theta0 M)_+||_{L2(Q1)} <= C_P rhs``.

    ``w = u`` or, with ``level``, ``w = (u - k)_+``: ``level`` is a number
    ``k`` or a string ``'q<frac>'`` (e.g. ``'q0.3'``, or ``'median'``) for
    the weighted quantile of ``u`` over ``Q_zero``; any quantile >= 1/4
    meets the zero-set precondition by construction.
    ``rhs = ||D_v w||_{L2(Q_ext)} + ||Y w||_{L2 H^-1(Q_ext)}`` computed on
    the grid nodes of ``Q_ext`` with ``Y = s v d_x - d_t``. The
    precondition ``|{w = 0} cap Q_zero| >= |Q_zero| / 4`` is checked on
    Gauss nodes. One fitted constant per swept ``theta0`` is reported;
    the headline numbers use ``geom.theta_primary``. With ``C`` the check
    passes if some swept value satisfies the inequality.
    """
    ev = FieldSampler(u)
    gz, gwz = _box(*geom.q_zero, "gauss")
    uz = ev(gz)
    if uz.min() < -1e-12 or u.values.min() < -1e-12:
        raise PreconditionError("u must be non-negative")
    if isinstance(level, str):
        frac = 0.5 if level == "median" else float(level.lstrip("q"))
        order = np.argsort(uz)
        cw = np.cumsum(gwz[order]) / gwz.sum()
        k = float(uz[order][np.searchsorted(cw, frac)])
    else:
        k = float(level or 0.0)

    def w_of(vals):
        return np.maximum(vals - k, 0.0)

    tol = 1e-12 * max(1.0, float(np.abs(u.values).max()))
    zero_frac = float(np.sum(gwz[w_of(uz) <= tol]) / gwz.sum())
    if zero_frac < 0.25:
        raise PreconditionError(f"zero set fills {zero_frac:.3f} of Q_zero, need >= 1/4")

    g1, gw1 = _box(*geom.q_one, "gauss")
    w1 = w_of(ev(g1))
    M = float(w_of(ev(_box(*geom.q_one, "scan"))).max())
    M = max(M, float(w1.max()))

    sl = _sub_axes(u, *geom.q_ext)
    v, x, t = (a[s] for a, s in zip(u.axes, sl))
    W = w_of(u.values[sl])
    Dv = np.gradient(W, v[1] - v[0], axis=0)
    wv, wx, wt = _trap(v), _trap(x), _trap(t)
    wgt = wv[:, None, None] * wx[None, :, None] * wt[None, None, :]
    dv_norm = float(np.sqrt(np.sum(wgt * Dv ** 2)))
    yw_norm = l2_hm1_norm(lie_derivative(W, v, x, t, orientation), v, x, t)
    rhs = dv_norm + yw_norm

    per = []
    for th in sorted(set(geom.theta0) | {geom.theta_primary}):
        lhs = float(np.sqrt(np.sum(gw1 * np.maximum(w1 - th * M, 0.0) ** 2)))
        fit = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
        per.append({"theta0": th, "lhs": lhs, "fitted_constant": fit})
    best = next(d for d in per if d["theta0"] == geom.theta_primary)
    ok = np.isfinite(best["fitted_constant"]) if C is None else \
        any(d["lhs"] <= C * rhs * (1 + 1e-12) for d in per)
    return _report("weak_poincare", {**geom.as_dict(), "level": k},
                   best["lhs"], rhs, best["fitted_constant"], _resolution(u), ok,
                   theta0=best["theta0"], sweep=per, M=M, zero_fraction=zero_frac,
                   dv_norm=dv_norm, yu_norm=yw_norm, note=YU_NOTE)


# ---------------------------------------------------------------- Sobolev

def sobolev_admissible(m0, q):
    if q < 2 or not np.isfinite(q):
        return False
    if m0 > 2:
        return q <= 2 * m0 / (m0 - 2) + 1e-12
    return True


def _sine_derivative(n_nodes, length):
    """Matrix mapping interior samples to the derivative of their sine series."""
    n = n_nodes - 2
    j = np.arange(1, n + 1)
    k = np.arange(1, n + 1)
    S = np.sin(np.pi * np.outer(j, k) / (n + 1))
    coef = (2.0 / (n + 1)) * S.T          # S is symmetric and S S = (n+1)/2 I
    jj = np.arange(n + 2)
    Cm = np.cos(np.pi * np.outer(jj, k) / (n + 1)) * (np.pi * k / length)
    return Cm @ coef


def sobolev_embedding_check(u, q, m0=None, C=None):
    """Averaged Sobolev embedding on ``Omega_{m0} x Omega_rest``.

    The first ``m0`` axes of ``u`` are velocity axes whose end nodes carry
    the zero boundary values; the rest are ``(y, t)``. ``D_{m0} u`` is the
    exact derivative of the sine interpolant along each velocity axis.

    ``lhs = int |avg_{y,t} u|^q dv``, ``rhs = (int avg_{y,t} |D u|^2 dv)^(q/2)``.
    """
    if m0 is None:
        m0 = len(u.axes) - 2
    if not 1 <= m0 < len(u.axes):
        raise DomainError("m0 must leave at least one (y, t) axis")
    if not sobolev_admissible(m0, q):
        raise ExponentError(f"q = {q} outside the admissible range for m0 = {m0}")
    vals = u.values
    rest_w = np.ones(())
    for a in u.axes[m0:]:
        rest_w = np.multiply.outer(rest_w, _trap(a) if len(a) > 1 else np.ones(1))
    vol = rest_w.sum()

    def avg(f):
        return np.tensordot(f, rest_w, axes=rest_w.ndim) / vol

    grad2 = np.zeros_like(vals)
    for i in range(m0):
        a = u.axes[i]
        D = _sine_derivative(len(a), a[-1] - a[0])
        inner = np.take(vals, np.arange(1, len(a) - 1), axis=i)
        d = np.moveaxis(np.tensordot(D, inner, axes=([1], [i])), 0, i)
        grad2 += d ** 2
    vw = np.ones(())
    for a in u.axes[:m0]:
        vw = np.multiply.outer(vw, _trap(a))
    lhs = float(np.sum(vw * np.abs(avg(vals)) ** q))
    rhs = float(np.sum(vw * avg(grad2)) ** (q / 2))
    fit = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
    ok = np.isfinite(fit) if C is None else lhs <= C * rhs * (1 + 1e-12)
    return _report("sobolev", {"q": q, "m0": m0}, lhs, rhs, fit, _resolution(u), ok)


# ---------------------------------------------------------------- moments

def moments(u):
    """Mass, energy and entropy of a velocity profile ``u`` (GridField over v).

    Negative values are flagged; the entropy then uses the positive part.
    """
    w = u.weights()
    vals = u.values
    mesh = u.mesh()
    v2 = sum(m ** 2 for m in mesh)
    pos = np.maximum(vals, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(pos > 0, pos * np.log(pos), 0.0)
    return {"M": float(np.sum(w * vals)), "E": float(np.sum(w * vals * v2)),
            "H": float(np.sum(w * ent)), "negative": bool(vals.min() < 0)}


__all__ = ["HarnackGeometry", "FieldSampler", "cylinder_nodes", "moser_check",
           "harnack_ratio", "harnack_admissible", "harnack_chain", "holder_estimate",
           "dual_norm_Hm1", "lie_derivative", "l2_hm1_norm", "weak_poincare_check", "sobolev_admissible",
           "sobolev_embedding_check", "moments", "YU_NOTE"]
