"""Nonlocal kinetic equations driven by a fractional p-Laplacian in velocity.

    d_t u + v . grad_x u + L_K(u) = f,
    L_K(u)(v) = PV int |u(v) - u(w)|^(p-2) (u(v) - u(w)) K(v, w) dw,

with ``lam |v - w|^(-n-sp) <= K <= Lam |v - w|^(-n-sp)``. Points are
``z = (v, x, t)`` with ``v, x`` in ``R^n``; the dilations are
``(r v, r^(1+sp) x, r^(sp) t)`` and the group law is the Galilean one.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.special import gamma as gamma_fn

from . import kernels
from .errors import (DomainError, GeometryError, KernelError, NumericalError,
                     PreconditionError)
from .grid import GridField

# ---------------------------------------------------------------- parameters


@dataclass
class FractionalParams:
    """Order ``s``, exponent ``p`` and structural data of the equation.

    ``kernel_coef`` is the constant of the default kernel
    ``K = kernel_coef |v - w|^(-n-sp)``; it defaults to ``lam``.
    ``hs_attested`` records that the caller vouches for the approximation
    hypothesis needed when ``p < 2``; it cannot be checked from a grid.
    """

    s: float
    p: float
    n: int = 1
    lam: float = 1.0
    Lam: float = 1.0
    c_o: float = 0.0
    gamma: float = None
    h: float = 0.0
    R_inf: float = 50.0
    delta: float = 1.0
    kernel_coef: float = None
    hs_attested: bool = False

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise DomainError("s must lie in (0, 1)")
        if not self.p > 1:
            raise DomainError("p must exceed 1")
        if not 0 < self.lam <= self.Lam:
            raise DomainError("need 0 < lam <= Lam")
        if self.gamma is None:
            self.gamma = self.p
        if not 1 < self.gamma <= self.p:
            raise DomainError("need 1 < gamma <= p")
        if not 0 < self.delta <= 1:
            raise DomainError("delta must lie in (0, 1]")
        if self.kernel_coef is None:
            self.kernel_coef = self.lam
        if not self.lam <= self.kernel_coef <= self.Lam:
            raise KernelError("kernel_coef outside [lam, Lam]")

    @property
    def sp(self):
        return self.s * self.p

    def to_dict(self):
        return {"s": self.s, "p": self.p, "n": self.n, "sp": self.sp, "lam": self.lam,
                "Lam": self.Lam, "c_o": self.c_o, "gamma": self.gamma, "h": self.h,
                "R_inf": self.R_inf, "delta": self.delta, "kernel_coef": self.kernel_coef,
                "hs_attested": self.hs_attested}


# ---------------------------------------------------------------- geometry

def _split(fp, z):
    z = np.asarray(z, dtype=float)
    n = fp.n
    if z.shape[-1] != 2 * n + 1:
        raise DomainError(f"points need {2 * n + 1} coordinates")
    return z[..., :n], z[..., n:2 * n], z[..., -1]


def frac_dilate(fp, r, z):
    """``delta_r z = (r v, r^(1+sp) x, r^(sp) t)``."""
    if r <= 0:
        raise DomainError("dilation factor must be positive")
    v, x, t = _split(fp, z)
    return np.concatenate([r * v, r ** (1 + fp.sp) * x, (r ** fp.sp * t)[..., None]], axis=-1)


def frac_compose(fp, z0, z):
    """Galilean law ``z0 o z = (v0 + v, x0 + x + t v0, t0 + t)``."""
    v0, x0, t0 = _split(fp, z0)
    v, x, t = _split(fp, z)
    return np.concatenate([v0 + v, x0 + x + t[..., None] * v0, (t0 + t)[..., None]], axis=-1)


def frac_inverse(fp, z):
    v, x, t = _split(fp, z)
    return np.concatenate([-v, -x + t[..., None] * v, (-t)[..., None]], axis=-1)


@dataclass
class FracCylinder:
    """Fractional kinetic cylinder around ``z0`` in both representations.

    Group form: ``|v - v0| < r``, ``|x - x0 - (t - t0) v0| < r^(1+sp)``,
    ``t0 - r^sp < t < t0``. Ball form: ``B_r(v0) x B_{r^(1+sp)}(x0) x
    (t0 - r^sp, t0)``.
    """

    fp: FractionalParams
    z0: np.ndarray
    r: float
    theta: float = field(default=None)

    def __post_init__(self):
        if self.r <= 0:
            raise DomainError("cylinder radius must be positive")
        self.z0 = np.asarray(self.z0, dtype=float)

    def contains_group(self, z, r=None):
        r = self.r if r is None else r
        v, x, t = _split(self.fp, z)
        v0, x0, t0 = _split(self.fp, self.z0)
        sp = self.fp.sp
        return ((np.linalg.norm(v - v0, axis=-1) < r)
                & (np.linalg.norm(x - x0 - (t - t0)[..., None] * v0, axis=-1) < r ** (1 + sp))
                & (t > t0 - r ** sp) & (t < t0))

    def contains_ball(self, z, r=None):
        r = self.r if r is None else r
        v, x, t = _split(self.fp, z)
        v0, x0, t0 = _split(self.fp, self.z0)
        sp = self.fp.sp
        return ((np.linalg.norm(v - v0, axis=-1) < r)
                & (np.linalg.norm(x - x0, axis=-1) < r ** (1 + sp))
                & (t > t0 - r ** sp) & (t < t0))

    def sample_group(self, n, rng, r=None):
        r = self.r if r is None else r
        unit = _unit_samples(self.fp, n, rng)
        return frac_compose(self.fp, self.z0, frac_dilate(self.fp, r, unit))

    def sample_ball(self, n, rng, r=None):
        r = self.r if r is None else r
        unit = _unit_samples(self.fp, n, rng)
        v, x, t = _split(self.fp, frac_dilate(self.fp, r, unit))
        v0, x0, t0 = _split(self.fp, self.z0)
        return np.concatenate([v0 + v, x0 + x, (t0 + t)[..., None]], axis=-1)

    def volume(self):
        n = self.fp.n
        ball = np.pi ** (n / 2) / gamma_fn(n / 2 + 1)
        return float(ball ** 2 * self.r ** (n + n * (1 + self.fp.sp) + self.fp.sp))


def _unit_samples(fp, n, rng):
    def ball(k):
        g = rng.standard_normal((k, fp.n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return g * rng.random(k)[:, None] ** (1.0 / fp.n)
    return np.concatenate([ball(n), ball(n), -rng.random(n)[:, None]], axis=-1)


def frac_cylinder(fp, z0, r):
    return FracCylinder(fp, z0, r)


def estimate_theta(cyl, n=100000, rng=None, hi=16.0):
    """Smallest sampled ``theta`` with ``Q_{r/theta} in Qball_r in Q_{r theta}``.

    Each inclusion is bisected on ``theta in [1, hi]`` with a fixed sample
    of the inner set; the larger of the two is returned together with both.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    unit = _unit_samples(cyl.fp, n, rng)
    v0, x0, t0 = _split(cyl.fp, cyl.z0)

    def inner_ok(th):
        pts = frac_compose(cyl.fp, cyl.z0, frac_dilate(cyl.fp, cyl.r / th, unit))
        return bool(np.all(cyl.contains_ball(pts)))

    ball_pts = cyl.sample_ball(n, rng)

    def outer_ok(th):
        return bool(np.all(cyl.contains_group(ball_pts, cyl.r * th)))

    def bisect(ok):
        if ok(1.0):
            return 1.0
        lo, top = 1.0, hi
        if not ok(top):
            return np.inf
        for _ in range(50):
            mid = 0.5 * (lo + top)
            if ok(mid):
                top = mid
            else:
                lo = mid
        return top

    th_in, th_out = bisect(inner_ok), bisect(outer_ok)
    cyl.theta = max(th_in, th_out)
    return {"theta": cyl.theta, "theta_inner": th_in, "theta_outer": th_out}


# ---------------------------------------------------------------- tails

def _directions(n, m=None):
    """Quadrature directions and weights on the unit sphere ``S^(n-1)``."""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        m = m or 128
        a = 2 * np.pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(a), np.sin(a)], axis=-1), np.full(m, 2 * np.pi / m)
    m = m or 400
    area = 2 * np.pi ** (n / 2) / gamma_fn(n / 2)
    if n == 3:
        k = np.arange(m) + 0.5
        phi = np.arccos(1 - 2 * k / m)
        th = np.pi * (1 + 5 ** 0.5) * k
        d = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=-1)
    else:
        g = np.random.default_rng(12345).standard_normal((m, n))
        d = g / np.linalg.norm(g, axis=1, keepdims=True)
    return d, np.full(m, area / m)


@dataclass
class Decay:
    """Declared behaviour of ``u`` beyond ``R_inf`` from the tail centre.

    Either compact support (``support`` radius: ``u = 0`` outside it) or
    the bound ``|u| <= A |v - v0|^-beta``.
    """

    support: float = None
    beta: float = None
    A: float = 1.0

    def remainder(self, fp, R):
        """Bound on the truncated part ``int_{|w| > R} |u|^(p-1) |w|^(-n-sp)``."""
        if self.support is not None and self.support <= R:
            return 0.0
        if self.beta is None:
            raise DomainError("tail needs a decay declaration or compact support")
        k = fp.sp + self.beta * (fp.p - 1)
        if k <= 0:
            raise DomainError("declared decay too slow: need beta (p-1) + sp > 0")
        area = 2 * np.pi ** (fp.n / 2) / gamma_fn(fp.n / 2)
        return float(area * self.A ** (fp.p - 1) * R ** (-k) / k)


def _xt_nodes(fp, x0, t0, rho, kind, m=8):
    """Nodes of ``U_rho(x0, t0) = B_{rho^(1+sp)}(x0) x (t0 - rho^sp, t0)``."""
    n = fp.n
    rx, rt = rho ** (1 + fp.sp), rho ** fp.sp
    if kind == "gauss":
        g, w = np.polynomial.legendre.leggauss(m)
    else:
        g, w = np.linspace(-1, 1, m), None
    axes = [g] * n + [0.5 * (g - 1)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([a.ravel() for a in mesh], axis=-1)
    keep = np.linalg.norm(pts[:, :n], axis=1) <= 1 + 1e-12
    pts = pts[keep]
    x = x0 + rx * pts[:, :n]
    t = t0 + rt * pts[:, n]
    if w is None:
        return x, t, None
    W = np.ones(())
    for _ in range(n + 1):
        W = np.multiply.outer(W, w)
    W = W.ravel()[keep]
    return x, t, W / W.sum()


def _shell_integrals(fp, u, v0, r, x, t, decay, epsabs=1e-11):
    """``int_{r < |w| < R} |u(v0 + w, x_k, t_k)|^(p-1) |w|^(-n-sp) dw`` per node ``k``."""
    dirs, dw = _directions(fp.n)
    R = fp.R_inf if decay.support is None else min(fp.R_inf, max(decay.support, r))
    if R <= r:
        return np.zeros(len(t)), 0.0
    rem = decay.remainder(fp, R)
    n = fp.n

    def integrand(y):
        rho = np.exp(y)
        vv = v0 + rho * dirs                      # (m, n)
        V = np.broadcast_to(vv[:, None, :], (len(dirs), len(t), n))
        X = np.broadcast_to(x[None], (len(dirs), len(t), n))
        T = np.broadcast_to(t[None], (len(dirs), len(t)))
        vals = np.abs(_call(u, fp, V, X, T)) ** (fp.p - 1)
        # dw = rho^(n-1) drho dOmega and drho = rho dy
        return (dw @ vals) * rho ** (-fp.sp)

    val, _ = quad_vec(integrand, np.log(r), np.log(R), epsabs=epsabs, epsrel=1e-10, limit=400)
    return np.asarray(val), rem


def _call(u, fp, V, X, T):
    if fp.n == 1:
        return np.asarray(u(V[..., 0], X[..., 0], T), dtype=float) * np.ones(T.shape)
    return np.asarray(u(V, X, T), dtype=float) * np.ones(T.shape)


def _tail_common(fp, u, z0, r, decay, kind):
    if r <= 0:
        raise DomainError("radius must be positive")
    decay = _as_decay(u, decay)
    u = as_callable(u)
    v0, x0, t0 = _split(fp, z0)
    x, t, w = _xt_nodes(fp, x0, t0, 2 * r, kind, m=8 if kind == "gauss" else 9)
    vals, rem = _shell_integrals(fp, u, v0, r, x, t, decay)
    return vals, w, rem, decay


def tail(fp, u, z0, r, decay=None):
    """Kinetic nonlocal tail ``Tail(u; z0, r)`` (average over ``U_2r``).

    ``u`` is a callable ``u(v, x, t)`` or a GridField over ``(v, x, t)``
    (zero outside its velocity range). Returns a dict with the value and
    the analytic remainder bound of the truncation at ``R_inf``, which is
    added before taking the root (so the reported value is an upper
    bound when the remainder is positive).
    """
    vals, w, rem, decay = _tail_common(fp, u, z0, r, decay, "gauss")
    inner = r ** fp.sp * (float(w @ vals) + rem)
    return {"value": float(inner ** (1.0 / (fp.p - 1))), "remainder": rem,
            "params": {**fp.to_dict(), "r": r, "decay": vars(decay)}}


def tail_sup(fp, u, z0, r, decay=None):
    """Kinetic nonlocal supremum tail ``Tail_inf(u; z0, r)`` over scan nodes of ``U_2r``."""
    vals, _, rem, decay = _tail_common(fp, u, z0, r, decay, "scan")
    inner = r ** fp.sp * (float(vals.max()) + rem)
    return {"value": float(inner ** (1.0 / (fp.p - 1))), "remainder": rem,
            "params": {**fp.to_dict(), "r": r, "decay": vars(decay)}}


def _as_decay(u, decay):
    if decay is not None:
        return decay
    if isinstance(u, GridField):
        a = u.axes[0]
        return Decay(support=float(max(abs(a[0]), abs(a[-1])) * 2 + 1e-9))
    raise DomainError("tail needs a decay declaration or compact support")


def as_callable(u):
    """GridField over ``(v, x, t)`` to a callable, zero outside the velocity range."""
    if not isinstance(u, GridField):
        return u
    from scipy.interpolate import RegularGridInterpolator
    f = RegularGridInterpolator(u.axes, u.values, bounds_error=False, fill_value=None)
    (v_lo, v_hi), rest = u.bounds[0], u.bounds[1:]

    def call(v, x, t):
        v, x, t = np.broadcast_arrays(np.asarray(v, float), np.asarray(x, float),
                                      np.asarray(t, float))
        inside = (v >= v_lo) & (v <= v_hi)
        for c, (lo, hi) in zip((x, t), rest):
            if np.any(inside & ((c < lo - 1e-12) | (c > hi + 1e-12))):
                raise GeometryError("tail region leaves the (x, t) grid")
        pts = np.stack([v, np.clip(x, *rest[0]), np.clip(t, *rest[1])], axis=-1)
        return np.where(inside, f(pts), 0.0)
    return call


# ---------------------------------------------------------------- operator

def _trap_weights(v):
    h = v[1] - v[0]
    w = np.full(len(v), h)
    w[0] = w[-1] = 0.5 * h
    return w


def power_kernel(fp, coef=None):
    """``K(v, w) = coef |v - w|^(-1-sp)`` (n = 1)."""
    c = fp.kernel_coef if coef is None else coef

    def K(v, w):
        with np.errstate(divide="ignore"):
            return c * np.abs(v - w) ** (-1.0 - fp.sp)
    K.coef = c
    return K


def check_kernel(fp, K, v, n_pairs=2000, rng=None, tol=1e-12):
    """Sampled check of ``lam |v-w|^(-1-sp) <= K <= Lam |v-w|^(-1-sp)``."""
    rng = np.random.default_rng(0) if rng is None else rng
    i = rng.integers(0, len(v), n_pairs)
    j = rng.integers(0, len(v), n_pairs)
    keep = i != j
    a, b = v[i[keep]], v[j[keep]]
    ref = np.abs(a - b) ** (-1.0 - fp.sp)
    k = K(a, b)
    if np.any(k < fp.lam * ref * (1 - tol)) or np.any(k > fp.Lam * ref * (1 + tol)):
        raise KernelError("kernel violates its ellipticity bounds")


def far_field(fp, K, v):
    """``int_{|w| > V + h/2} K(v_i, w) dw`` for the grid ``[-V, V]`` (zero extension).

    The far region starts half a cell beyond the last node so that the end
    nodes get a finite contribution.
    """
    h = v[1] - v[0]
    lo, hi = v[0] - 0.5 * h, v[-1] + 0.5 * h
    if getattr(K, "coef", None) is not None:
        sp = fp.sp
        return K.coef * ((hi - v) ** (-sp) + (v - lo) ** (-sp)) / sp
    out = np.empty(len(v))
    for i, vi in enumerate(v):
        a = quad(lambda w: K(vi, w), hi, np.inf, limit=200)[0]
        b = quad(lambda w: K(vi, w), -np.inf, lo, limit=200)[0]
        out[i] = a + b
    return out


def _phi(a, p):
    mag = np.abs(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mag > 0, mag ** (p - 2.0) * a, 0.0)


def frac_p_laplacian(fp, u, v, K=None, nodes=None, far=True, backend=None, check=True):
    """Discrete ``L_K(u)`` on a uniform velocity grid (n = 1).

    Node ``i`` gets ``sum_{j != i} w_j phi(u_i - u_j) K(v_i, v_j)`` with
    trapezoid weights and the diagonal cell dropped. With ``far`` the
    function is taken to vanish outside the grid, adding
    ``phi(u_i) int_{|w| > V} K(v_i, w) dw``.
    """
    u = np.ascontiguousarray(u, dtype=float)
    v = np.ascontiguousarray(v, dtype=float)
    K = power_kernel(fp) if K is None else K
    if check:
        check_kernel(fp, K, v)
    nodes = np.arange(len(v)) if nodes is None else np.asarray(nodes)
    nodes = np.ascontiguousarray(nodes, dtype=np.int64)
    w = _trap_weights(v)
    out = np.empty(len(nodes))
    k = kernels.get_backend(backend)
    if getattr(K, "coef", None) is not None:
        k.frac_plap_power(u, v, w, fp.p, K.coef, 1.0 + fp.sp, nodes, out)
    else:
        with np.errstate(divide="ignore"):
            kmat = np.ascontiguousarray(K(v[nodes, None], v[None, :]))
        kmat[np.arange(len(nodes)), nodes] = 0.0
        k.frac_plap_matrix(u, kmat, w, fp.p, nodes, out)
    if far:
        out += _phi(u[nodes], fp.p) * far_field(fp, K, v)[nodes]
    return out


def reference_fractional_laplacian(fp, u, v0, cutoff=np.inf):
    """High-accuracy ``L_K u(v0)`` for the power kernel by adaptive quadrature.

    Written as ``int_0^inf [phi(u(v0) - u(v0 + y)) + phi(u(v0) - u(v0 - y))] K dy``;
    for ``p = 2`` the symmetric difference removes the principal-value
    singularity of smooth ``u``.
    """
    c = fp.kernel_coef
    e = 1.0 + fp.sp
    u0 = u(v0)

    def g(y):
        return (_phi(u0 - u(v0 + y), fp.p) + _phi(u0 - u(v0 - y), fp.p)) * c * y ** (-e)

    a = quad(g, 0, 1, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    b = quad(g, 1, cutoff, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    return a + b


# ---------------------------------------------------------------- evolution

def _linearized(fp, u, v, K, floor):
    """Jacobian of ``L_K`` at one velocity profile ``u`` (power kernel, n = 1)."""
    w = _trap_weights(v)
    with np.errstate(divide="ignore"):
        kmat = K(v[:, None], v[None, :])
    np.fill_diagonal(kmat, 0.0)
    d = np.abs(u[:, None] - u[None, :])
    slope = (fp.p - 1) * np.maximum(d, floor) ** (fp.p - 2)
    J = -slope * kmat * w[None, :]
    ff = far_field(fp, K, v)
    np.fill_diagonal(J, -J.sum(axis=1) + (fp.p - 1) * np.maximum(np.abs(u), floor) ** (fp.p - 2) * ff)
    return J


def spectral_radius(J, n_iter=200, seed=0):
    """Power-iteration estimate of the largest eigenvalue magnitude."""
    x = np.random.default_rng(seed).standard_normal(J.shape[0])
    lam = 0.0
    for _ in range(n_iter):
        y = J @ x
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        lam = nrm / np.linalg.norm(x)
        x = y / nrm
    return float(lam)


def evolve_nonlocal(fp, v, x, u0, T, dt=None, f=None, K=None, n_snap=21, inflow=0.0,
                    safety=0.9, backend=None, growth_limit=10.0):
    """Explicit scheme for ``d_t u + v d_x u + L_K(u) = f`` (n = 1).

    Transport is upwinded; the inflow face (``x_min`` for ``v > 0``,
    ``x_max`` for ``v < 0``) holds ``inflow``. ``u`` vanishes outside the
    velocity grid (far-field closure of ``L_K``). ``f`` is a constant or a
    callable ``f(v, x, t, u)``.

    The step is ``safety / (rho + max|v| / h_x)`` where ``rho`` is a
    power-iteration estimate of the spectral radius of the linearised
    velocity operator at the initial data (maximised over ``x``-slices);
    for ``p < 2`` differences are floored at ``1e-3`` of the data amplitude.
    A step whose sup norm grows by more than ``growth_limit`` aborts.
    """
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    K = power_kernel(fp) if K is None else K
    check_kernel(fp, K, v)
    V, X = np.meshgrid(v, x, indexing="ij")
    u = np.array(u0(V, X) if callable(u0) else u0, dtype=float)
    hx = x[1] - x[0]
    amp = float(np.abs(u).max())
    floor = 1e-3 * amp if fp.p < 2 else 0.0
    if amp > 0:
        cols = np.argsort(-np.abs(u).max(axis=0))[:4]
        rho = max(spectral_radius(_linearized(fp, u[:, c], v, K, floor)) for c in cols)
    else:
        rho = 0.0
    limit = 1.0 / (rho + np.abs(v).max() / hx) if rho + np.abs(v).max() > 0 else T
    if dt is None:
        dt = safety * limit
    times = np.linspace(0.0, T, n_snap)
    sub = max(1, int(np.ceil((times[1] - times[0]) / dt - 1e-9)))
    dts = (times[1] - times[0]) / sub
    k = kernels.get_backend(backend)
    w = _trap_weights(v)
    nodes = np.arange(len(v), dtype=np.int64)
    ff = far_field(fp, K, v)
    power = getattr(K, "coef", None) is not None
    if not power:
        with np.errstate(divide="ignore"):
            kmat = np.ascontiguousarray(K(v[:, None], v[None, :]))
        np.fill_diagonal(kmat, 0.0)
    pos = v > 0
    neg = v < 0
    snaps = np.empty(u.shape + (n_snap,))
    snaps[..., 0] = u
    Lu = np.empty_like(u)
    col = np.empty(len(v))
    t = 0.0
    step = 0
    mass = [float(w @ u @ _trap_weights(x))]
    for s in range(1, n_snap):
        for i in range(sub):
            for c in range(len(x)):
                uc = np.ascontiguousarray(u[:, c])
                if power:
                    k.frac_plap_power(uc, v, w, fp.p, K.coef, 1.0 + fp.sp, nodes, col)
                else:
                    k.frac_plap_matrix(uc, kmat, w, fp.p, nodes, col)
                Lu[:, c] = col + _phi(uc, fp.p) * ff
            tr = np.zeros_like(u)
            tr[pos, 1:] = v[pos, None] * (u[pos, 1:] - u[pos, :-1]) / hx
            tr[neg, :-1] = v[neg, None] * (u[neg, 1:] - u[neg, :-1]) / hx
            src = 0.0
            if f is not None:
                src = f(V, X, t, u) if callable(f) else f
            new = u - dts * (tr + Lu) + dts * src
            new[pos, 0] = inflow
            new[neg, -1] = inflow
            t = times[s] if i == sub - 1 else times[s - 1] + (i + 1) * dts
            step += 1
            before = float(np.abs(u).max())
            after = float(np.abs(new).max())
            if not np.all(np.isfinite(new)) or after > growth_limit * max(before, 1e-300):
                raise NumericalError(f"instability at step {step} (sup {before:.3e} -> {after:.3e})",
                                     step)
            u = new
        snaps[..., s] = u
        mass.append(float(w @ u @ _trap_weights(x)))
    return GridField((v, x, times), snaps, ("v", "x", "t"),
                     bc={"type": "zero-extension-in-v", "inflow": inflow},
                     cfl={"dt": dts, "substeps": sub, "limit": limit, "rho": rho,
                          "steps": step, "floor": floor, "mass": mass})


# ---------------------------------------------------------------- boundedness

def _box_nodes(lo, hi, n, kind):
    if kind == "gauss":
        g, w = np.polynomial.legendre.leggauss(n)
        axes = [0.5 * (a + b) + 0.5 * (b - a) * g for a, b in zip(lo, hi)]
        ws = [0.5 * (b - a) * w for a, b in zip(lo, hi)]
    else:
        axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
        ws = None
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    if ws is None:
        return pts, None
    W = np.ones(())
    for wa in ws:
        W = np.multiply.outer(W, wa)
    return pts, W.ravel()


def bdd_exponent(fp):
    """Exponent of ``delta`` in the local boundedness estimate."""
    if fp.p >= 2:
        return fp.n * (fp.p - 1) / (fp.sp * fp.p)
    return fp.n * (fp.p - 1) / fp.sp


def boundedness_check(fp, u, z0, r, deltas=None, h_norm=None, C=None):
    """Local boundedness estimate on ``Qball_r(z0)`` for an evolved field (n = 1).

    ``lhs = sup_{Qball_{r/2}} u``. The right side has the structure
    ``C delta^-e max{avg, 1} + delta Tail_inf(u_+; z0, r/2) + C ||h||^(1/(p-1))``
    with ``avg = (mean u_+^p)^(1/p)`` for ``p >= 2`` and ``mean u_+^(2/p)``
    for ``p < 2``. The fitted constant is the smallest ``C`` making the
    estimate true for every ``delta`` in the sweep:
    ``max_delta (lhs - delta Tail)_+ / (delta^-e max{avg, 1} + ||h||^(1/(p-1)))``.
    """
    if fp.n != 1:
        raise DomainError("boundedness_check supports n = 1")
    if fp.p < 2 and not fp.hs_attested:
        raise PreconditionError("p < 2 needs the approximation hypothesis attested (hs_attested)")
    deltas = np.array(sorted(set([fp.delta] + list(np.geomspace(1e-3, 1.0, 13)))
                         if deltas is None else deltas), dtype=float)
    v0, x0, t0 = (float(c) for c in z0)
    sp = fp.sp
    lo = np.array([v0 - r, x0 - r ** (1 + sp), t0 - r ** sp])
    hi = np.array([v0 + r, x0 + r ** (1 + sp), t0])
    for (a, b), l, h in zip(u.bounds, lo, hi):
        if l < a - 1e-12 or h > b + 1e-12:
            raise GeometryError("cylinder leaves the computational domain")
    # U_{2 (r/2)} = U_r must also fit for the tail
    ucall = as_callable(u)
    half = r / 2
    lo2 = np.array([v0 - half, x0 - half ** (1 + sp), t0 - half ** sp])
    hi2 = np.array([v0 + half, x0 + half ** (1 + sp), t0])
    scan, _ = _box_nodes(lo2, hi2, 17, "scan")
    lhs = float(np.max(ucall(*scan.T)))
    g, gw = _box_nodes(lo, hi, 12, "gauss")
    up = np.maximum(ucall(*g.T), 0.0)
    vol = gw.sum()
    if fp.p >= 2:
        avg = float((gw @ up ** fp.p / vol) ** (1.0 / fp.p))
    else:
        avg = float(gw @ up ** (2.0 / fp.p) / vol)
    M = max(avg, 1.0)
    uplus = GridField(u.axes, np.maximum(u.values, 0.0), u.names)
    tl = tail_sup(fp, uplus, z0, half)["value"]
    hv = fp.h if h_norm is None else h_norm
    hterm = abs(hv) ** (1.0 / (fp.p - 1))
    e = bdd_exponent(fp)
    struct = deltas ** (-e) * M + hterm
    per = np.maximum(lhs - deltas * tl, 0.0) / struct
    fitted = float(per.max())
    Cuse = fitted if C is None else C
    curve = Cuse * struct + deltas * tl
    ok = bool(np.all(lhs <= curve * (1 + 1e-12))) if C is not None else bool(np.isfinite(fitted))
    return {"check": "nonlocal_boundedness", "params": {**fp.to_dict(), "z0": [v0, x0, t0], "r": r},
            "lhs": lhs, "rhs": float(curve.min()), "fitted_constant": fitted,
            "resolution": [len(a) for a in u.axes], "pass": ok, "average": avg,
            "tail_sup": tl, "exponent": e, "h_term": hterm,
            "delta_curve": {"delta": deltas.tolist(), "rhs": curve.tolist()}}


# ---------------------------------------------------------------- collisions

@dataclass
class CollisionKernelSpec:
    """``K(r, cos theta) = r^alpha b(cos theta)``, ``b = b0 |sin(theta/2)|^(-(n-1)-2s)``."""

    alpha: float
    s: float
    n: int = 3
    b0: float = 1.0

    def __post_init__(self):
        if not self.alpha > -self.n:
            raise DomainError("need alpha > -n")
        if not 0 < self.s < 1:
            raise DomainError("s must lie in (0, 1)")


def collision_kernel_eval(ck, relspeed, theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0) or np.any(theta > np.pi):
        raise KernelError("deviation angle must lie in (0, pi]; the kernel is singular at 0")
    b = ck.b0 * np.abs(np.sin(theta / 2)) ** (-(ck.n - 1) - 2 * ck.s)
    return np.asarray(relspeed, dtype=float) ** ck.alpha * b


def post_collision(v, vs, sigma):
    """``v' = (v+v*)/2 + |v-v*| sigma / 2``, ``v*' = (v+v*)/2 - |v-v*| sigma / 2``."""
    v = np.asarray(v, dtype=float)
    vs = np.asarray(vs, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    mid = 0.5 * (v + vs)
    half = 0.5 * np.linalg.norm(v - vs, axis=-1, keepdims=True) * sigma
    return mid + half, mid - half


def cos_theta(v, vs, sigma):
    """Cosine of the deviation angle, ``(v - v*) . sigma / |v - v*|``."""
    d = np.asarray(v, dtype=float) - np.asarray(vs, dtype=float)
    return np.sum(d * sigma, axis=-1) / np.linalg.norm(d, axis=-1)
