"""Lie group calculus attached to a constant matrix ``B`` in block form.

Points of R^{N+1} are stored as arrays whose last axis has length ``N + 1``;
the last entry is time. Every function broadcasts over leading axes.

The group law is

    (x, t) o (xi, tau)  with  compose(zeta, z) = (x_z + E(t_z) x_zeta, t_zeta + t_z),

where ``E(s) = exp(-s B)``. Dilations act as ``diag(r^alpha_1, ..., r^alpha_N, r^2)``
with ``alpha = 2j + 1`` on the j-th block.
"""

import json
from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import DomainError, GeometryError

RANK_TOL = 1e-10
PD_TOL = 1e-12


@dataclass(frozen=True)
class BlockStructure:
    """Block data ``m_0 >= ... >= m_kappa`` and sub-diagonal blocks ``B_j``.

    Parameters
    ----------
    m : tuple of int
        Block sizes.
    blocks : tuple of ndarray
        ``blocks[j-1]`` has shape ``(m_j, m_{j-1})``.
    validate : bool
        Check the rank and ordering invariants. Switch off only to build
        deliberately degenerate examples.
    """

    m: tuple
    blocks: tuple = ()
    validate: bool = True

    def __post_init__(self):
        m = tuple(int(k) for k in self.m)
        blocks = tuple(np.atleast_2d(np.asarray(b, dtype=float)) for b in self.blocks)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "blocks", blocks)
        if len(m) == 0 or min(m) < 1:
            raise DomainError("block sizes must be positive")
        if len(blocks) != len(m) - 1:
            raise DomainError(f"need {len(m) - 1} blocks, got {len(blocks)}")
        for j, b in enumerate(blocks, start=1):
            if b.shape != (m[j], m[j - 1]):
                raise DomainError(f"B_{j} has shape {b.shape}, expected {(m[j], m[j - 1])}")
        if self.validate:
            if any(m[j] > m[j - 1] for j in range(1, len(m))):
                raise DomainError("block sizes must be nonincreasing")
            for j, b in enumerate(blocks, start=1):
                sv = np.linalg.svd(b, compute_uv=False)
                if sv[-1] <= RANK_TOL * max(sv[0], 1e-300):
                    raise DomainError(f"B_{j} does not have full rank {m[j]}")

    @property
    def kappa(self):
        return len(self.m) - 1

    @property
    def N(self):
        return sum(self.m)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.m)])

    def matrix(self):
        """Assembled ``N x N`` matrix with ``B_j`` on the first sub-diagonal."""
        N = self.N
        off = self.offsets
        B = np.zeros((N, N))
        for j, b in enumerate(self.blocks, start=1):
            B[off[j]:off[j + 1], off[j - 1]:off[j]] = b
        return B

    def to_json(self):
        return json.dumps({"kappa": self.kappa, "m": list(self.m),
                           "blocks": [b.tolist() for b in self.blocks]})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text) if isinstance(text, str) else dict(text)
        bs = cls(tuple(d["m"]), tuple(np.asarray(b, dtype=float) for b in d["blocks"]))
        if "kappa" in d and d["kappa"] != bs.kappa:
            raise DomainError("kappa inconsistent with m")
        return bs


class LieStructure:
    """Group calculus derived from a :class:`BlockStructure`."""

    def __init__(self, block):
        self.block = block
        self.N = block.N
        self.B = block.matrix()
        self.alpha = np.concatenate([np.full(mj, 2 * j + 1) for j, mj in enumerate(block.m)])
        self.Q = int(self.alpha.sum())
        # E(s) = sum_k s^k P_k with P_k = (-B)^k / k!
        P = [np.eye(self.N)]
        for k in range(1, block.kappa + 1):
            P.append(P[-1] @ (-self.B) / k)
        self._P = np.array(P)

    @classmethod
    def kinetic(cls, n=1, orientation=1.0):
        """Kinetic structure on (v, x) in R^{2n}; ``B_1 = orientation * I``."""
        return cls(BlockStructure((n, n), (orientation * np.eye(n),)))

    @classmethod
    def parabolic(cls, N=1):
        return cls(BlockStructure((N,), ()))

    @property
    def m0(self):
        return self.block.m[0]

    @property
    def traceB(self):
        return float(np.trace(self.B))

    def __repr__(self):
        return f"LieStructure(m={self.block.m}, Q={self.Q})"


def exp_group(L, s):
    """``E(s) = exp(-sB)`` as the exact finite power series.

    ``s`` may be an array; the result then has shape ``s.shape + (N, N)``.
    """
    s = np.asarray(s, dtype=float)
    powers = s[..., None] ** np.arange(len(L._P))
    return np.einsum("...k,kij->...ij", powers, L._P)


def _split(z):
    z = np.asarray(z, dtype=float)
    return z[..., :-1], z[..., -1]


def _join(x, t):
    return np.concatenate([x, np.asarray(t)[..., None]], axis=-1)


def compose(L, zeta, z):
    """Group product ``zeta o z = (x_z + E(t_z) x_zeta, t_zeta + t_z)``."""
    xz, tz = _split(z)
    xs, ts = _split(zeta)
    E = exp_group(L, tz)
    return _join(xz + np.einsum("...ij,...j->...i", E, xs), ts + tz)


def inverse(L, z):
    """Group inverse ``(-E(-t) x, -t)``."""
    x, t = _split(z)
    E = exp_group(L, -t)
    return _join(-np.einsum("...ij,...j->...i", E, x), -t)


def origin(L):
    return np.zeros(L.N + 1)


def compose_kinetic_alt(zeta, z):
    """Galilean law ``(v0+v, x0+x+t v0, t0+t)`` on R^{2n+1}.

    ``zeta = (v0, x0, t0)`` is the left factor.
    """
    zeta = np.asarray(zeta, dtype=float)
    z = np.asarray(z, dtype=float)
    n = (zeta.shape[-1] - 1) // 2
    v0, x0, t0 = zeta[..., :n], zeta[..., n:2 * n], zeta[..., -1]
    v, x, t = z[..., :n], z[..., n:2 * n], z[..., -1]
    return np.concatenate([v0 + v, x0 + x + t[..., None] * v0, (t0 + t)[..., None]], axis=-1)


def inverse_kinetic_alt(z):
    """Inverse for :func:`compose_kinetic_alt`: ``(-v, -x + t v, -t)``."""
    z = np.asarray(z, dtype=float)
    n = (z.shape[-1] - 1) // 2
    v, x, t = z[..., :n], z[..., n:2 * n], z[..., -1]
    return np.concatenate([-v, -x + t[..., None] * v, -t[..., None]], axis=-1)


def dilation_exponents(L):
    return np.concatenate([L.alpha, [2]]).astype(float)


def dilate(L, r, z):
    """``delta_r z``; ``r`` may broadcast against the leading axes of ``z``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("dilation factor must be positive")
    return np.asarray(z, dtype=float) * r[..., None] ** dilation_exponents(L)


def norm1(L, z):
    """``|t|^(1/2) + sum_j |x_j|^(1/alpha_j)``."""
    z = np.asarray(z, dtype=float)
    return np.sum(np.abs(z) ** (1.0 / dilation_exponents(L)), axis=-1)


def homogeneous_norm(L, z, n_iter=64):
    """Homogeneous norm: the ``r > 0`` solving ``sum x_i^2/r^(2a_i) + t^2/r^4 = 1``.

    Bisection in ``log r`` on ``[1e-8 |z|_1, 1e8 |z|_1]``; 64 halvings of the
    log-bracket leave a relative error below 1e-14.
    """
    z = np.asarray(z, dtype=float)
    a = dilation_exponents(L)
    n1 = norm1(L, z)
    out = np.zeros(n1.shape)
    nz = n1 > 0
    if not np.any(nz):
        return out if out.ndim else float(out)
    zz = z[nz]
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(zz))
    lo = np.log(n1[nz]) + np.log(1e-8)
    hi = np.log(n1[nz]) + np.log(1e8)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        F = np.exp(2.0 * (logabs - a * mid[:, None])).sum(axis=-1)
        big = F > 1.0
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
    out[nz] = np.exp(0.5 * (lo + hi))
    return out if out.ndim else float(out)


def distance(L, z, w):
    """Quasi-distance ``d(z, w) = |z^{-1} o w|``."""
    return homogeneous_norm(L, compose(L, inverse(L, z), w))


def _padded(L, A0):
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    if A0.shape != (L.m0, L.m0):
        raise DomainError(f"A0 must be {L.m0}x{L.m0}, got {A0.shape}")
    Ab = np.zeros((L.N, L.N))
    Ab[:L.m0, :L.m0] = A0
    return Ab


def covariance_coefficients(L, A0):
    """Matrices ``K_d`` with ``C(t) = sum_d t^(d+1) K_d``.

    Integrating ``E(s) A E(s)^T = sum_{j,k} s^(j+k) P_j A P_k^T`` termwise.
    """
    Ab = _padded(L, A0)
    P = L._P
    deg = 2 * (len(P) - 1)
    K = np.zeros((deg + 1, L.N, L.N))
    for j in range(len(P)):
        for k in range(len(P)):
            K[j + k] += P[j] @ Ab @ P[k].T / (j + k + 1)
    return K


def covariance(L, A0, t):
    """Exact ``C(t) = int_0^t E(s) A0 E(s)^T ds`` for ``t > 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("covariance needs t > 0")
    K = covariance_coefficients(L, A0)
    powers = t[..., None] ** np.arange(1, len(K) + 1)
    return np.einsum("...d,dij->...ij", powers, K)


def hypoellipticity_check(L, A0, times=None):
    """Kalman-type test: ``C(t)`` positive definite on sampled times.

    Definiteness is judged on the Jacobi-scaled matrix
    ``diag(C)^(-1/2) C diag(C)^(-1/2)``, whose smallest eigenvalue must exceed
    ``PD_TOL``; the raw eigenvalues of ``C(t)`` span ``t^(2 kappa + 1)``
    orders of magnitude so a bare relative threshold would be meaningless.

    Returns
    -------
    ok : bool
    report : dict
        Smallest raw and scaled eigenvalue per sampled time.
    """
    if times is None:
        times = [1e-3, 1e-2, 1e-1, 1.0]
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    if A0.shape != (L.m0, L.m0):
        raise DomainError(f"A0 must be {L.m0}x{L.m0}, got {A0.shape}")
    ok = True
    rows = []
    for t in times:
        C = covariance(L, A0, t)
        lam_raw = float(np.linalg.eigvalsh(C)[0])
        d = np.diag(C)
        if np.any(d <= 0):
            lam = 0.0
        else:
            s = 1.0 / np.sqrt(d)
            lam = float(np.linalg.eigvalsh(C * s[:, None] * s[None, :])[0])
        ok &= lam > PD_TOL
        rows.append({"t": t, "min_eig": lam_raw, "min_eig_scaled": lam})
    return bool(ok), {"samples": rows}


# ---------------------------------------------------------------- cylinders

def _unit_ball_volume(m):
    from scipy.special import gamma as G
    return np.pi ** (m / 2) / G(m / 2 + 1)


def _sample_ball(rng, n, m):
    g = rng.standard_normal((n, m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = rng.random(n) ** (1.0 / m)
    return g * rad[:, None]


def sample_unit_cylinder(L, n, rng):
    """Uniform samples of ``B_1 x ... x B_1 x (-1, 0]``."""
    parts = [_sample_ball(rng, n, mj) for mj in L.block.m]
    t = -rng.random(n)
    return np.column_stack(parts + [t])


def in_unit_cylinder(L, zeta):
    zeta = np.asarray(zeta, dtype=float)
    off = L.block.offsets
    ok = (zeta[..., -1] > -1.0) & (zeta[..., -1] <= 0.0)
    for j in range(len(L.block.m)):
        ok &= np.linalg.norm(zeta[..., off[j]:off[j + 1]], axis=-1) <= 1.0
    return ok


class Cylinder:
    """Slanted cylinder ``Q_r(z0) = z0 o delta_r(Q_1)``.

    The unit cylinder is taken half-open in time, ``(-1, 0]``, so the centre
    belongs to its own cylinder (it sits on the top face, ``zeta = 0``).
    """

    def __init__(self, L, z0, r):
        if r <= 0:
            raise GeometryError("cylinder radius must be positive")
        self.L = L
        self.z0 = np.asarray(z0, dtype=float)
        self.r = float(r)

    def to_unit(self, z):
        """``zeta = delta_{1/r}(z0^{-1} o z)``."""
        w = compose(self.L, inverse(self.L, self.z0), z)
        return dilate(self.L, 1.0 / self.r, w)

    def from_unit(self, zeta):
        return compose(self.L, self.z0, dilate(self.L, self.r, zeta))

    def contains(self, z):
        return in_unit_cylinder(self.L, self.to_unit(z))

    def sample(self, n, rng):
        return self.from_unit(sample_unit_cylinder(self.L, n, rng))

    def measure(self):
        vol = np.prod([_unit_ball_volume(mj) for mj in self.L.block.m])
        return float(vol * self.r ** (self.L.Q + 2))

    def bounding_box(self, n_time=2001):
        """Axis-aligned box containing the cylinder.

        The spatial centre ``E(s) x0`` is polynomial in ``s``; it is scanned
        on a fine grid and padded by 1% of the half-widths.
        """
        s = np.linspace(-self.r ** 2, 0.0, n_time)
        x0, t0 = self.z0[:-1], self.z0[-1]
        # z0 o w has spatial part x_w + E(t_w) x0
        centres = np.einsum("kij,j->ki", exp_group(self.L, s), x0)
        half = self.r ** self.L.alpha
        pad = 0.01 * half + 1e-12 * (1 + np.abs(centres).max(axis=0))
        lo = centres.min(axis=0) - half - pad
        hi = centres.max(axis=0) + half + pad
        return np.append(lo, t0 - self.r ** 2), np.append(hi, t0)

    def mc_measure(self, n, rng):
        """Monte Carlo volume and its standard error."""
        lo, hi = self.bounding_box()
        pts = lo + (hi - lo) * rng.random((n, len(lo)))
        hit = self.contains(pts)
        box = np.prod(hi - lo)
        p = hit.mean()
        return float(box * p), float(box * np.sqrt(p * (1 - p) / n))

    def ball_gauge(self, z):
        """Smallest ``c`` with ``z`` in the ball product of radius ``c r``."""
        z = np.asarray(z, dtype=float)
        off = self.L.block.offsets
        g = np.sqrt(np.maximum(self.z0[-1] - z[..., -1], 0.0)) / self.r
        for j in range(len(self.L.block.m)):
            d = np.linalg.norm(z[..., off[j]:off[j + 1]] - self.z0[off[j]:off[j + 1]], axis=-1)
            g = np.maximum(g, (d / self.r ** (2 * j + 1)) ** (1.0 / (2 * j + 1)))
        return g

    def sample_ball_product(self, n, rng, radius):
        """Uniform samples of the ball product of the given radius around ``z0``."""
        parts = []
        off = self.L.block.offsets
        for j, mj in enumerate(self.L.block.m):
            parts.append(self.z0[off[j]:off[j + 1]] + radius ** (2 * j + 1) * _sample_ball(rng, n, mj))
        t = self.z0[-1] - radius ** 2 * rng.random(n)
        return np.column_stack(parts + [t])


def estimate_ball_sandwich(cyl, n, rng):
    """Empirical constant ``c_bar`` of the ball representation.

    Outer: the largest ball gauge over samples of the cylinder. Inner: the
    largest ``rho`` (by bisection) such that every sample of the ball product
    of radius ``rho`` lies in the cylinder; ``c_bar = max(c_out, r/rho)``.
    """
    pts = cyl.sample(n, rng)
    c_out = float(np.max(cyl.ball_gauge(pts)))
    unit = cyl.sample_ball_product(n, rng, 1.0)
    # rescale the unit ball-product samples to radius rho around z0
    a = dilation_exponents(cyl.L)
    rel = unit - cyl.z0

    def all_inside(rho):
        return bool(np.all(cyl.contains(cyl.z0 + rel * rho ** a)))

    lo, hi = 0.0, cyl.r
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if all_inside(mid):
            lo = mid
        else:
            hi = mid
    c_in = cyl.r / lo if lo > 0 else np.inf
    return {"c_out": c_out, "c_in": float(c_in), "c_bar": float(max(c_out, c_in))}


def estimate_nesting_constant(L, r, rho, n_centres, n_inner, rng):
    """Empirical ``c_tilde`` with ``z o Q_{c (r - rho)} in Q_r`` for ``z`` in ``Q_rho``."""
    if not 0 < rho < r <= 1:
        raise GeometryError("need 0 < rho < r <= 1")
    big = Cylinder(L, origin(L), r)
    centres = Cylinder(L, origin(L), rho).sample(n_centres, rng)
    unit = sample_unit_cylinder(L, n_inner, rng)

    def ok(c):
        s = c * (r - rho)
        w = dilate(L, s, unit)
        pts = compose(L, centres[:, None, :], w[None, :, :])
        return bool(np.all(big.contains(pts)))

    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def holder_seminorm(L, u, alpha, domain, n_pairs=20000, rng=None):
    """Largest ``|u(z) - u(w)| / d(z, w)^alpha`` over sampled node pairs.

    Parameters
    ----------
    u : GridField
        Axes are the N spatial coordinates followed by time.
    domain : Cylinder
        Only nodes inside it are used.

    Both orders of each pair are evaluated since ``d`` is only a
    quasi-distance. When the domain holds fewer than ``sqrt(2 n_pairs)``
    nodes every pair is used.
    """
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    pts = np.stack([m.ravel() for m in u.mesh()], axis=-1)
    vals = u.values.ravel()
    inside = domain.contains(pts)
    if not inside.any():
        raise DomainError("no grid nodes inside the domain")
    return pair_seminorm(L, pts[inside], vals[inside], alpha, n_pairs, rng)


def pair_seminorm(L, pts, vals, alpha, n_pairs=20000, rng=None):
    """Largest Hoelder quotient over pairs drawn from scattered points."""
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    n = len(vals)
    if n < 2:
        return 0.0
    if n * (n - 1) // 2 <= n_pairs:
        i, j = np.triu_indices(n, 1)
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        i = rng.integers(0, n, n_pairs)
        j = rng.integers(0, n, n_pairs)
        keep = i != j
        i, j = i[keep], j[keep]
    du = np.abs(vals[i] - vals[j])
    best = 0.0
    for a, b in ((i, j), (j, i)):
        d = distance(L, pts[a], pts[b])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, du / d ** alpha, 0.0)
        best = max(best, float(q.max()))
    return best
