"""Kinetic and relativistic Langevin ensembles, density checks and the
Lorentz composition law.

Random numbers come from counter-based Philox streams: paths are cut into
fixed chunks of ``CHUNK`` and chunk ``k`` draws from
``Philox(SeedSequence([seed, k]))``. The ensemble is therefore bit-identical
whatever the number of worker threads.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import group_geometry as gg
from .errors import DomainError, NumericalError
from .grid import write_binary

CHUNK = 4096
SQRT2 = np.sqrt(2.0)


@dataclass
class PathEnsemble:
    """Seeded collection of trajectories sampled at ``times``.

    ``states`` has shape ``(n_paths, len(times), dim)``; ``blown_up`` flags
    paths frozen after a non-finite state.
    """

    kind: str
    dt: float
    n_steps: int
    n_paths: int
    seed: int
    times: np.ndarray
    states: np.ndarray
    blown_up: np.ndarray
    labels: tuple = ()
    meta: dict = field(default_factory=dict)

    def at(self, t):
        """States at the recorded time nearest to ``t`` (warns if off-grid)."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            warnings.warn(f"t={t} not recorded; using nearest t={self.times[k]}")
        return self.states[:, k, :]

    def summary(self):
        fin = self.states[:, -1, :]
        return {
            "kind": self.kind, "dt": self.dt, "n_steps": self.n_steps,
            "n_paths": self.n_paths, "seed": self.seed, "labels": list(self.labels),
            "final_mean": fin.mean(axis=0).tolist(),
            "final_cov": np.atleast_2d(np.cov(fin.T)).tolist(),
            "blown_up": int(self.blown_up.sum()),
        }

    def to_binary(self, path):
        write_binary(path, self.states, dt=self.dt, seed=self.seed)


def _stream(seed, chunk_id):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(chunk_id)])))


def _record_steps(n_steps, record_every):
    if record_every is None or record_every >= n_steps:
        return np.array([0, n_steps])
    steps = np.arange(0, n_steps + 1, record_every)
    if steps[-1] != n_steps:
        steps = np.append(steps, n_steps)
    return steps


def _run_chunks(n_paths, worker, threads):
    ids = list(range((n_paths + CHUNK - 1) // CHUNK))
    sizes = [min(CHUNK, n_paths - k * CHUNK) for k in ids]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(worker, ids, sizes))
    else:
        parts = [worker(k, m) for k, m in zip(ids, sizes)]
    states = np.concatenate([p[0] for p in parts], axis=0)
    flags = np.concatenate([p[1] for p in parts], axis=0)
    return states, flags


def simulate_langevin(n, v0, x0, T, dt, n_paths, seed, friction=False,
                      noise=SQRT2, record_every=None, threads=1):
    """Euler-Maruyama for ``dV = noise dW - [friction] V dt``, ``dX = V dt``.

    ``noise`` defaults to sqrt(2); setting it to 0 is the deterministic test
    hook. States are ``(V, X)`` of length ``2n``.
    """
    if dt <= 0 or n_paths <= 0 or T <= 0:
        raise DomainError("need dt > 0, T > 0 and n_paths > 0")
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * T:
        raise DomainError("T must be a multiple of dt")
    if dt > 1e-2 * T:
        raise DomainError("need dt <= 1e-2 T")
    v0 = np.broadcast_to(np.asarray(v0, dtype=float), (n,))
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (n,))
    rec = _record_steps(n_steps, record_every)
    sdt = np.sqrt(dt)

    def worker(chunk_id, m):
        rng = _stream(seed, chunk_id)
        V = np.tile(v0, (m, 1))
        X = np.tile(x0, (m, 1))
        out = np.empty((m, len(rec), 2 * n))
        bad = np.zeros(m, dtype=bool)
        r = 0
        for k in range(n_steps + 1):
            if k == rec[r]:
                out[:, r, :n] = V
                out[:, r, n:] = X
                r += 1
            if k == n_steps:
                break
            dW = rng.standard_normal((m, n)) * sdt
            Vn = V + noise * dW
            if friction:
                Vn -= V * dt
            X = X + V * dt
            V = Vn
            if not np.all(np.isfinite(V)):
                now = ~np.all(np.isfinite(V), axis=1)
                bad |= now
                V[now] = 0.0
        return out, bad

    states, flags = _run_chunks(n_paths, worker, threads)
    labels = tuple(f"v{i}" for i in range(n)) + tuple(f"x{i}" for i in range(n))
    return PathEnsemble("langevin", dt, n_steps, n_paths, int(seed), rec * dt, states, flags,
                        labels, {"friction": bool(friction), "noise": float(noise)})


def silverman_bandwidth(samples):
    """Per-axis Silverman rule ``sigma_i (4 / ((d+2) n))^(1/(d+4))``."""
    n, d = samples.shape
    sd = samples.std(axis=0, ddof=1)
    return sd * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))


def kde_2d(samples, gx, gy, bandwidth=None, chunk=20000):
    """Product-Gaussian kernel density estimate on the tensor grid ``gx x gy``."""
    samples = np.asarray(samples, dtype=float)
    h = silverman_bandwidth(samples) if bandwidth is None else np.asarray(bandwidth)
    dens = np.zeros((len(gx), len(gy)))
    for s in range(0, len(samples), chunk):
        blk = samples[s:s + chunk]
        A = np.exp(-0.5 * ((gx[:, None] - blk[None, :, 0]) / h[0]) ** 2)
        Bm = np.exp(-0.5 * ((gy[:, None] - blk[None, :, 1]) / h[1]) ** 2)
        dens += A @ Bm.T
    return dens / (len(samples) * 2 * np.pi * h[0] * h[1])


def _trapz2(f, gx, gy):
    return np.trapezoid(np.trapezoid(f, gy, axis=1), gx)


def density_vs_gamma(ens, G, t, n_grid=201, width=6.0, start=None):
    """L1 distance between a KDE of ``(V_t, X_t)`` and ``Gamma(., start)``.

    ``G`` must be the evaluator of the transition density of the simulated
    system; for the frictionless ensemble with sqrt(2) noise this is the
    kinetic structure with ``B_1 = -1`` and ``A0 = I`` (covariance ``2 C(t)``).

    The samples are whitened with their empirical mean and covariance
    factor ``Lc`` and the product-kernel KDE (Silverman bandwidth) is built
    in those coordinates; the reference density is pulled back by the same
    affine map. The L1 distance is invariant under that map, and the
    whitening removes the large smoothing bias axis-aligned kernels incur
    on the strongly correlated pair ``(V_t, X_t)``.

    Returns
    -------
    dict
        ``l1``, ``kde_mass`` and ``gamma_mass`` on the grid, and ``t``.
    """
    S = ens.at(t)
    if S.shape[1] != 2:
        raise DomainError("density_vs_gamma handles n = 1 only")
    if start is None:
        start = np.append(ens.states[0, 0, :], 0.0)
    tt = float(ens.times[int(np.argmin(np.abs(ens.times - t)))])
    mu = S.mean(axis=0)
    Lc = np.linalg.cholesky(np.cov(S.T))
    W = np.linalg.solve(Lc, (S - mu).T).T
    g = np.linspace(-width, width, n_grid)
    kde = kde_2d(W, g, g)
    M = np.stack(np.meshgrid(g, g, indexing="ij"), -1)
    X = M @ Lc.T + mu
    pts = np.concatenate([X, np.full(X.shape[:-1] + (1,), tt + start[-1])], -1)
    gam = G(pts, np.broadcast_to(start, pts.shape)) * abs(np.linalg.det(Lc))
    return {"l1": float(_trapz2(np.abs(kde - gam), g, g)),
            "kde_mass": float(_trapz2(kde, g, g)),
            "gamma_mass": float(_trapz2(gam, g, g)), "t": tt}


# ---------------------------------------------------------------- relativistic

def relativistic_sigma(p):
    """``sigma(p) = I + p p^T / (1 + sqrt(|p|^2 + 1))``; ``sigma^2 = I + p p^T``."""
    p = np.asarray(p, dtype=float)
    g = np.sqrt(np.sum(p * p, axis=-1) + 1.0)
    n = p.shape[-1]
    return np.eye(n) + p[..., :, None] * p[..., None, :] / (1.0 + g)[..., None, None]


def relativistic_diffusion_identity(p):
    """Residuals of ``sigma sigma^T = I + p p^T`` and ``gamma D = I + p p^T``."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    s = relativistic_sigma(p)
    target = np.eye(len(p)) + np.outer(p, p)
    g = np.sqrt(p @ p + 1.0)
    D = target / g
    return {"sigma": float(np.max(np.abs(s @ s.T - target))),
            "D": float(np.max(np.abs(g * D - target)))}


def simulate_relativistic(n, p0, x0, t0, S, ds, n_paths, seed, noise=SQRT2,
                          record_every=None, threads=1):
    """Euler-Maruyama for the relativistic Langevin system.

    ``dP = noise sigma(P) dW``, ``dX = P ds``, ``dT = sqrt(|P|^2 + 1) ds``;
    for n = 1 ``sigma(P) = sqrt(P^2 + 1)``. States are ``(P, X, T)``.
    """
    if ds <= 0 or n_paths <= 0 or S <= 0:
        raise DomainError("need ds > 0, S > 0 and n_paths > 0")
    n_steps = int(round(S / ds))
    p0 = np.broadcast_to(np.asarray(p0, dtype=float), (n,))
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (n,))
    rec = _record_steps(n_steps, record_every)
    sds = np.sqrt(ds)

    def worker(chunk_id, m):
        rng = _stream(seed, chunk_id)
        P = np.tile(p0, (m, 1))
        X = np.tile(x0, (m, 1))
        T = np.full(m, float(t0))
        out = np.empty((m, len(rec), 2 * n + 1))
        bad = np.zeros(m, dtype=bool)
        r = 0
        for k in range(n_steps + 1):
            if k == rec[r]:
                out[:, r, :n] = P
                out[:, r, n:2 * n] = X
                out[:, r, -1] = T
                r += 1
            if k == n_steps:
                break
            dW = rng.standard_normal((m, n)) * sds
            gam = np.sqrt(np.sum(P * P, axis=1) + 1.0)
            X = X + P * ds
            T = T + gam * ds
            P = P + noise * np.einsum("kij,kj->ki", relativistic_sigma(P), dW)
            fin = np.all(np.isfinite(P), axis=1)
            if not np.all(fin):
                bad |= ~fin
                P[~fin] = 0.0
        return out, bad

    states, flags = _run_chunks(n_paths, worker, threads)
    labels = tuple(f"p{i}" for i in range(n)) + tuple(f"x{i}" for i in range(n)) + ("t",)
    return PathEnsemble("relativistic", ds, n_steps, n_paths, int(seed), rec * ds, states, flags,
                        labels, {"noise": float(noise)})


def lorentz_compose(a, b):
    """Lorentz-invariant product ``a o_L b`` on R^{2n+1} = (p, x, t).

    ``(p0, x0, t0) o (p, x, t) = (p g0 + p0 g, x0 + x g0 + p0 t, t0 + t g0 + p0.x)``
    with ``g = sqrt(|p|^2 + 1)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = (a.shape[-1] - 1) // 2
    p0, x0, t0 = a[..., :n], a[..., n:2 * n], a[..., -1]
    p, x, t = b[..., :n], b[..., n:2 * n], b[..., -1]
    g0 = np.sqrt(np.sum(p0 * p0, axis=-1) + 1.0)[..., None]
    g = np.sqrt(np.sum(p * p, axis=-1) + 1.0)[..., None]
    pn = p * g0 + p0 * g
    xn = x0 + x * g0 + p0 * t[..., None]
    tn = t0 + t * g0[..., 0] + np.sum(p0 * x, axis=-1)
    return np.concatenate([pn, xn, tn[..., None]], axis=-1)


def lorentz_inverse(a, tol=1e-13, max_iter=100):
    """Right inverse ``b`` with ``a o_L b = 0``, by damped Newton."""
    a = np.asarray(a, dtype=float)
    d = len(a)
    b = -a.copy()
    e = np.zeros(d)

    def F(y):
        return lorentz_compose(a, y)

    for _ in range(max_iter):
        r = F(b)
        nr = np.linalg.norm(r)
        if nr < tol:
            return b
        J = np.empty((d, d))
        h = 1e-7
        for k in range(d):
            e[:] = 0
            e[k] = h
            J[:, k] = (F(b + e) - F(b - e)) / (2 * h)
        step = np.linalg.solve(J, -r)
        lam = 1.0
        while lam > 1e-6 and np.linalg.norm(F(b + lam * step)) >= nr:
            lam *= 0.5
        b = b + lam * step
    r = np.linalg.norm(F(b))
    if r > 1e-10:
        raise NumericalError(f"Lorentz inverse did not converge (residual {r:.2e})")
    return b


def lorentz_identity_checks(n=1, n_samples=200, seed=0):
    """Identity, inverse and small-momentum Galilean limit of the Lorentz law.

    For the limit both momenta are scaled by ``eps`` and the (p, x) part of the
    product is compared with the Galilean law; the log-log slope of the
    error against ``eps`` is fitted. (The time slot carries ``p0 . x`` at
    first order, so it is not part of the limit statement.)
    """
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n_samples, 2 * n + 1))
    zero = np.zeros(2 * n + 1)
    left = float(np.max(np.abs(lorentz_compose(zero, pts) - pts)))
    right = float(np.max(np.abs(lorentz_compose(pts, zero) - pts)))
    inv_err = 0.0
    for z in pts[:20]:
        w = lorentz_inverse(z)
        inv_err = max(inv_err, float(np.max(np.abs(lorentz_compose(z, w)))))
    eps = np.logspace(-4, -2, 9)
    a = rng.normal(size=2 * n + 1)
    b = rng.normal(size=2 * n + 1)
    errs = []
    for e in eps:
        aa, bb = a.copy(), b.copy()
        aa[:n] *= e
        bb[:n] *= e
        lz = lorentz_compose(aa, bb)
        gal = gg.compose_kinetic_alt(aa, bb)
        errs.append(float(np.max(np.abs(lz[:2 * n] - gal[:2 * n]))))
    slope = float(np.polyfit(np.log(eps), np.log(errs), 1)[0])
    return {"left_identity": left, "right_identity": right, "inverse": inv_err,
            "eps": eps.tolist(), "galilean_error": errs, "exponent": slope}
