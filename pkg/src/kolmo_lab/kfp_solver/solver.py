"""Explicit finite-difference solver for kinetic Kolmogorov equations

    d_v(a d_v u) + s v d_x u + b d_v u + c u - d_t u = f    on (v, x, t),

marched forward in ``t`` from the past face. ``s`` is the orientation of
the transport term (``+1`` matches the block matrix ``B_1 = 1``).

Scheme: flux-form centred diffusion with ``a`` sampled at half nodes,
first-order upwind transport and drift, explicit source. With
``dt <= 1 / (2 Lambda / h_v^2 + max|v| / h_x + max|b| / h_v + max|c|)``
every update is a convex combination, so the discrete maximum principle
holds when ``c <= 0`` and ``f = 0``.
"""

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import CFLError, DomainError, ExponentError, NumericalError
from ..grid import GridField

Q_KINETIC = 4


def _field(g, V, X, t):
    if g is None:
        return np.zeros_like(V)
    if callable(g):
        return np.broadcast_to(np.asarray(g(V, X, t), dtype=float), V.shape)
    return np.broadcast_to(np.asarray(g, dtype=float), V.shape)


@dataclass
class OperatorSpec:
    """Coefficients of the kinetic operator.

    ``a``, ``b``, ``c``, ``f`` are constants or callables ``g(v, x, t)``
    acting on arrays. ``time_dependent`` asks the solver to re-sample them
    at every step (otherwise they are sampled once at the initial time).
    """

    a: object = 1.0
    b: object = 0.0
    c: object = 0.0
    f: object = 0.0
    lam: float = 1.0
    Lam: float = 1.0
    q: float = 4.0
    Q: int = Q_KINETIC
    time_dependent: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("ellipticity lower bound must be positive")
        if self.Lam < self.lam:
            raise DomainError("need lam <= Lam")
        if not self.q > (self.Q + 2) / 2:
            raise ExponentError(f"need q > (Q+2)/2 = {(self.Q + 2) / 2}")

    def check_bounds(self, V, X, t, tol=1e-12):
        av = _field(self.a, V, X, t)
        if av.min() < self.lam - tol or av.max() > self.Lam + tol:
            raise DomainError(f"a outside [{self.lam}, {self.Lam}]: [{av.min()}, {av.max()}]")


def checkerboard(lam, Lam, scale, seed=None, offset=(0.0, 0.0)):
    """Checkerboard coefficient ``a(v, x) in {lam, Lam}`` on cells of size ``scale``.

    Cells are ``scale`` wide in ``v`` and ``scale^3`` in ``x`` would shrink
    too fast, so both axes use ``scale``. With ``seed`` each cell's value is
    drawn at random instead of alternating.
    """
    ov, ox = offset
    if seed is None:
        def a(v, x, t=0.0):
            k = np.floor((v - ov) / scale) + np.floor((x - ox) / scale)
            return np.where(np.mod(k, 2) == 0, Lam, lam)
        return a
    rng = np.random.default_rng(seed)
    table = rng.integers(0, 2, size=(512, 512))

    def a(v, x, t=0.0):
        i = np.mod(np.floor((v - ov) / scale).astype(int), 512)
        j = np.mod(np.floor((x - ox) / scale).astype(int), 512)
        return np.where(table[i, j] == 1, Lam, lam)
    return a


def _velocity(v, orientation, transport):
    if transport is None:
        return orientation * v
    if callable(transport):
        return np.asarray(transport(v), dtype=float)
    return np.asarray(transport, dtype=float)


def stable_dt(spec, v, x, t=0.0, orientation=1.0, transport=None):
    """Largest step of the monotone explicit scheme on the grid."""
    hv = v[1] - v[0]
    hx = x[1] - x[0]
    V, X = np.meshgrid(v, x, indexing="ij")
    bmax = float(np.max(np.abs(_field(spec.b, V, X, t))))
    cmax = float(np.max(np.abs(_field(spec.c, V, X, t))))
    vmax = float(np.max(np.abs(_velocity(v, orientation, transport))))
    rate = 2 * spec.Lam / hv ** 2 + vmax / hx + bmax / hv + cmax
    return 1.0 / rate


def solve(spec, v, x, t0, t1, initial, boundary=None, n_snap=65, dt=None,
          orientation=1.0, backend=None, check_nan_every=50, transport=None,
          post_step=None):
    """March the equation from ``t0`` to ``t1`` on the tensor grid ``v x x``.

    Parameters
    ----------
    initial : callable or ndarray
        Data at ``t0``; a callable receives meshes ``(V, X)``.
    boundary : callable, optional
        ``g(V, X, t)`` giving Dirichlet data on the Kolmogorov boundary:
        both ``v``-faces and the inflow ``x``-face of each velocity row
        (``x_max`` where ``s v > 0``, ``x_min`` where ``s v < 0``). It is
        called with the 1-D coordinate arrays of those face nodes only.
        Defaults to freezing the initial values there.
    n_snap : int
        Number of equispaced recorded times including ``t0`` and ``t1``.
    dt : float, optional
        Requested step. Refused with :class:`CFLError` when above the
        stability limit; defaults to 0.9 of it.

    Returns
    -------
    GridField
        Axes ``(v, x, t)``; ``cfl`` holds the step, substeps and limit.
    """
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    if t1 <= t0:
        raise DomainError("need t1 > t0")
    hv = v[1] - v[0]
    hx = x[1] - x[0]
    V, X = np.meshgrid(v, x, indexing="ij")
    spec.check_bounds(V, X, t0)
    limit = stable_dt(spec, v, x, t0, orientation, transport)
    if dt is None:
        dt = 0.9 * limit
    elif dt > limit * (1 + 1e-12):
        raise CFLError(f"dt = {dt:.3e} exceeds the stability limit {limit:.3e}", 0.9 * limit)
    times = np.linspace(t0, t1, n_snap)
    sub = int(np.ceil((times[1] - times[0]) / dt - 1e-9))
    dts = (times[1] - times[0]) / sub
    k = kernels.get_backend(backend)

    u = np.ascontiguousarray(initial(V, X) if callable(initial) else np.array(initial, dtype=float))
    if u.shape != V.shape:
        raise DomainError("initial data has the wrong shape")
    vel = np.ascontiguousarray(_velocity(v, orientation, transport))
    face = np.zeros(V.shape, dtype=bool)
    face[0, :] = face[-1, :] = True
    face[vel > 0, -1] = True
    face[vel < 0, 0] = True

    Vf, Xf = V[face], X[face]
    if boundary is None:
        frozen = u[face].copy()

        def boundary(VV, XX, tt):
            return frozen
    Vh = 0.5 * (V[1:] + V[:-1])
    Xh = X[:-1]

    def coeffs(t):
        a_half = np.ascontiguousarray(_field(spec.a, Vh, Xh, t), dtype=float)
        bb = np.ascontiguousarray(_field(spec.b, V, X, t), dtype=float)
        cc = np.ascontiguousarray(_field(spec.c, V, X, t), dtype=float)
        ff = np.ascontiguousarray(_field(spec.f, V, X, t), dtype=float)
        return a_half, bb, cc, ff

    a_half, bb, cc, ff = coeffs(t0)
    if a_half.min() < spec.lam - 1e-12 or a_half.max() > spec.Lam + 1e-12:
        raise DomainError("a outside [lam, Lam] at half nodes")
    snaps = np.empty(V.shape + (n_snap,))
    snaps[..., 0] = u
    out = np.empty_like(u)
    t = t0
    step = 0
    for s in range(1, n_snap):
        for i in range(sub):
            if spec.time_dependent:
                a_half, bb, cc, ff = coeffs(t)
            k.kinetic_step(u, a_half, vel, bb, cc, ff, dts, hv, hx, out)
            t = times[s] if i == sub - 1 else times[s - 1] + (i + 1) * dts
            step += 1
            out[face] = boundary(Vf, Xf, t)
            if post_step is not None:
                post_step(out, t, dts)
            u, out = out, u
            if step % check_nan_every == 0 and not np.all(np.isfinite(u)):
                raise NumericalError(f"non-finite value at step {step}", step)
        if not np.all(np.isfinite(u)):
            raise NumericalError(f"non-finite value at step {step}", step)
        snaps[..., s] = u
    return GridField((v, x, times), snaps, ("v", "x", "t"),
                     bc={"type": "kolmogorov-dirichlet", "orientation": orientation},
                     cfl={"dt": dts, "substeps": sub, "limit": limit, "steps": step})
