"""Asian options priced through the degenerate Kolmogorov equation.

With ``tau = T - t``, ``xi = log(S / S0)`` and the running integral
``A = int_0^t f(S) ds``, the price ``Z(S, A, t)`` solves

    Z_tau = sigma^2/2 Z_xixi + (r - sigma^2/2) Z_xi + f(S) Z_A - r Z.

Shifting ``a = A + c tau`` with ``c = f(S0)`` turns the transport speed
into ``f(S) - f(S0)``, which vanishes at ``xi = 0``: ``xi`` for geometric
averaging (so the equation is exactly of kinetic type ``xi d_a``) and
``S0 (e^xi - 1)`` for arithmetic averaging. The kinetic solver then marches
in ``tau`` from the payoff and the price is ``W(0, c T, T)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ..errors import DomainError, LocalizationError
from ..kfp_solver.solver import OperatorSpec, solve
from ..stochastic import CHUNK, _stream

GEOMETRIC = "geometric"
ARITHMETIC = "arithmetic"


@dataclass
class AsianModel:
    """Black-Scholes stock with a fixed-strike call on the time average.

    The payoff is ``(avg - K)_+`` where ``avg = A_T / T`` (arithmetic) or
    ``exp(A_T / T)`` (geometric, ``A`` integrates ``log S``).
    """

    S0: float = 100.0
    sigma: float = 0.2
    r: float = 0.05
    T: float = 1.0
    averaging: str = GEOMETRIC
    strike: float = 100.0

    def __post_init__(self):
        if self.S0 <= 0 or self.T <= 0:
            raise DomainError("need S0 > 0 and T > 0")
        if self.sigma < 0:
            raise DomainError("need sigma >= 0")
        if self.averaging not in (GEOMETRIC, ARITHMETIC):
            raise DomainError(f"unknown averaging {self.averaging!r}")

    @property
    def mu(self):
        return self.r - 0.5 * self.sigma ** 2

    @property
    def shift(self):
        """``c = f(S0)``."""
        return np.log(self.S0) if self.averaging == GEOMETRIC else self.S0

    def f(self, S):
        return np.log(S) if self.averaging == GEOMETRIC else S

    def payoff(self, A):
        avg = A / self.T
        if self.averaging == GEOMETRIC:
            avg = np.exp(avg)
        return np.maximum(avg - self.strike, 0.0)

    def speed(self, xi):
        """Transport speed ``f(S) - f(S0)`` in the shifted variable."""
        if self.averaging == GEOMETRIC:
            return np.asarray(xi, dtype=float)
        return self.S0 * np.expm1(xi)

    def to_dict(self):
        return {"S0": self.S0, "sigma": self.sigma, "rate": self.r, "T": self.T,
                "averaging": self.averaging, "payoff": {"type": "call", "strike": self.strike}}


def _moments_A(m, tau, xi=0.0):
    """Mean and standard deviation of the remaining integral over ``tau``.

    Exact for geometric averaging; for arithmetic averaging the standard
    deviation is that of the linearised (lognormal-to-normal) integral.
    """
    if m.averaging == GEOMETRIC:
        mean = (np.log(m.S0) + xi) * tau + 0.5 * m.mu * tau ** 2
        sd = m.sigma * np.sqrt(tau ** 3 / 3.0)
    else:
        S = m.S0 * np.exp(xi)
        mean = S * (np.expm1(m.r * tau) / m.r if m.r != 0 else tau)
        sd = S * m.sigma * np.sqrt(tau ** 3 / 3.0) * np.exp(max(m.r, 0.0) * tau)
    return mean, sd


def boundary_value(m, xi, a, tau):
    """Far-field price in the shifted variables.

    Geometric: the exact conditional price (the remaining log-integral is
    Gaussian). Arithmetic: discounted intrinsic value of the expected
    average, exact wherever the option is sure to finish in or out of the
    money.
    """
    xi = np.asarray(xi, dtype=float)
    A = np.asarray(a, dtype=float) - m.shift * tau
    disc = np.exp(-m.r * tau)
    if tau <= 0:
        return m.payoff(A) * np.ones_like(xi)
    if m.averaging == GEOMETRIC:
        mean = (A + (np.log(m.S0) + xi) * tau + 0.5 * m.mu * tau ** 2) / m.T
        s = m.sigma * np.sqrt(tau ** 3 / 3.0) / m.T
        if s == 0:
            return disc * np.maximum(np.exp(mean) - m.strike, 0.0)
        d2 = (mean - np.log(m.strike)) / s
        return disc * (np.exp(mean + 0.5 * s * s) * ndtr(d2 + s) - m.strike * ndtr(d2))
    growth = np.expm1(m.r * tau) / m.r if m.r != 0 else tau
    return disc * np.maximum((A + m.S0 * np.exp(xi) * growth) / m.T - m.strike, 0.0)


def deterministic_price(m, order=64):
    """Price when ``sigma = 0``: the payoff along ``S_t = S0 e^(r t)``.

    The running integral is evaluated by Gauss-Legendre quadrature, which
    is the method of characteristics for the (purely hyperbolic) equation.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * m.T * (x + 1.0)
    A = 0.5 * m.T * np.sum(w * m.f(m.S0 * np.exp(m.r * t)))
    return float(np.exp(-m.r * m.T) * m.payoff(A))


def default_bounds(m, n_sd=6.0, margin=0.2):
    """Localisation box for ``(xi, a)``.

    ``xi`` spans ``+-n_sd sigma sqrt(T)``; ``a`` is centred on ``cT`` and
    spans the mean shift of the remaining integral plus ``n_sd`` standard
    deviations, widened by ``margin``.
    """
    half_xi = n_sd * m.sigma * np.sqrt(m.T)
    mean, sd = _moments_A(m, m.T)
    centre = m.shift * m.T
    lo = min(centre, mean) - n_sd * sd
    hi = max(centre, mean) + n_sd * sd
    pad = margin * (hi - lo)
    return (-half_xi, half_xi), (lo - pad, hi + pad)


def _check_localisation(m, xi_bounds, a_bounds, tail=1e-8):
    mean, sd = _moments_A(m, m.T)
    lo, hi = a_bounds
    if sd > 0:
        mass = ndtr((lo - mean) / sd) + ndtr(-(hi - mean) / sd)
    else:
        mass = 0.0 if lo < mean < hi else 1.0
    half = max(abs(xi_bounds[0]), abs(xi_bounds[1]))
    xi_mass = 2 * ndtr(-half / (m.sigma * np.sqrt(m.T))) if m.sigma > 0 else 0.0
    if mass > tail or xi_mass > tail or not lo < m.shift * m.T < hi:
        raise LocalizationError(
            f"grid leaves tail mass {max(mass, xi_mass):.2e} > {tail:.0e} outside",
            suggested_bounds=default_bounds(m))


def _solve_grid(m, n_xi, n_a, xi_bounds, a_bounds, backend=None):
    xi = np.linspace(*xi_bounds, n_xi)
    a = np.linspace(*a_bounds, n_a)
    diff = 0.5 * m.sigma ** 2
    spec = OperatorSpec(a=diff, b=m.mu, c=-m.r, f=0.0, lam=diff, Lam=diff)

    def initial(XI, AA):
        return boundary_value(m, XI, AA, 0.0)

    def bnd(XI, AA, tau):
        return boundary_value(m, XI, AA, tau)

    u = solve(spec, xi, a, 0.0, m.T, initial, boundary=bnd, n_snap=2,
              transport=m.speed, backend=backend)
    return _bilinear(u.axes[0], u.axes[1], u.values[..., -1], 0.0, m.shift * m.T), u.cfl


def _bilinear(x, y, vals, x0, y0):
    i = int(np.clip(np.searchsorted(x, x0) - 1, 0, len(x) - 2))
    j = int(np.clip(np.searchsorted(y, y0) - 1, 0, len(y) - 2))
    sx = (x0 - x[i]) / (x[i + 1] - x[i])
    sy = (y0 - y[j]) / (y[j + 1] - y[j])
    return float((1 - sx) * (1 - sy) * vals[i, j] + sx * (1 - sy) * vals[i + 1, j]
                 + (1 - sx) * sy * vals[i, j + 1] + sx * sy * vals[i + 1, j + 1])


def price_asian(m, n_xi=161, n_a=321, levels=2, xi_bounds=None, a_bounds=None,
                backend=None):
    """PDE price ``Z(S0, A=0, t=0)`` with a refinement-based error estimate.

    The grid is refined ``levels - 1`` times by halving both spacings.
    The scheme is first order (upwind transport), so the two finest prices
    are Richardson-extrapolated as ``2 P_fine - P_coarse``, and
    ``|P_fine - P_coarse|`` is reported as the discretisation estimate.

    Returns
    -------
    dict
        ``price``, ``discretization_estimate`` and ``diagnostics``.
    """
    if m.sigma == 0:
        p = deterministic_price(m)
        return {"price": p, "discretization_estimate": 0.0,
                "diagnostics": {"method": "characteristics", "model": m.to_dict()}}
    dxb, dab = default_bounds(m)
    xi_bounds = dxb if xi_bounds is None else tuple(xi_bounds)
    a_bounds = dab if a_bounds is None else tuple(a_bounds)
    _check_localisation(m, xi_bounds, a_bounds)
    prices = []
    cfl = []
    nx, na = n_xi, n_a
    for _ in range(levels):
        p, c = _solve_grid(m, nx, na, xi_bounds, a_bounds, backend)
        prices.append(p)
        cfl.append({"n_xi": nx, "n_a": na, **c})
        nx, na = 2 * nx - 1, 2 * na - 1
    if levels >= 2:
        price = 2 * prices[-1] - prices[-2]
        est = abs(prices[-1] - prices[-2])
    else:
        price, est = prices[-1], float("nan")
    return {"price": float(price), "discretization_estimate": float(est),
            "diagnostics": {"method": "pde", "levels": prices, "grids": cfl,
                            "xi_bounds": list(xi_bounds), "a_bounds": list(a_bounds),
                            "model": m.to_dict()}}


def mc_asian_oracle(m, n_paths, seed, n_steps=500, chunk=CHUNK, return_payoffs=False):
    """Monte Carlo price from exact GBM samples and trapezoidal averaging.

    Each block of ``chunk`` paths draws from its own counter-based stream
    keyed by ``(seed, block)``, so results do not depend on how blocks are
    scheduled.
    """
    t = np.linspace(0.0, m.T, n_steps + 1)
    dt = t[1] - t[0]
    w = np.full(n_steps + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    disc = np.exp(-m.r * m.T)
    pay = np.empty(n_paths)
    for b, start in enumerate(range(0, n_paths, chunk)):
        k = min(chunk, n_paths - start)
        rng = _stream(seed, b)
        dW = rng.standard_normal((k, n_steps)) * np.sqrt(dt)
        W = np.zeros((k, n_steps + 1))
        np.cumsum(dW, axis=1, out=W[:, 1:])
        logS = np.log(m.S0) + m.mu * t + m.sigma * W
        A = (m.f(np.exp(logS)) if m.averaging == ARITHMETIC else logS) @ w
        pay[start:start + k] = disc * m.payoff(A)
    out = {"price": float(pay.mean()),
           "stderr": float(pay.std(ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else float("nan"),
           "n_paths": n_paths, "n_steps": n_steps, "seed": seed}
    if return_payoffs:
        out["payoffs"] = pay
    return out
