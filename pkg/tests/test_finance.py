import numpy as np
import pytest
from scipy.stats import norm

from kolmo_lab.errors import ConstraintError, DomainError, LocalizationError
from kolmo_lab.finance import (AsianModel, ObstacleProblem, deterministic_price,
                               energy_functional, mc_asian_oracle, obstacle_toy_1d,
                               price_asian, solve_obstacle, stability_bound_check)
from kolmo_lab.finance.asian import ARITHMETIC
from kolmo_lab.kfp_solver import OperatorSpec, solve, stable_dt


def geometric_closed_form(S0, K, sigma, r, T):
    # log of the continuous geometric average is normal
    mu = np.log(S0) + 0.5 * (r - 0.5 * sigma ** 2) * T
    s = sigma * np.sqrt(T / 3)
    d2 = (mu - np.log(K)) / s
    return np.exp(-r * T) * (np.exp(mu + s * s / 2) * norm.cdf(d2 + s) - K * norm.cdf(d2))


# ---------------------------------------------------------------- Asian

def test_zero_volatility():
    g = AsianModel(sigma=0.0)
    exact_g = np.exp(-0.05) * max(100 * np.exp(0.05 / 2) - 100, 0)
    assert abs(price_asian(g)["price"] - exact_g) < 1e-4
    assert abs(mc_asian_oracle(g, 10, seed=1)["price"] - exact_g) < 1e-10
    a = AsianModel(sigma=0.0, averaging=ARITHMETIC)
    exact_a = np.exp(-0.05) * (100 * np.expm1(0.05) / 0.05 - 100)
    assert abs(deterministic_price(a) - exact_a) < 1e-10
    assert abs(mc_asian_oracle(a, 10, seed=1)["price"] - exact_a) < 1e-6


def test_geometric_pde_converges_to_closed_form():
    m = AsianModel()
    exact = geometric_closed_form(100, 100, 0.2, 0.05, 1.0)
    rep = price_asian(m, n_xi=41, n_a=81, levels=3)
    err = np.abs(np.array(rep["diagnostics"]["levels"]) - exact)
    order = np.log2(err[:-1] / err[1:])
    # upwind limited: observed 0.88 then 0.96
    assert np.all(np.diff(order) > 0) and order[-1] > 0.95
    assert abs(rep["price"] - exact) < 0.01


def test_geometric_pde_within_mc_band():
    m = AsianModel()
    pde = price_asian(m, n_xi=81, n_a=161, levels=2)
    mc = mc_asian_oracle(m, 100000, seed=5, n_steps=250)
    band = 3 * mc["stderr"] + pde["discretization_estimate"]
    assert abs(pde["price"] - mc["price"]) < band


def test_mc_stderr_scaling():
    m = AsianModel()
    n = np.array([1000, 4000, 16000, 64000])
    se = [mc_asian_oracle(m, int(k), seed=3, n_steps=50)["stderr"] for k in n]
    slope = np.polyfit(np.log(n), np.log(se), 1)[0]
    assert abs(slope + 0.5) < 0.05


def test_am_gm_pathwise():
    g = mc_asian_oracle(AsianModel(), 5000, seed=9, n_steps=100, return_payoffs=True)
    a = mc_asian_oracle(AsianModel(averaging=ARITHMETIC), 5000, seed=9, n_steps=100,
                        return_payoffs=True)
    assert np.all(g["payoffs"] <= a["payoffs"] + 1e-12)
    assert g["price"] <= a["price"]


def test_mc_deterministic_in_seed():
    a = mc_asian_oracle(AsianModel(), 10000, seed=4, n_steps=20)
    b = mc_asian_oracle(AsianModel(), 10000, seed=4, n_steps=20)
    assert a == b


def test_localization_error():
    with pytest.raises(LocalizationError) as ei:
        price_asian(AsianModel(), n_xi=21, n_a=21, levels=1, a_bounds=(4.55, 4.65))
    assert ei.value.suggested_bounds is not None


def test_model_validation():
    with pytest.raises(DomainError):
        AsianModel(S0=-1)
    with pytest.raises(DomainError):
        AsianModel(averaging="harmonic")


# ---------------------------------------------------------------- obstacle

V_AX = np.linspace(-2, 2, 31)
X_AX = np.linspace(-2, 2, 31)


def g_data(V, X, t):
    return 0.3 * np.exp(-(V ** 2 + X ** 2)) + 0.05 * t


def test_inactive_obstacle_matches_free_solve():
    spec = OperatorSpec()
    ob = ObstacleProblem(spec, lambda V, X, t: -1e6 + 0 * V, g_data, V_AX, X_AX, n_snap=9)
    u, rep = solve_obstacle(ob)
    free = solve(spec, V_AX, X_AX, -1.0, 0.0, lambda V, X: g_data(V, X, -1.0),
                 boundary=lambda V, X, t: g_data(V, X, t), n_snap=9)
    assert np.max(np.abs(u.values - free.values)) < 1e-8
    assert rep["active_fraction"] == 0


def test_binding_obstacle():
    # psi is the free solution recorded at every step, so the projection never acts
    spec = OperatorSpec()
    k = 150
    dt = 1.0 / k
    assert dt < stable_dt(spec, V_AX, X_AX)
    free = solve(spec, V_AX, X_AX, -1.0, 0.0, lambda V, X: g_data(V, X, -1.0),
                 boundary=lambda V, X, t: g_data(V, X, t), n_snap=k + 1, dt=dt)
    ob = ObstacleProblem(spec, free, g_data, V_AX, X_AX, n_snap=k + 1, dt=dt)
    u, rep = solve_obstacle(ob, ladder=False)
    assert np.max(np.abs(u.values - free.values)) < 1e-10
    assert rep["min_u_minus_psi"] > -1e-12


def test_obstacle_report():
    spec = OperatorSpec()

    def psi(V, X, t):
        return 0.3 * np.exp(-(V ** 2 + X ** 2)) - 0.1

    def g(V, X, t):
        return np.maximum(psi(V, X, t), 0.0)

    ob = ObstacleProblem(spec, psi, g, V_AX, X_AX, n_snap=9)
    u, rep = solve_obstacle(ob)
    assert rep["min_u_minus_psi"] >= -1e-6 * rep["scale"]
    assert rep["complementarity"] <= 1e-4
    assert rep["monotone_in_eps"]
    assert rep["penalty_gap"][-1] < rep["penalty_gap"][0]
    assert rep["pass"]


def test_obstacle_incompatible_data():
    with pytest.raises(DomainError):
        ObstacleProblem(OperatorSpec(), lambda V, X, t: 1.0 + 0 * V, lambda V, X, t: 0 * V,
                        V_AX, X_AX)


def test_toy_penalty_vs_pgs():
    for f in (0.0, 3.0):
        psi = lambda s: 0.5 - 2 * s ** 2  # noqa: E731
        _, u1, r1 = obstacle_toy_1d(psi, f=f, method="penalty")
        _, u2, r2 = obstacle_toy_1d(psi, f=f, method="pgs")
        assert np.max(np.abs(u1 - u2)) <= 1e-4
        assert r1["min_u_minus_psi"] >= -1e-12
        assert r1["complementarity"] < 1e-8


def test_toy_unconstrained_limit():
    # psi far below: u solves u'' = f with zero ends, u = f (v^2 - 1) / 2
    v, u, _ = obstacle_toy_1d(-10.0, f=2.0, method="penalty")
    np.testing.assert_allclose(u, v ** 2 - 1, atol=1e-10)


# ---------------------------------------------------------------- energy functional

def exact_scheme_solution():
    spec = OperatorSpec(a=lambda V, X, t: 1.0 + 0.5 * np.cos(V), lam=0.5, Lam=1.5)
    v = np.linspace(-2, 2, 21)
    x = np.linspace(-2, 2, 21)
    dt = 0.9 * stable_dt(spec, v, x)
    k = 20
    u = solve(spec, v, x, 0.0, k * dt, lambda V, X: np.exp(-V ** 2 - X ** 2), n_snap=k + 1)
    assert u.cfl["substeps"] == 1
    return spec, u


def test_energy_null_minimizer_and_quadratic_growth():
    spec, u = exact_scheme_solution()
    assert energy_functional(u, spec=spec) <= 1e-8
    v, x, t = u.axes
    vh = 0.5 * (v[1:] + v[:-1])
    ah = 1.0 + 0.5 * np.cos(vh)
    grad = np.diff(u.values[..., :-1], axis=0) / (v[1] - v[0])
    # a * dJ constant in v keeps div_v(a J) unchanged
    bump = (1.0 / ah)[:, None, None] * np.sin(x)[None, :, None] * np.ones(len(t) - 1)
    deltas = np.array([1e-3, 1e-2, 1e-1])
    vals = [energy_functional(u, J=grad + d * bump, spec=spec) for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(vals), 1)[0]
    assert abs(slope - 2) < 1e-6
    with pytest.raises(ConstraintError):
        energy_functional(u, J=grad + 0.1 * np.sin(vh)[:, None, None], spec=spec)


def test_energy_trivial():
    from kolmo_lab.grid import GridField

    ax = [np.linspace(-1, 1, 11), np.linspace(-1, 1, 11), np.linspace(0, 1, 5)]
    u = GridField(ax, np.zeros((11, 11, 5)))
    assert energy_functional(u, J=np.zeros((10, 11, 4))) == 0


# ---------------------------------------------------------------- stability

def test_stability_linearity_and_zero():
    spec = OperatorSpec()

    def make(alpha):
        return ObstacleProblem(spec, lambda V, X, t: -1e6 + 0 * V,
                               lambda V, X, t: alpha * g_data(V, X, t), V_AX, X_AX, n_snap=9)

    r1 = stability_bound_check(make(1.0))
    r3 = stability_bound_check(make(3.0))
    assert abs(r3["lhs"] / r1["lhs"] - 3) < 1e-10
    assert abs(r3["fitted_constant"] - r1["fitted_constant"]) < 1e-10
    z = stability_bound_check(make(0.0))
    assert z["lhs"] == 0 and z["fitted_constant"] == 0


def test_stability_refinement():
    spec = OperatorSpec()
    C = []
    for n in (31, 61):
        ax = np.linspace(-2, 2, n)
        ob = ObstacleProblem(spec, lambda V, X, t: -1e6 + 0 * V, g_data, ax, ax, n_snap=9)
        C.append(stability_bound_check(ob)["fitted_constant"])
    assert abs(C[0] / C[1] - 1) < 0.1
