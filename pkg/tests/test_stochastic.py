import numpy as np
import pytest

from kolmo_lab import fundamental_solution as fs
from kolmo_lab import group_geometry as gg
from kolmo_lab import stochastic as st
from kolmo_lab.errors import DomainError


def em_moments(dt, n):
    """Exact second moments of the Euler-Maruyama chain (V_k = sqrt2 W_k, X += V dt)."""
    m = np.arange(n)
    var_v = 2 * dt * n
    var_x = 2 * dt ** 3 * np.sum(m ** 2)
    cov = 2 * dt ** 2 * n * (n - 1) / 2
    return np.array([var_v, var_x, cov])


def test_em_oracle_limit():
    np.testing.assert_allclose(em_moments(1e-5, 100000), [2, 2 / 3, 1], rtol=1e-4)
    C = gg.covariance(gg.LieStructure.kinetic(orientation=-1.0), [[1.0]], 1.0)
    np.testing.assert_allclose(2 * C[[0, 1, 0], [0, 1, 1]], [2, 2 / 3, 1], atol=1e-15)


@pytest.fixture(scope="module")
def ens():
    return st.simulate_langevin(1, 0.0, 0.0, 1.0, 1e-2, 40000, seed=7)


def test_frictionless_moments(ens):
    S = ens.states[:, -1, :]
    n = len(S)
    v, x = S[:, 0], S[:, 1]
    est = np.array([v.var(), x.var(), np.mean(v * x) - v.mean() * x.mean()])
    # standard errors of the sample (co)variances of a centred Gaussian pair
    exact = em_moments(1e-2, 100)
    se = np.sqrt(np.array([2 * exact[0] ** 2, 2 * exact[1] ** 2,
                           exact[0] * exact[1] + exact[2] ** 2]) / n)
    assert np.all(np.abs(est - exact) < 3 * se)


def test_kde_mass_and_density(ens):
    G = fs.GammaEvaluator(gg.LieStructure.kinetic(orientation=-1.0), [[1.0]])
    rep = st.density_vs_gamma(ens, G, 1.0, n_grid=121)
    assert abs(rep["kde_mass"] - 1) < 1e-3
    assert rep["l1"] < 0.08


def test_zero_noise_hook():
    e = st.simulate_langevin(1, 0.7, -0.2, 2.0, 1e-2, 5, seed=1, noise=0.0, record_every=50)
    np.testing.assert_array_equal(e.states[:, :, 0], 0.7)
    np.testing.assert_allclose(e.states[:, :, 1], np.broadcast_to(-0.2 + 0.7 * e.times, (5, 5)), atol=1e-13)


def test_friction_mean():
    T, dt, n = 1.0, 1e-2, 40000
    e = st.simulate_langevin(1, 1.0, 0.0, T, dt, n, seed=3, friction=True)
    v = e.states[:, -1, 0]
    se = v.std(ddof=1) / np.sqrt(n)
    assert abs(v.mean() - np.exp(-T)) < 3 * se
    assert abs(v.mean() - (1 - dt) ** 100) < 3 * se


def test_thread_determinism():
    a = st.simulate_langevin(1, 0.0, 0.0, 0.5, 5e-3, 10000, seed=11, threads=1)
    b = st.simulate_langevin(1, 0.0, 0.0, 0.5, 5e-3, 10000, seed=11, threads=3)
    assert a.states.tobytes() == b.states.tobytes()
    c = st.simulate_langevin(1, 0.0, 0.0, 0.5, 5e-3, 10000, seed=12)
    assert a.states.tobytes() != c.states.tobytes()


def test_langevin_errors():
    with pytest.raises(DomainError):
        st.simulate_langevin(1, 0, 0, 1.0, 0.0, 10, seed=0)
    with pytest.raises(DomainError):
        st.simulate_langevin(1, 0, 0, 1.0, 1e-3, 0, seed=0)
    with pytest.raises(DomainError):
        st.simulate_langevin(1, 0, 0, 1.0, 0.1, 10, seed=0)


def test_binary_roundtrip(tmp_path):
    from kolmo_lab.grid import read_binary

    e = st.simulate_langevin(1, 0.0, 0.0, 1.0, 1e-2, 10, seed=0, record_every=10)
    e.to_binary(tmp_path / "p.bin")
    arr, dt, seed = read_binary(tmp_path / "p.bin")
    np.testing.assert_array_equal(arr, e.states)
    assert (dt, seed) == (1e-2, 0)


def test_relativistic_paths():
    e = st.simulate_relativistic(1, 0.5, 0.0, 0.0, 1.0, 1e-2, 2000, seed=5, record_every=1)
    P, T = e.states[..., 0], e.states[..., -1]
    assert np.all(np.abs(P) / np.sqrt(P * P + 1) < 1)
    assert np.all(np.diff(T, axis=1) > 0)
    assert T[:, -1].mean() > 1.0


def test_relativistic_zero_noise():
    e = st.simulate_relativistic(1, 2.0, 0.0, 1.0, 1.0, 1e-2, 3, seed=0, noise=0.0, record_every=25)
    np.testing.assert_array_equal(e.states[..., 0], 2.0)
    np.testing.assert_allclose(e.states[..., -1], np.broadcast_to(1.0 + e.times * np.sqrt(5.0), (3, 5)), atol=1e-13)


def test_lorentz_law():
    np.testing.assert_allclose(st.lorentz_compose([1, 0, 0], [0, 1, 0]), [1, np.sqrt(2), 1])
    rep = st.lorentz_identity_checks(n=2, seed=1)
    assert rep["left_identity"] < 1e-12
    assert rep["inverse"] < 1e-10
    assert abs(rep["exponent"] - 2) < 0.1


def test_relativistic_sigma():
    assert st.relativistic_diffusion_identity([0.0])["sigma"] == 0
    np.testing.assert_allclose(st.relativistic_sigma(np.array([1.0])), [[np.sqrt(2)]])
    rng = np.random.default_rng(0)
    for n in range(1, 6):
        r = st.relativistic_diffusion_identity(rng.normal(size=n) * 3)
        assert r["sigma"] < 1e-12 and r["D"] < 1e-12
