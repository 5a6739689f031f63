import numpy as np
import pytest

from kolmo_lab import fundamental_solution as fs
from kolmo_lab import group_geometry as gg
from kolmo_lab.errors import DomainError, ExponentError, NumericalError, PreconditionError

K = gg.LieStructure.kinetic()
G = fs.GammaEvaluator(K, [[1.0]])


def gamma_closed_form(v, x, t):
    # independent oracle: 2x2 Gaussian with C(t) = [[t, -t^2/2], [-t^2/2, t^3/3]]
    C = np.array([[t, -t * t / 2], [-t * t / 2, t ** 3 / 3]])
    y = np.array([v, x])
    return np.exp(-0.25 * y @ np.linalg.solve(C, y)) / (4 * np.pi * np.sqrt(np.linalg.det(C)))


def test_value_at_unit_time():
    assert abs(G([0, 0, 1]) - np.sqrt(3) / (2 * np.pi)) < 1e-15


def test_matches_closed_form():
    rng = np.random.default_rng(0)
    for v, x, t in rng.uniform([-1, -1, 0.5], [1, 1, 3], size=(50, 3)):
        assert abs(G([v, x, t]) / gamma_closed_form(v, x, t) - 1) < 1e-12


def test_zero_in_the_past():
    assert G([0.3, 0.1, -1.0]) == 0
    with pytest.raises(NumericalError):
        G([0, 0, 1e-14])


def test_mass_is_one():
    for t in (0.5, 1.0):
        assert abs(fs.gamma_mass(G, t) - 1) < 1e-6


def test_homogeneity():
    rng = np.random.default_rng(1)
    z = np.column_stack([rng.normal(size=(200, 2)), rng.uniform(0.2, 2, 200)])
    r = np.exp(rng.uniform(-1, 1, 200))
    assert np.max(fs.gamma_homogeneity_residual(G, z, r)) < 1e-10


def test_translation_invariance():
    rng = np.random.default_rng(2)
    z, zeta, g = rng.normal(size=(3, 20, 3))
    z[:, -1] = zeta[:, -1] + rng.uniform(0.2, 2, 20)
    a = G(z, zeta)
    b = G(gg.compose(K, g, z), gg.compose(K, g, zeta))
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_pde_residual_second_order():
    z = np.array([0.3, -0.2, 0.8])
    res = [fs.gamma_pde_residual(G, z, h) for h in (0.04, 0.02, 0.01)]
    ratios = [res[0] / res[1], res[1] / res[2]]
    assert all(abs(q - 4) < 0.5 for q in ratios)
    with pytest.raises(DomainError):
        fs.gamma_pde_residual(G, [0, 0, 0.05], 0.1)


def test_chapman_kolmogorov():
    z = np.array([0.2, 0.1, 1.0])
    zeta = np.array([-0.1, 0.3, 0.0])
    assert abs(fs.chapman_kolmogorov(G, z, zeta, 0.4) / G(z, zeta) - 1) < 1e-3
    with pytest.raises(DomainError):
        fs.chapman_kolmogorov(G, z, zeta, 1.5)


def test_gradient_matches_finite_difference():
    z = np.array([0.4, 0.1, 1.0])
    zeta = np.array([0.1, -0.2, 0.2])
    h = 1e-5
    e = np.array([h, 0, 0])
    fd = (G(z, zeta + e) - G(z, zeta - e)) / (2 * h)
    assert abs(G.grad_zeta(z, zeta)[0] - fd) < 1e-7


def test_sobolev_exponents():
    assert fs.sobolev_exponents(4, 2) == pytest.approx((3.0, 6.0))
    with pytest.raises(ExponentError):
        fs.sobolev_exponents(4, 3)
    with pytest.raises(ExponentError):
        fs.sobolev_exponents(4, 1)


def test_degenerate_structure_refused():
    deg = gg.LieStructure(gg.BlockStructure((1, 1), (np.zeros((1, 1)),), validate=False))
    with pytest.raises(PreconditionError):
        fs.GammaEvaluator(deg, [[1.0]])


def test_potential_of_zero_field():
    from kolmo_lab.grid import GridField

    ax = [np.linspace(-1, 1, 5)] * 2 + [np.linspace(-1, 0, 5)]
    f = GridField(ax, np.zeros((5, 5, 5)))
    assert fs.gamma_potential(G, f, [0, 0, 0.5]) == 0
    np.testing.assert_array_equal(fs.gamma_gradient_potential(G, f, [0, 0, 0.5]), [0])


def test_potential_of_constant_in_slab():
    # f = 1 on R^2 x (0, 1/2): each time slice carries unit Gamma mass, so the
    # potential at (0, 0, 1/2) is 1/2. The isotropic dyadic refinement
    # under-resolves the thin x-profile next to the pole, hence the 2e-3.
    f = fs.BoxFunction(lambda p: np.ones(len(p)), [-6, -4, 0], [6, 4, 0.5], [16, 64, 8])
    val = fs.gamma_potential(G, f, [0.0, 0.0, 0.5], order=4, levels=6)
    assert abs(val - 0.5) < 2e-3 * 0.5
