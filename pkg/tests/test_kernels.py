import numpy as np
import pytest

from kolmo_lab import kernels

py = kernels.get_backend("python")
try:
    cy = kernels.get_backend("cython")
except ImportError:  # extension not built
    cy = None

needs_cy = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def test_backend_selection():
    assert kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@needs_cy
def test_kinetic_step_agrees():
    rng = np.random.default_rng(0)
    nv, nx = 23, 17
    vel = np.linspace(-2, 2, nv)
    args = [rng.normal(size=(nv, nx)), rng.uniform(0.5, 2, (nv - 1, nx)), vel,
            rng.normal(size=(nv, nx)), rng.normal(size=(nv, nx)), rng.normal(size=(nv, nx))]
    out = [np.zeros((nv, nx)) for _ in range(2)]
    for mod, o in zip((py, cy), out):
        mod.kinetic_step(*args, 1e-3, 0.2, 0.25, o)
    np.testing.assert_allclose(out[0], out[1], rtol=1e-13, atol=1e-13)


@needs_cy
@pytest.mark.parametrize("p", [1.5, 2.0, 2.5, 3.0])
@pytest.mark.parametrize("uniform", [True, False])
def test_frac_plap_agrees(p, uniform):
    # the compiled kernel tabulates |i - j| on uniform grids
    rng = np.random.default_rng(1)
    v = np.linspace(-3, 3, 301)
    if not uniform:
        v = np.sort(v + rng.uniform(-4e-3, 4e-3, 301))
    w = np.gradient(v)
    u = rng.normal(size=301)
    nodes = np.arange(0, 301, 7, dtype=np.int64)
    a, b = np.empty(len(nodes)), np.empty(len(nodes))
    py.frac_plap_power(u, v, w, p, 0.8, 2.0, nodes, a)
    cy.frac_plap_power(u, v, w, p, 0.8, 2.0, nodes, b)
    np.testing.assert_allclose(a, b, rtol=1e-11)
    kmat = np.ascontiguousarray(rng.uniform(0.5, 1.5, (len(nodes), 301)))
    py.frac_plap_matrix(u, kmat, w, p, nodes, a)
    cy.frac_plap_matrix(u, kmat, w, p, nodes, b)
    np.testing.assert_allclose(a, b, rtol=1e-11)


@needs_cy
def test_pgs_agrees():
    n = 50
    h = 1.0 / (n + 1)
    lower = np.full(n, -1 / h ** 2)
    upper = lower.copy()
    diag = np.full(n, 2 / h ** 2)
    rhs = np.full(n, -3.0)
    psi = 0.1 - np.linspace(-1, 1, n) ** 2
    res = []
    for mod in (py, cy):
        x = np.maximum(psi, 0.0)
        it, change = mod.pgs_tridiag(lower, diag, upper, rhs, psi, x, 1.5, 1e-12, 100000)
        res.append((it, x))
    assert res[0][0] == res[1][0]
    np.testing.assert_allclose(res[0][1], res[1][1], rtol=1e-12, atol=1e-14)
    assert np.all(res[0][1] >= psi)
