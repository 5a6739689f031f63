import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from kolmo_lab import nonlocal_kinetic as nl
from kolmo_lab.errors import (DomainError, GeometryError, KernelError, NumericalError,
                              PreconditionError)
from kolmo_lab.grid import GridField


def fp_(**kw):
    kw.setdefault("s", 0.5)
    kw.setdefault("p", 2.0)
    return nl.FractionalParams(**kw)


# ---------------------------------------------------------------- geometry

def test_dilation_example():
    np.testing.assert_allclose(nl.frac_dilate(fp_(), 3.0, [1, 1, 1]), [3, 9, 3])
    with pytest.raises(DomainError):
        nl.frac_dilate(fp_(), 0.0, [1, 1, 1])


def test_dilation_kinetic_limit():
    z = np.array([0.7, -1.2, 0.4])
    r = 2.0
    kin = z * np.array([r, r ** 3, r ** 2])
    eps = np.array([1e-2, 1e-3, 1e-4])
    err = [np.max(np.abs(nl.frac_dilate(fp_(s=1 - e), r, z) - kin)) for e in eps]
    slope = np.polyfit(np.log(eps), np.log(err), 1)[0]
    assert abs(slope - 1) < 0.01


def test_group_law():
    fp = fp_(s=0.3, p=3.0)
    rng = np.random.default_rng(0)
    a, b, c = rng.normal(size=(3, 50, 3))
    lhs = nl.frac_compose(fp, nl.frac_compose(fp, a, b), c)
    rhs = nl.frac_compose(fp, a, nl.frac_compose(fp, b, c))
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    assert np.max(np.abs(nl.frac_compose(fp, a, nl.frac_inverse(fp, a)))) < 1e-12


def test_theta_consistent_across_radii():
    fp = fp_()
    th = []
    for r in (0.5, 1.0, 2.0):
        cyl = nl.frac_cylinder(fp, np.array([0.5 * r, 0.0, 0.0]), r)
        rep = nl.estimate_theta(cyl, n=100000, rng=np.random.default_rng(1))
        assert np.isfinite(rep["theta"])
        # both inclusions hold on a fresh sample at the estimated theta
        rng = np.random.default_rng(2)
        # theta is bisected on one sample, so allow stray boundary points in another
        inner = cyl.sample_group(100000, rng, r / rep["theta"])
        assert np.mean(cyl.contains_ball(inner)) > 0.9999
        ball = cyl.sample_ball(100000, rng)
        assert np.mean(cyl.contains_group(ball, r * rep["theta"])) > 0.9999
        th.append(rep["theta"])
    assert max(th) / min(th) < 1.1


def test_cylinder_volume():
    fp = fp_(s=0.3, p=3.0)
    r = 0.7
    cyl = nl.frac_cylinder(fp, np.zeros(3), r)
    assert abs(cyl.volume() - 2 * r * 2 * r ** (1 + fp.sp) * r ** fp.sp) < 1e-12


# ---------------------------------------------------------------- tails

def indicator(v, x, t):
    return (np.abs(v) < 2).astype(float) + 0 * x


def test_tail_indicator_is_one():
    fp = fp_()
    rep = nl.tail(fp, indicator, np.zeros(3), 1.0, decay=nl.Decay(support=2.0))
    assert abs(rep["value"] - 1) < 1e-6
    assert rep["remainder"] == 0


def test_tail_zero_and_refusal():
    fp = fp_()
    zero = nl.tail(fp, lambda v, x, t: 0 * v, np.zeros(3), 1.0, decay=nl.Decay(support=1.0))
    assert zero["value"] == 0
    with pytest.raises(DomainError):
        nl.tail(fp, indicator, np.zeros(3), 1.0)


def test_tail_with_declared_decay():
    # 2 int_1^inf (1 + v^2)^-1 v^-2 dv = 2 (1 - pi/4)
    fp = fp_()
    exact = 2 * (1 - np.pi / 4)
    rep = nl.tail(fp, lambda v, x, t: 1 / (1 + v * v) + 0 * x, np.zeros(3), 1.0,
                  decay=nl.Decay(beta=2.0, A=1.0))
    assert rep["remainder"] > 0
    assert exact - 1e-9 <= rep["value"] <= exact + rep["remainder"] + 1e-9


def test_tail_homogeneous():
    fp = fp_(s=0.3, p=3.0)
    f = lambda v, x, t: np.exp(-(v - 0.3) ** 2 - x ** 2) * (1 + t)  # noqa: E731
    a = nl.tail(fp, f, np.array([0.0, 0.1, 0.5]), 0.5, decay=nl.Decay(support=12.0))["value"]
    b = nl.tail(fp, lambda v, x, t: 2.5 * f(v, x, t), np.array([0.0, 0.1, 0.5]), 0.5,
                decay=nl.Decay(support=12.0))["value"]
    assert abs(b / a - 2.5) < 1e-9


def test_tail_sup_dominates():
    rng = np.random.default_rng(4)
    for _ in range(100):
        fp = fp_(s=rng.uniform(0.2, 0.8), p=rng.choice([1.5, 2.0, 3.0]))
        c = rng.uniform(-1, 1, 3)
        amp = rng.uniform(0.1, 3)
        f = lambda v, x, t: amp * np.exp(-(v - c[0]) ** 2 - (x - c[1]) ** 2 - (t - c[2]) ** 2)  # noqa: E731
        z0 = np.array([0.0, 0.0, 0.5])
        d = nl.Decay(support=8.0)
        assert nl.tail_sup(fp, f, z0, 1.0, d)["value"] >= nl.tail(fp, f, z0, 1.0, d)["value"] * (1 - 1e-12)


def test_tail_gridfield_outside_xt_range():
    v = np.linspace(-3, 3, 13)
    u = GridField((v, np.linspace(-0.1, 0.1, 3), np.linspace(0, 1, 3)), np.ones((13, 3, 3)))
    with pytest.raises(GeometryError):
        nl.tail(fp_(), u, np.array([0.0, 0.0, 1.0]), 1.0)


# ---------------------------------------------------------------- operator

def test_constant_gives_zero_without_far_field():
    fp = fp_(s=0.3, p=3.0)
    v = np.linspace(-2, 2, 41)
    assert np.max(np.abs(nl.frac_p_laplacian(fp, np.full(41, 2.0), v, far=False))) == 0


def test_odd_and_antisymmetric():
    fp = fp_(s=0.7, p=3.0)
    v = np.linspace(-3, 3, 61)
    u = np.exp(-v ** 2) + 0.3 * np.sin(v)
    a = nl.frac_p_laplacian(fp, u, v)
    b = nl.frac_p_laplacian(fp, -u, v)
    np.testing.assert_array_equal(a, -b)
    odd = np.sin(v) * np.exp(-v ** 2)
    L = nl.frac_p_laplacian(fp, odd, v)
    assert np.max(np.abs(L + L[::-1])) < 1e-12 * np.max(np.abs(L))


def test_gaussian_against_reference():
    # the excluded diagonal cell costs O(h^(2-2s)), i.e. O(h) at s = 1/2
    fp = fp_()
    g = lambda y: np.exp(-y ** 2)  # noqa: E731
    hs = np.array([2e-3, 1e-3, 5e-4])
    err = []
    for h in hs:
        v = np.arange(-6, 6 + h / 2, h)
        c = int(np.argmin(np.abs(v)))
        nodes = [c - 2, c, c + 2]
        L = nl.frac_p_laplacian(fp, g(v), v, nodes=nodes)
        ref = np.array([nl.reference_fractional_laplacian(fp, g, v[i]) for i in nodes])
        err.append(np.max(np.abs(L - ref)))
    slope = np.polyfit(np.log(hs), np.log(err), 1)[0]
    assert abs(slope - (2 - 2 * fp.s)) < 0.05
    assert err[-1] < 1e-3


def test_kernel_bounds():
    fp = fp_(lam=1.0, Lam=2.0)
    v = np.linspace(-1, 1, 21)
    nl.check_kernel(fp, nl.power_kernel(fp, 1.5), v)
    with pytest.raises(KernelError):
        nl.frac_p_laplacian(fp, np.zeros(21), v, K=nl.power_kernel(fp, 3.0))
    with pytest.raises(KernelError):
        nl.FractionalParams(s=0.5, p=2, lam=1.0, Lam=2.0, kernel_coef=0.5)


def test_general_kernel_matches_power_path():
    fp = fp_(s=0.4, p=2.5, lam=0.5, Lam=2.0)
    v = np.linspace(-2, 2, 41)
    u = np.cos(v) ** 2
    K = nl.power_kernel(fp, 1.0)

    def plain(a, b):
        return K(a, b)

    np.testing.assert_allclose(nl.frac_p_laplacian(fp, u, v, K=plain),
                               nl.frac_p_laplacian(fp, u, v, K=K), rtol=1e-8, atol=1e-10)


# ---------------------------------------------------------------- evolution

V_AX = np.linspace(-4, 4, 33)
X_AX = np.linspace(-4, 4, 21)


def test_zero_data_stays_zero():
    u = nl.evolve_nonlocal(fp_(), V_AX, X_AX, lambda V, X: 0 * V, 0.5, n_snap=3)
    assert not np.any(u.values)


def test_mass_nonincreasing():
    for p in (2.0, 3.0):
        u = nl.evolve_nonlocal(fp_(p=p), V_AX, X_AX, lambda V, X: np.exp(-V ** 2 - X ** 2), 1.0,
                               n_snap=11)
        m = np.array(u.cfl["mass"])
        assert np.all(np.diff(m) <= 1e-14 * m[0])
        assert u.cfl["dt"] <= u.cfl["limit"]


def test_instability_detector():
    # alternating-in-v data loads the top mode, which a 30x step amplifies ~20x
    def u0(V, X):
        return (-1.0) ** np.arange(len(V))[:, None] * np.exp(-X ** 2)

    ok = nl.evolve_nonlocal(fp_(), V_AX, X_AX, u0, 0.2, n_snap=3)
    dt = 30 * ok.cfl["limit"]
    with pytest.raises(NumericalError) as ei:
        nl.evolve_nonlocal(fp_(), V_AX, X_AX, u0, dt, dt=dt, n_snap=2)
    assert ei.value.step == 1


@pytest.mark.xfail(strict=True, reason="plain diagonal-cell exclusion drops a fraction "
                   "(h/2)^(2-2s) of the local diffusion, which tends to 1 as s -> 1")
def test_local_limit_against_kfp_solver():
    from kolmo_lab.kfp_solver import OperatorSpec, solve

    v = np.linspace(-6, 6, 97)
    x = np.linspace(-6, 6, 49)

    def u0(V, X):
        return np.exp(-V ** 2 - X ** 2)

    ref = solve(OperatorSpec(), v, x, 0, 1, u0, n_snap=2, orientation=-1.0).values[..., -1]
    s = 0.99
    C = s * 4 ** s * gamma_fn(0.5 + s) / (np.sqrt(np.pi) * gamma_fn(1 - s))
    u = nl.evolve_nonlocal(fp_(s=s, lam=C, Lam=C), v, x, u0, 1.0, n_snap=2).values[..., -1]
    assert np.max(np.abs(u - ref)) / ref.max() < 0.1


# ---------------------------------------------------------------- boundedness

@pytest.fixture(scope="module")
def evolved():
    fp = fp_()
    v = np.linspace(-4, 4, 65)
    x = np.linspace(-4, 4, 41)
    return fp, nl.evolve_nonlocal(fp, v, x, lambda V, X: 2 * np.exp(-(V ** 2 + X ** 2)), 1.0)


def test_boundedness_constant_field():
    fp = fp_()
    ax = (np.linspace(-4, 4, 17), np.linspace(-2, 2, 9), np.linspace(0, 1, 5))
    u = GridField(ax, np.ones((17, 9, 5)), ("v", "x", "t"))
    rep = nl.boundedness_check(fp, u, (0.0, 0.0, 1.0), 1.0)
    assert abs(rep["lhs"] - 1) < 1e-14 and abs(rep["average"] - 1) < 1e-12
    assert rep["fitted_constant"] <= 1


def test_boundedness_delta_curve(evolved):
    fp, u = evolved
    rep = nl.boundedness_check(fp, u, (0.0, 0.0, 1.0), 1.0)
    rhs = np.array(rep["delta_curve"]["rhs"])
    k = int(np.argmin(rhs))
    assert 0 < k < len(rhs) - 1
    assert np.all(np.diff(rhs[:k + 1]) < 0)
    assert rep["lhs"] <= rhs.min() * (1 + 1e-12)
    for key in ("check", "params", "lhs", "rhs", "fitted_constant", "resolution", "pass"):
        assert key in rep


def test_boundedness_scaling_in_r(evolved):
    fp, u = evolved
    c = [nl.boundedness_check(fp, u, (0.0, 0.0, 1.0), r)["fitted_constant"] for r in (0.25, 0.5)]
    assert max(c) / min(c) < 2


def test_boundedness_preconditions(evolved):
    fp, u = evolved
    with pytest.raises(GeometryError):
        nl.boundedness_check(fp, u, (3.5, 0.0, 1.0), 1.0)
    low = nl.FractionalParams(s=0.5, p=1.5)
    with pytest.raises(PreconditionError):
        nl.boundedness_check(low, u, (0.0, 0.0, 1.0), 1.0)


def test_bdd_exponent():
    assert nl.bdd_exponent(fp_(s=0.5, p=2)) == pytest.approx(1 / 2)
    assert nl.bdd_exponent(fp_(s=0.5, p=1.5)) == pytest.approx(0.5 / 0.75)


# ---------------------------------------------------------------- collisions

def test_post_collision():
    rng = np.random.default_rng(5)
    v, vs = rng.normal(size=(2, 10000, 3))
    sig = rng.normal(size=(10000, 3))
    sig /= np.linalg.norm(sig, axis=1, keepdims=True)
    a, b = nl.post_collision(v, vs, sig)
    assert np.max(np.abs(a + b - v - vs)) < 1e-14 * 10
    e0 = np.sum(v * v, 1) + np.sum(vs * vs, 1)
    assert np.max(np.abs(np.sum(a * a, 1) + np.sum(b * b, 1) - e0) / e0) < 1e-14
    d = v - vs
    aligned = d / np.linalg.norm(d, axis=1, keepdims=True)
    a, b = nl.post_collision(v, vs, aligned)
    np.testing.assert_allclose(a, v, atol=1e-14)
    np.testing.assert_allclose(b, vs, atol=1e-14)
    np.testing.assert_allclose(nl.cos_theta(v, vs, aligned), 1.0)


def test_collision_kernel():
    ck = nl.CollisionKernelSpec(alpha=0.5, s=0.3, n=3)
    th = np.logspace(-6, -3, 7)
    b = nl.collision_kernel_eval(ck, 1.0, th)
    slope = np.polyfit(np.log(th), np.log(b), 1)[0]
    assert abs(slope + (ck.n - 1) + 2 * ck.s) < 1e-6
    assert nl.collision_kernel_eval(ck, 4.0, np.pi) == pytest.approx(2.0)
    with pytest.raises(KernelError):
        nl.collision_kernel_eval(ck, 1.0, 0.0)
