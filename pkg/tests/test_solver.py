"""Solver: oracle equivalence, drift quadrature, rough convolution, convergence."""

import numpy as np
import pytest

from roughpde.evolution_family import SpectralGenerator, TimeCoefficient
from roughpde.rough_core import (
    AlphaNorm,
    ControlledPath,
    GridPath,
    lift_geometric,
    lift_ito,
)
from roughpde.solver import (
    Nonlinearity,
    RoughConvolutionError,
    SolverBlowupError,
    convergence_study,
    drift_quadrature,
    exp_weights,
    rough_convolution,
    solve_mild,
)

XI1 = TimeCoefficient("constant", 1.0)


def brownian_driver(n, seed, d=1, T=1.0, oversample=16, ito=True):
    rng = np.random.default_rng(seed)
    nf = n * oversample
    inc = rng.standard_normal((nf, d)) * np.sqrt(T / nf)
    fine = GridPath(T, np.vstack([np.zeros((1, d)), np.cumsum(inc, axis=0)]))
    lift = lift_ito if ito else lift_geometric
    return lift(fine, oversample), inc


# --- drift quadrature --------------------------------------------------------

def test_drift_zero_F():
    gen = SpectralGenerator(np.array([1.0, 2.0]), XI1)
    nl = Nonlinearity(2, 1)
    assert np.all(drift_quadrature(gen, nl, np.ones(2), 0.0, 0.1) == 0.0)


def test_drift_weights_small_mu_limit():
    gen = SpectralGenerator(np.array([1e-14, 1.0]), XI1)
    w = exp_weights(gen, 0.0, 0.25)
    assert w[0] == pytest.approx(0.25, rel=1e-10)
    assert w[1] == pytest.approx((1 - np.exp(-0.25)) / 1.0, rel=1e-12)


def test_drift_constant_F_closed_form():
    gen = SpectralGenerator(np.array([3.0]), XI1)
    nl = Nonlinearity(1, 1, drift="linear", c=1.0)
    dt = 0.2
    u = np.array([2.0])
    out = drift_quadrature(gen, nl, u, 0.0, dt)
    exact = 2.0 * (1 - np.exp(-3.0 * dt)) / 3.0
    assert out[0] == pytest.approx(exact, rel=1e-12)


def test_degenerate_zero_step():
    gen = SpectralGenerator(np.array([1.0]), XI1)
    assert np.all(exp_weights(gen, 0.5, 0.5) == 0.0)


# --- solve_mild --------------------------------------------------------------

def test_pure_evolution_exact():
    gen = SpectralGenerator(np.array([1.0, 2.0]), XI1)
    rp, _ = brownian_driver(64, seed=0, ito=True)
    nl = Nonlinearity(2, 1)  # F = 0, G = 0
    res = solve_mild(gen, nl, rp, np.array([1.0, 1.0]))
    exact = np.exp(-gen.mu)
    assert np.max(np.abs(res.terminal - exact)) < 1e-14


def test_additive_brownian_matches_recursion_and_oracle():
    n = 4096
    gen = SpectralGenerator(np.array([1.0, 2.0]), XI1)
    rp, inc = brownian_driver(n, seed=5)
    g = np.zeros((2, 1))
    g[0, 0] = 1.0
    nl = Nonlinearity(2, 1, diffusion="additive", g=g)
    res = solve_mild(gen, nl, rp, np.zeros(2))
    dt = 1.0 / n
    db = np.diff(rp.values[:, 0])
    u = 0.0
    for i in range(n):
        u = np.exp(-dt) * (u + db[i])
    assert res.terminal[0] == pytest.approx(u, abs=1e-14)
    tf = np.linspace(0, 1, len(inc) + 1)
    oracle = float(np.sum(np.exp(-(1 - tf[:-1])) * inc[:, 0]))
    assert abs(res.terminal[0] - oracle) / abs(oracle) < 1e-2


def test_linear_drift_additive_closed_form():
    n = 4096
    gen = SpectralGenerator(np.array([1.0, 2.0, 3.0]), XI1)
    rp, inc = brownian_driver(n, seed=11)
    g = np.array([[1.0], [0.5], [0.25]])
    nl = Nonlinearity(3, 1, drift="linear", c=0.5, diffusion="additive", g=g)
    u0 = np.array([1.0, -0.5, 2.0])
    res = solve_mild(gen, nl, rp, u0)
    tf = np.linspace(0, 1, len(inc) + 1)
    for k in range(3):
        lam = 0.5 - gen.mu[k]
        exact = np.exp(lam) * u0[k] + g[k, 0] * np.sum(np.exp(lam * (1 - tf[:-1])) * inc[:, 0])
        assert abs(res.terminal[k] - exact) / max(abs(exact), 1e-12) < 1e-2


def test_additive_superposition_exact():
    # solve(u0) - solve(0) equals the homogeneous discrete flow of u0
    n = 512
    gen = SpectralGenerator(np.array([1.0, 2.0]), XI1)
    rp, _ = brownian_driver(n, seed=2)
    nl = Nonlinearity(2, 1, drift="linear", c=0.5, diffusion="additive",
                      g=np.array([[0.3], [0.1]]))
    u0 = np.array([0.7, -0.4])
    diff = solve_mild(gen, nl, rp, u0).values - solve_mild(gen, nl, rp, np.zeros(2)).values
    hom = u0.copy()
    t = rp.times
    for i in range(n):
        hom = np.exp(-gen.mu / n) * hom + exp_weights(gen, t[i], t[i + 1]) * 0.5 * hom
        assert np.max(np.abs(diff[i + 1] - hom)) < 1e-10


def test_gubinelli_derivative_stored():
    rp, _ = brownian_driver(64, seed=8)
    gen = SpectralGenerator(np.array([1.0, 4.0]), XI1)
    nl = Nonlinearity(2, 1, diffusion="tanh", g=np.array([[0.5], [0.2]]), p=2)
    res = solve_mild(gen, nl, rp, np.array([0.3, -0.2]))
    for i in (0, 17, 64):
        expected = nl.G(rp.times[i], res.values[i])
        assert np.array_equal(res.path.gubinelli[i], expected)


def test_blowup_detection():
    gen = SpectralGenerator(np.array([1.0]), XI1)
    fine = GridPath(1.0, np.vstack([np.zeros((1, 1)),
                                    np.cumsum(np.full((128, 1), 1e3), axis=0)]))
    rp = lift_geometric(fine, 16)
    nl = Nonlinearity(1, 1, drift="linear", c=700.0, diffusion="additive",
                      g=np.array([[1e300]]))
    with pytest.raises(SolverBlowupError) as err:
        solve_mild(gen, nl, rp, np.array([1e300]))
    assert err.value.step >= 0


# --- rough convolution -------------------------------------------------------

def test_convolution_zero_integrand():
    rp, _ = brownian_driver(64, seed=1)
    gen = SpectralGenerator(np.array([1.0]), XI1)
    cp = ControlledPath(np.zeros((65, 1)), np.zeros((65, 1, 1)), rp.times)
    val = rough_convolution(gen, cp, rp, 0, 64, AlphaNorm(np.ones(1), 0.0), tol=1e-12)
    assert np.all(val == 0.0)


def test_convolution_smooth_driver_oracle():
    n = 1024
    tf = np.linspace(0, 1, 16 * n + 1)
    rp = lift_geometric(GridPath(1.0, np.sin(tf)[:, None]), 16)
    gen = SpectralGenerator(np.array([1.0]), XI1)
    tc = rp.times
    cp = ControlledPath(np.cos(tc)[:, None], (-np.tan(tc))[:, None, None], tc)
    val = rough_convolution(gen, cp, rp, 0, n, AlphaNorm(np.ones(1), 0.0), tol=5e-4)
    r = np.linspace(0, 1, 100001)
    oracle = np.trapezoid(np.exp(-(1 - r)) * np.cos(r) ** 2, r)
    assert abs(val[0] - oracle) / oracle < 1e-3


def test_convolution_constant_integrand_ito_oracle():
    n = 2048
    rp, inc = brownian_driver(n, seed=17)
    gen = SpectralGenerator(np.array([1.0]), XI1)
    c = 0.7
    cp = ControlledPath(np.full((n + 1, 1), c), np.zeros((n + 1, 1, 1)), rp.times)
    val = rough_convolution(gen, cp, rp, 0, n, AlphaNorm(np.ones(1), 0.0), tol=1e-3)
    tf = np.linspace(0, 1, len(inc) + 1)
    oracle = c * float(np.sum(np.exp(-(1 - tf[:-1])) * inc[:, 0]))
    assert abs(val[0] - oracle) / abs(oracle) < 1e-2


def test_convolution_nonconvergence_error():
    rp, _ = brownian_driver(8, seed=3)
    gen = SpectralGenerator(np.array([1.0]), XI1)
    cp = ControlledPath(np.sin(rp.times)[:, None], np.zeros((9, 1, 1)), rp.times)
    with pytest.raises(RoughConvolutionError) as err:
        rough_convolution(gen, cp, rp, 0, 8, AlphaNorm(np.ones(1), 0.0), tol=1e-16)
    assert err.value.last is not None and err.value.prev is not None


# --- convergence study -------------------------------------------------------

def test_convergence_exact_scheme_inf_order():
    gen = SpectralGenerator(np.array([1.0, 2.0]), XI1)
    rp, _ = brownian_driver(512, seed=4)
    nl = Nonlinearity(2, 1)  # F = G = 0: every level is exact
    rep = convergence_study(gen, nl, np.array([1.0, -1.0]), rp, [64, 128, 256, 512])
    assert rep["order"] == float("inf")
    assert all(e < 1e-13 for e in rep["errors"].values())


def test_convergence_additive_monotone():
    gen = SpectralGenerator(np.array([1.0, 2.0]), XI1)
    rp, _ = brownian_driver(4096, seed=6)
    nl = Nonlinearity(2, 1, diffusion="additive", g=np.array([[1.0], [0.5]]))
    rep = convergence_study(gen, nl, np.zeros(2), rp, [512, 1024, 2048, 4096])
    assert rep["monotone"] and rep["order"] > 0


def test_convergence_smooth_driver_first_order():
    n = 2048
    tf = np.linspace(0, 1, 16 * n + 1)
    rp = lift_geometric(GridPath(1.0, np.sin(tf)[:, None]), 16)
    gen = SpectralGenerator(np.array([1.0]), XI1)
    nl = Nonlinearity(1, 1, diffusion="additive", g=np.array([[1.0]]))
    rep = convergence_study(gen, nl, np.zeros(1), rp, [256, 512, 1024, 2048])
    assert rep["monotone"] and rep["order"] >= 1.0


def test_convergence_needs_three_levels():
    gen = SpectralGenerator(np.array([1.0]), XI1)
    rp, _ = brownian_driver(64, seed=0)
    with pytest.raises(ValueError):
        convergence_study(gen, Nonlinearity(1, 1), np.zeros(1), rp, [32, 64])


# --- nonlinearity constants --------------------------------------------------

def test_tanh_bounds_and_flags():
    g = np.array([[0.5], [0.2], [0.0]])
    nl = Nonlinearity(3, 1, diffusion="tanh", g=g, p=2)
    norm = AlphaNorm(np.array([1.0, 2.0, 3.0]), 0.0)
    nl.declare_constants(norm)
    assert nl.G_bounded and not nl.G_additive
    assert nl.C_G == pytest.approx(2.0 * norm(g[:, 0]))
    big = nl.G(0.0, np.array([50.0, 50.0, 50.0]))
    assert np.all(np.abs(big) <= np.abs(g) + 1e-12)
    add = Nonlinearity(3, 1, diffusion="additive", g=g).declare_constants(norm)
    assert add.G_additive and np.all(add.DG_apply(0.0, np.ones(3), np.ones(3)) == 0.0)


def _milstein_reference(mu, nl, inc, T, u0, c=0.0):
    # independent fine-grid integrator for the diagonal-noise Galerkin system;
    # the tanh diffusion has symmetric second-order coefficients, so the
    # symmetrized area suffices (commutative noise)
    nf = inc.shape[0]
    dt = T / nf
    u = np.asarray(u0, float).copy()
    eye = np.eye(inc.shape[1])
    for i in range(nf):
        t = i * dt
        db = inc[i]
        so = nl.second_order(t, u)
        sym = 0.5 * (np.outer(db, db) - dt * eye)
        u = (u + (-mu * u + c * u) * dt + nl.G(t, u) @ db
             + np.einsum("mkl,kl->m", so, sym))
    return u


@pytest.mark.parametrize("d", [1, 2])
def test_multiplicative_solver_vs_milstein(d):
    rng = np.random.default_rng(7 + d)
    n, oversample = 512, 16
    nf = n * oversample
    inc = rng.standard_normal((nf, d)) * np.sqrt(1.0 / nf)
    fine = GridPath(1.0, np.vstack([np.zeros((1, d)), np.cumsum(inc, axis=0)]))
    rp = lift_ito(fine, oversample)
    mu = np.array([1.0, 4.0, 9.0])
    gen = SpectralGenerator(mu, XI1)
    g = np.full((3, d), 0.4)
    g[2] = 0.0
    nl = Nonlinearity(3, d, diffusion="tanh", g=g, p=2)
    u0 = np.array([0.5, -0.3, 0.2])
    ours = solve_mild(gen, nl, rp, u0).terminal
    ref = _milstein_reference(mu, nl, inc, 1.0, u0)
    assert np.linalg.norm(ours - ref) / np.linalg.norm(ref) < 1e-2


def test_convolution_controlled_norm_estimate():
    # the convolution (z, y) as a controlled pair at index alpha+sigma is
    # dominated by rho (|y_0|_a + |y'_0|_{a-g} + T^(g-s) ||y, y'||_a);
    # the implicit constant stays below 1 on this seeded family
    from roughpde.rough_core import crp_norm, rho_gamma

    gamma, sigma, alpha = 0.4, 0.05, 0.3
    mu = np.array([1.0, 4.0])
    gen = SpectralGenerator(mu, XI1)
    norm_a = AlphaNorm(mu, alpha)
    norm_as = AlphaNorm(mu, alpha + sigma)
    for seed in range(12):
        rng = np.random.default_rng(seed)
        n, oversample = 64, 16
        nf = n * oversample
        inc = rng.standard_normal((nf, 1)) * np.sqrt(1.0 / nf)
        rp = lift_ito(GridPath(1.0, np.vstack([np.zeros((1, 1)),
                                               np.cumsum(inc, axis=0)])), oversample)
        yp = 0.5 * np.cumsum(rng.standard_normal((n + 1, 2, 1)), axis=0) / np.sqrt(n)
        dx = np.diff(rp.values, axis=0)
        y = np.zeros((n + 1, 2))
        for i in range(n):
            y[i + 1] = y[i] + yp[i] @ dx[i] + rng.standard_normal(2) / n
        z = np.zeros((n + 1, 2))
        for i in range(n):
            ud = gen.u_diag(rp.times[i], rp.times[i + 1])
            z[i + 1] = ud * (z[i] + y[i] * dx[i, 0] + yp[i][:, 0] * rp.second_level[i, 0, 0])
        lhs = crp_norm(ControlledPath(z, y[:, :, None], rp.times), rp, norm_as,
                       gamma=gamma).total
        ny = crp_norm(ControlledPath(y, yp, rp.times), rp, norm_a, gamma=gamma).total
        rho = rho_gamma(rp, gamma=gamma)
        rhs = rho * (float(norm_a(y[0])) + float(norm_a.shifted(-gamma)(yp[0][:, 0])) + ny)
        assert lhs < rhs, (seed, lhs / rhs)
