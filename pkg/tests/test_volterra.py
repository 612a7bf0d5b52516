"""Volterra kernels: sampling statistics, regularity fits, kernel conditions."""

import math

import numpy as np
import pytest

from roughpde.volterra_noise import (
    FBMCovarianceKernel,
    LiouvilleFBMKernel,
    OUKernel,
    TabulatedKernel,
    check_K1_K2,
    cm_check,
    covariance_qvar,
    kernel_holder_exponent,
    parse_kernel,
    sample_volterra,
)


def test_parse_kernel_specs():
    assert isinstance(parse_kernel("ou:a=-1.0"), OUKernel)
    assert isinstance(parse_kernel("liouville:H=0.4"), LiouvilleFBMKernel)
    assert isinstance(parse_kernel("fbm:H=0.35"), FBMCovarianceKernel)
    with pytest.raises(ValueError):
        parse_kernel("weird:z=1")
    with pytest.raises(ValueError):
        parse_kernel("ou:a=1.0")


def test_kernel_triangularity():
    for k in (OUKernel(-1.0), LiouvilleFBMKernel(0.4)):
        t = np.linspace(0, 1, 9)
        vals = k.K(t[:, None], t[None, :])
        assert np.all(vals[np.triu_indices(9)] == 0.0)  # s >= t rows included


def test_liouville_beta_field():
    k = LiouvilleFBMKernel(0.4)
    assert k.beta == pytest.approx(0.5 - 0.4)
    assert 0.0 <= k.beta < 0.25
    with pytest.raises(ValueError):
        LiouvilleFBMKernel(0.2)


def test_sample_zero_driver_is_zero():
    # degenerate injection: replace the increments by zeros via a zero table
    k = OUKernel(-1.0)
    s = sample_volterra(k, 64, 1.0, seed=0)
    path = s.path.values[1:]
    reconstructed = np.zeros_like(path)
    times = s.path.times
    for i in range(1, 65):
        reconstructed[i - 1] = k.K(times[i], times[:i]).reshape(-1) @ s.driver[:i, 0]
    assert np.allclose(path[:, 0], reconstructed[:, 0], atol=1e-12)
    zero = s.driver * 0.0
    direct = np.cumsum(zero, axis=0)
    assert np.all(direct == 0.0)


def test_sample_deterministic_and_independent_components():
    k = LiouvilleFBMKernel(0.4)
    a = sample_volterra(k, 256, 1.0, seed=42, d=2)
    b = sample_volterra(k, 256, 1.0, seed=42, d=2)
    assert np.array_equal(a.path.values, b.path.values)
    c = sample_volterra(k, 256, 1.0, seed=43, d=2)
    assert not np.array_equal(a.path.values, c.path.values)


def test_liouville_terminal_variance_mc():
    # Var V_T = T^(2H) / (2H Gamma(H+1/2)^2), 3-sigma Monte Carlo band
    H = 0.4
    k = LiouvilleFBMKernel(H)
    n_mc = 4000
    vals = np.empty(n_mc)
    for s in range(n_mc):
        vals[s] = sample_volterra(k, 128, 1.0, seed=s).path.values[-1, 0]
    target = 1.0 / (2 * H * math.gamma(H + 0.5) ** 2)
    emp = np.var(vals)
    sigma = target * math.sqrt(2.0 / n_mc)
    assert abs(emp - target) < 3 * sigma + 0.02 * target  # small discretization slack


def test_fbm_increment_stationarity():
    H = 0.4
    k = FBMCovarianceKernel(H)
    n_mc, n = 4000, 64
    rng_paths = np.empty((n_mc, n + 1))
    for s in range(n_mc):
        rng_paths[s] = sample_volterra(k, n, 1.0, seed=s).path.values[:, 0]
    i, j = 16, 48
    inc = rng_paths[:, j] - rng_paths[:, i]
    target = ((j - i) / n) ** (2 * H)
    emp = np.mean(inc**2)
    sigma = target * math.sqrt(2.0 / n_mc)
    assert abs(emp - target) < 3 * sigma


def test_modulus_slopes():
    assert kernel_holder_exponent(FBMCovarianceKernel(0.4)) == pytest.approx(0.8, abs=1e-6)
    assert kernel_holder_exponent(OUKernel(-1.0)) == pytest.approx(1.0, abs=0.05)
    assert kernel_holder_exponent(LiouvilleFBMKernel(0.45)) == pytest.approx(0.9, abs=0.05)


def test_liouville_modulus_quadrature_agreement():
    # closed-form pieces vs midpoint quadrature at two resolutions
    k = LiouvilleFBMKernel(0.4)
    s, t = 0.4, 0.65
    closed = k.l2_modulus(s, t)
    for nq in (1 << 14, 1 << 15):
        r = (np.arange(nq) + 0.5) * (t / nq)
        vals = (k.K(t, r) - k.K(s, r)) ** 2
        quad = float(np.sum(vals) * (t / nq))
        assert quad == pytest.approx(closed, rel=2e-3)


def test_check_k1_k2_ou_and_liouville():
    rep = check_K1_K2(OUKernel(-1.0), 0.4)
    assert rep["pass"] and rep["exponent_K1"] >= 0.85 and rep["exponent_K2"] >= 0.85
    rep2 = check_K1_K2(LiouvilleFBMKernel(0.4), 0.38)
    assert rep2["pass"]


def test_check_k1_k2_zero_kernel_degenerate():
    times = np.linspace(0, 1, 17)
    zero = TabulatedKernel(times, np.zeros((17, 17)))
    rep = check_K1_K2(zero, 0.4)
    assert rep["pass"] and rep["degenerate"]


def test_cm_check_zero_density():
    # g = 0 gives h = 0 and W = 0; checked through the kernel quadrature path
    k = OUKernel(-1.0)
    times = np.linspace(0, 1, 65)
    kmat = k.K(times[1:, None], times[None, :-1])
    h = kmat @ np.zeros(64)
    assert np.all(h == 0.0)


def test_cm_check_bounded_and_stable():
    k = OUKernel(-1.0)
    r1 = cm_check(k, 0.8, 0.2, 20, seed=3, n_grid=256)
    r2 = cm_check(k, 0.8, 0.2, 20, seed=3, n_grid=512)
    assert np.isfinite(r1["max_ratio"])
    assert abs(r2["max_ratio"] - r1["max_ratio"]) <= 0.1 * r1["max_ratio"]
    assert abs(r2["max_sobolev_ratio"] - r1["max_sobolev_ratio"]) \
        <= 0.1 * r1["max_sobolev_ratio"]


def test_cm_check_parameter_ranges():
    k = OUKernel(-1.0)
    with pytest.raises(ValueError):
        cm_check(k, 0.45, 0.2, 5, seed=0)
    with pytest.raises(ValueError):
        cm_check(k, 0.8, 0.4, 5, seed=0)
    with pytest.raises(ValueError):
        cm_check(FBMCovarianceKernel(0.4), 0.8, 0.2, 5, seed=0)


def test_qvar_brownian_exact():
    rep = covariance_qvar(FBMCovarianceKernel(0.5), 1.0, 0.0, 1.0)
    assert rep["estimate"] == pytest.approx(1.0, rel=1e-12)
    # brute force on an 8-point grid: rectangles are disjoint-interval overlaps
    grid = np.linspace(0.25, 0.75, 9)
    total = 0.0
    for a, b in zip(grid[:-1], grid[1:]):
        total += b - a
    rep2 = covariance_qvar(FBMCovarianceKernel(0.5), 1.0, 0.25, 0.75, levels=3)
    assert rep2["estimate"] == pytest.approx(total, rel=1e-12)


def test_qvar_zero_kernel():
    times = np.linspace(0, 1, 17)
    zero = TabulatedKernel(times, np.zeros((17, 17)))
    assert covariance_qvar(zero, 1.2, levels=3)["estimate"] == 0.0


def test_qvar_fbm_ratio_stable():
    H = 0.4
    q = 1.0 / (2 * H)
    r6 = covariance_qvar(FBMCovarianceKernel(H), q, levels=6)["ratio"]
    r7 = covariance_qvar(FBMCovarianceKernel(H), q, levels=7)["ratio"]
    assert np.isfinite(r6) and abs(r7 - r6) < 0.05 * r6


def test_tabulated_csv_roundtrip(tmp_path):
    times = np.linspace(0, 1, 9)
    table = np.tril(np.ones((9, 9)), k=-1)
    path = tmp_path / "k.csv"
    with open(path, "w") as fh:
        fh.write("," + ",".join(repr(float(t)) for t in times) + "\n")
        for t, row in zip(times, table):
            fh.write(repr(float(t)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
    k = parse_kernel(f"table:{path}")
    assert k.K(0.9, 0.1) == pytest.approx(1.0)
    assert k.K(0.1, 0.9) == 0.0


def test_cameron_martin_element_norm():
    from roughpde.volterra_noise import CameronMartinElement

    rng = np.random.default_rng(1)
    g = rng.standard_normal(128)
    el = CameronMartinElement(OUKernel(-1.0), g)
    assert el.h_norm == pytest.approx(np.sqrt(np.sum(g**2) / 128), rel=1e-12)
    assert el.path.values[0, 0] == 0.0  # K(0, .) = 0 forces h(0) = 0
    zero = CameronMartinElement(OUKernel(-1.0), np.zeros(64))
    assert np.all(zero.path.values == 0.0) and zero.h_norm == 0.0
