"""Bound constants, admissibility identities, monotonicity, certification."""

import math

import numpy as np
import pytest

from roughpde.gronwall import (
    calibrate,
    calibration_ratio,
    certify,
    compute_constants,
    difference_bound,
    difference_constants,
    gronwall_bound,
    linearized_bound,
    linearized_constants,
    log_gronwall_bound,
    log_linearized_bound,
)
from roughpde.presets import build, build_operators, get_preset
from roughpde.solver import solve_mild


def consts(rho=1.0, C_F=1.0, C_G=1.0, C=2.0, gamma=0.4, sigma=0.05, delta=0.1):
    return compute_constants(None, None, C_F, C_G, gamma, sigma, delta, C, rho=rho)


def test_nu_formula():
    c = consts(gamma=0.4, sigma=0.05, delta=0.1)
    assert c.nu == pytest.approx(min(0.2, 0.9, 0.35), abs=1e-15)
    assert c.nu == pytest.approx(0.2, abs=1e-15)


def test_phi_values_degenerate():
    # rho = 1, C_F = C_G = 1: Phi_1 = 3, Phi_2 = max(1, 1) = 1, Phi_3 = 2
    c = consts()
    assert (c.phi1, c.phi2, c.phi3) == (3.0, 1.0, 2.0)


def test_canonical_kappa_identity():
    for rho in (1.0, 2.5, 7.0):
        for C in (1.5, 2.0, 10.0):
            c = consts(rho=rho, C=C)
            assert abs(c.admissibility_gap - 0.5) <= 1e-14


def test_c2_canonical_form():
    c = consts()
    assert c.C2 == pytest.approx(math.log(4.0 * c.C * c.phi2) / c.kappa, rel=1e-14)


def test_parameter_validation():
    with pytest.raises(ValueError):
        consts(gamma=0.3)
    with pytest.raises(ValueError):
        consts(C=1.0)
    with pytest.raises(ValueError):
        compute_constants(None, None, 1.0, 1.0, 0.4, 0.45, 0.1, 2.0, rho=1.0)
    with pytest.raises(ValueError):
        # explicit kappa violating the admissibility constraint
        compute_constants(None, None, 1.0, 1.0, 0.4, 0.05, 0.1, 2.0, rho=1.0,
                          kappa=10.0)


def test_bound_monotone_in_dt_and_state():
    c = consts(rho=1.2, C_F=0.1, C_G=0.05, C=1.5)
    b = [gronwall_bound(c, u, 0.0, dt) for u, dt in ((0.0, 0.1), (0.0, 0.5), (1.0, 0.5))]
    assert b[0] <= b[1] <= b[2]
    # nonzero floor from the 1+ term
    assert gronwall_bound(c, 0.0, 0.0, 0.2) > 0.0


def test_bound_monotone_in_rho():
    vals = []
    for rho in np.linspace(1.0, 6.0, 11):
        c = consts(rho=rho, C_F=0.2, C_G=0.1, C=1.5)
        vals.append(log_gronwall_bound(c, 0.5, 0.2, 0.7))
    assert np.all(np.diff(vals) >= -1e-12)


def test_linearized_homogeneity_and_monotonicity():
    lc = linearized_constants(2.0, 1.0, 0.5, 0.3, 0.4, 0.05, 0.1, 1.5)
    assert linearized_bound(lc, 0.0, 0.0, 0.3) == 0.0
    one = linearized_bound(lc, 1.0, 0.5, 0.3)
    two = linearized_bound(lc, 2.0, 1.0, 0.3)
    assert two == pytest.approx(2.0 * one, rel=1e-12)
    # nondecreasing in rho and in the base norm (through Phi~_3)
    lb = [log_linearized_bound(
        linearized_constants(r, 1.0, 0.5, 0.3, 0.4, 0.05, 0.1, 1.5), 1.0, 0.5, 0.3)
        for r in (1.0, 2.0, 4.0)]
    assert lb[0] <= lb[1] <= lb[2]
    nb = [log_linearized_bound(
        linearized_constants(2.0, b, 0.5, 0.3, 0.4, 0.05, 0.1, 1.5), 1.0, 0.5, 0.3)
        for b in (0.5, 1.0, 2.0)]
    assert nb[0] <= nb[1] <= nb[2]


def test_linearized_phi2():
    lc = linearized_constants(3.0, 0.0, 2.0, 0.0, 0.4, 0.05, 0.1, 1.5)
    assert lc.phi2 == max(1.0, 2.0 * 3.0, 4.0 * 3.0)


def norms_dict(**kw):
    base = {"u": 0.5, "u_tilde": 0.6, "v": 1.0, "v_tilde": 1.1, "du": 0.1}
    base.update(kw)
    return base


def test_difference_bound_zero_and_symmetry():
    dc = difference_constants(2.0, 0.5, norms_dict(), 0.5, 0.3, 0.4, 0.05, 0.1, 1.5)
    assert difference_bound(dc, 0.0, 0.0, 0.5) == 0.0
    one = difference_bound(dc, 0.3, 0.1, 0.5)
    # swapping (v, v~) leaves the bound's dependence on the difference unchanged
    assert difference_bound(dc, 0.3, 0.1, 0.5) == one
    assert 0.0 < dc.theta < 1.0
    assert 2.0 * dc.C * dc.phi2 > 1.0 - dc.C * dc.theta**dc.nu * dc.phi3 > 0.0


def test_difference_theta_validation():
    with pytest.raises(ValueError):
        difference_constants(2.0, 0.5, norms_dict(), 0.5, 0.3, 0.4, 0.05, 0.1,
                             1.5, theta=1.5)


def test_linearized_bound_additive_closed_form():
    # additive G: DG = 0 and the linearization is the exact linear flow
    # e^{(c - mu) t} v0; the bound must dominate it
    p = get_preset("ou-additive").with_(drift="linear", c=0.3, n=128)
    gen, nl, rp, u0, norm = build(p, seed=2)
    res = solve_mild(gen, nl, rp, u0)
    from roughpde.rough_core import rho_gamma

    rho = rho_gamma(rp)
    base_norm = res.norm_components(norm).total
    lc = linearized_constants(rho, base_norm, nl.C_G, nl.C_DF, p.gamma, p.sigma,
                              p.delta, 1.5)
    v0 = np.array([1.0, 0.5])
    flow = np.exp((0.3 - gen.mu) * 1.0) * v0
    bound = linearized_bound(lc, float(norm(v0)), 0.0, 1.0)
    assert bound >= float(norm(flow))


def run_instance(preset, seed):
    gen, nl, norm = build_operators(preset)
    from roughpde.presets import build_driver

    rp = build_driver(preset, seed)
    res = solve_mild(gen, nl, rp, np.full(preset.m, preset.u0_scale))
    return res, rp, norm


def test_pure_evolution_certified_any_C():
    p = get_preset("ou-additive").with_(g_amp=0.0, u0_scale=1.0, n=128)
    res, rp, norm = run_instance(p, 0)
    for C in (1.0 + 1e-6, 1.5, 3.0):
        assert certify(res, rp, norm, C).passed


@pytest.mark.parametrize("name", ["ou-additive", "tanh-ou"])
def test_calibrated_certification_holds_out(name):
    p = get_preset(name).with_(n=256)
    ratios = [calibration_ratio(*run_instance(p, s)[:2],
                                run_instance(p, s)[2]) for s in range(15)]
    C = calibrate(ratios)
    assert C > 1.0
    for s in range(15, 45):
        res, rp, norm = run_instance(p, s)
        rep = certify(res, rp, norm, C, calibrated_C=C)
        assert rep.passed, f"seed {s} margin {rep.log10_margin}"


def test_failure_kinds():
    # force a failure: huge controlled-path norm with tiny constants
    p = get_preset("ou-additive").with_(n=64, g_amp=0.0, u0_scale=0.0)
    res, rp, norm = run_instance(p, 1)
    res.path.values[:] = np.sin(np.linspace(0, 40, 65))[:, None] * 1e6
    rep_cal = certify(res, rp, norm, 1.0 + 1e-9, calibrated_C=1.5)
    assert not rep_cal.passed and rep_cal.failure_kind == "calibration"
    rep_bv = certify(res, rp, norm, 2.0, calibrated_C=1.5)
    if not rep_bv.passed:
        assert rep_bv.failure_kind == "bound_violation"


def test_certify_margin_reporting():
    p = get_preset("ou-additive").with_(n=128)
    res, rp, norm = run_instance(p, 3)
    rep = certify(res, rp, norm, 1.5)
    assert rep.passed and rep.log10_margin > 0
    d = rep.as_dict()
    assert {"passed", "log10_margin", "constants", "components"} <= set(d)


def test_difference_bound_dominates_linear_flow():
    # additive G + linear F: both linearizations follow the same linear flow,
    # so the difference is exactly e^{(c - mu) t} (v0 - v0~); the bound with
    # any admissible constants must dominate it
    p = get_preset("ou-additive").with_(drift="linear", c=0.3, n=128)
    gen, nl, rp, u0, norm = build(p, seed=4)
    res = solve_mild(gen, nl, rp, u0)
    res_t = solve_mild(gen, nl, rp, u0 + 0.5)
    from roughpde.rough_core import rho_gamma

    rho = rho_gamma(rp)
    n_u = res.norm_components(norm).total
    n_ut = res_t.norm_components(norm).total
    v0, v0t = np.array([1.0, 0.0]), np.array([0.3, 0.2])
    flow_diff = np.exp((0.3 - gen.mu) * 1.0) * (v0 - v0t)
    norms = {"u": n_u, "u_tilde": n_ut, "v": float(norm(v0)),
             "v_tilde": float(norm(v0t)), "du": float(norm(res.values[0] - res_t.values[0]))}
    dc = difference_constants(rho, 1.0, norms, nl.C_G, nl.C_DF, p.gamma,
                              p.sigma, p.delta, 1.5)
    bound = difference_bound(dc, float(norm(v0 - v0t)), 0.0, 1.0)
    assert bound >= float(norm(flow_diff))
