"""A-priori bound constants for mild solutions and their certification.

The bound on the controlled-path norm of a solution over [s, t] is

    C1 rho (1 + |u_s|_alpha + |G(s,u_s)|_{alpha-gamma}) exp(C2 (t-s)),

with constants assembled from Phi_1..Phi_3, the step kappa and a calibration
constant C > 1:

    Phi_1 = C_F + C_G rho^2 + C_G rho,   Phi_2 = max(1, C_G rho),
    Phi_3 = C_F + C_G rho^2,
    nu    = min(1 - 2 gamma, 1 - delta, gamma - sigma),
    C2    = (1/kappa) log(2 C Phi_2 / (1 - C kappa^nu Phi_3)),
    C1    = e^C2 max((1-q)/(2 C Phi_2 - 1 + q),
                     (1-q) C Phi_1 / (q + 2 C Phi_2 - 1)^2),  q = C kappa^nu Phi_3.

The canonical step kappa^nu = 1/(2 C Phi_3) makes 1 - q = 1/2 exactly.  C2
is typically enormous (kappa is a high inverse power of the constants), so
every bound is computed in log space; the plain-float accessors overflow to
inf honestly rather than raising.

The theory constant C is not constructive.  It is calibrated per problem
class as 1.5x the worst observed ratio (norm / bound at C = 1) over a
training family of seeds, then frozen; certification runs on held-out seeds.
"""

import math

import numpy as np

from .rough_core import rho_gamma

LOG_FLOAT_MAX = math.log(np.finfo(float).max)


def _check_params(gamma, sigma, delta, C):
    if not (1.0 / 3.0 < gamma <= 0.5):
        raise ValueError("gamma must lie in (1/3, 1/2]")
    if not sigma < gamma:
        raise ValueError("need sigma < gamma")
    if not delta < 1.0:
        raise ValueError("need delta < 1")
    if not C > 1.0:
        raise ValueError("need C > 1")
    nu = min(1.0 - 2.0 * gamma, 1.0 - delta, gamma - sigma)
    if nu <= 0.0:
        raise ValueError("nu = min(1-2gamma, 1-delta, gamma-sigma) must be positive")
    return nu


class GronwallConstants:
    """Bound constants; C1 may be inf in plain float, log_C1 is always finite."""

    def __init__(self, phi1, phi2, phi3, nu, kappa, C, C2, log_C1, rho):
        self.phi1, self.phi2, self.phi3 = phi1, phi2, phi3
        self.nu, self.kappa, self.C = nu, kappa, C
        self.C2 = C2
        self.log_C1 = log_C1
        self.rho = rho

    @property
    def C1(self):
        return math.exp(self.log_C1) if self.log_C1 < LOG_FLOAT_MAX else float("inf")

    @property
    def admissibility_gap(self):
        """1 - C kappa^nu Phi_3; equals 1/2 exactly for the canonical kappa."""
        return 1.0 - self.C * self.kappa**self.nu * self.phi3


def _assemble(phi1, phi2, phi3, nu, C, kappa):
    if kappa is None:
        kappa = (2.0 * C * phi3) ** (-1.0 / nu) if phi3 > 0 else None
    if kappa is None:
        # Phi_3 = 0: no self-interaction term; any step works, use 1.
        kappa = 1.0
    q = C * kappa**nu * phi3
    if not q < 1.0:
        raise ValueError("inadmissible step: C kappa^nu Phi_3 >= 1")
    denom = 2.0 * C * phi2 - 1.0 + q
    if denom <= 0.0:
        raise ValueError("inadmissible constants: 2 C Phi_2 - 1 + C kappa^nu Phi_3 <= 0")
    C2 = math.log(2.0 * C * phi2 / (1.0 - q)) / kappa
    factor = max((1.0 - q) / denom, (1.0 - q) * C * phi1 / denom**2) if phi1 > 0 \
        else (1.0 - q) / denom
    log_C1 = C2 + math.log(factor)
    return kappa, C2, log_C1


def compute_constants(rp, interval, C_F, C_G, gamma, sigma, delta, C, kappa=None,
                      rho=None):
    """Constants of the a-priori bound on the interval (grid index pair).

    rho is computed from the driver unless given; kappa defaults to the
    canonical step with C kappa^nu Phi_3 = 1/2.
    """
    nu = _check_params(gamma, sigma, delta, C)
    if rho is None:
        i0, i1 = interval
        rho = rho_gamma(rp, i0, i1, gamma)
    phi1 = C_F + C_G * rho**2 + C_G * rho
    phi2 = max(1.0, C_G * rho)
    phi3 = C_F + C_G * rho**2
    kappa, C2, log_C1 = _assemble(phi1, phi2, phi3, nu, C, kappa)
    return GronwallConstants(phi1, phi2, phi3, nu, kappa, C, C2, log_C1, rho)


def log_gronwall_bound(consts, u_alpha, g_gamma, dt):
    """log of C1 rho (1 + |u_s|_alpha + |G(s,u_s)|_{alpha-gamma}) e^{C2 dt}."""
    return (consts.log_C1 + math.log(consts.rho)
            + math.log1p(u_alpha + g_gamma) + consts.C2 * dt)


def gronwall_bound(consts, u_alpha, g_gamma, dt):
    """Plain-float bound value; overflows to inf when the exponent exceeds float range."""
    lb = log_gronwall_bound(consts, u_alpha, g_gamma, dt)
    return math.exp(lb) if lb < LOG_FLOAT_MAX else float("inf")


class LinearizedConstants(GronwallConstants):
    """Constants of the homogeneous bound for the first-variation flow."""


def linearized_constants(rho, base_norm, C_G, C_DF, gamma, sigma, delta, C,
                         kappa=None):
    """Phi~_2 = max(1, C_G rho, C_G^2 rho); Phi~_3 couples to the base norm."""
    nu = _check_params(gamma, sigma, delta, C)
    phi2 = max(1.0, C_G * rho, C_G**2 * rho)
    phi3 = C_DF * (1.0 + base_norm) + C_G * rho**3 * (1.0 + base_norm) ** 2
    kappa, C2, log_C1 = _assemble(0.0, phi2, phi3, nu, C, kappa)
    return LinearizedConstants(0.0, phi2, phi3, nu, kappa, C, C2, log_C1, rho)


def log_linearized_bound(consts, v_alpha, dgv_gamma, dt):
    """Homogeneous in the initial data: C~1 rho (|v_s| + |DG v_s|) e^{C~2 dt}."""
    if v_alpha + dgv_gamma == 0.0:
        return -math.inf
    return (consts.log_C1 + math.log(consts.rho)
            + math.log(v_alpha + dgv_gamma) + consts.C2 * dt)


def linearized_bound(consts, v_alpha, dgv_gamma, dt):
    lb = log_linearized_bound(consts, v_alpha, dgv_gamma, dt)
    return math.exp(lb) if lb < LOG_FLOAT_MAX else float("inf")


def _coupling_poly(n_u, n_ut, n_v, n_vt):
    """Polynomial coupling the four controlled-path norms in the difference bound.

    Sum of the coefficient polynomials appearing in the bound on the
    difference of the two linearized diffusion terms.
    """
    return ((1.0 + n_u) * (1.0 + n_ut) + n_ut**2
            + (1.0 + n_u + n_ut + n_u**2) * n_v
            + (1.0 + n_u + n_ut) * n_vt)


class DifferenceConstants(GronwallConstants):
    def __init__(self, *args, theta, **kw):
        super().__init__(*args, **kw)
        self.theta = theta


def difference_constants(rho, dt, norms, C_G, C_DF, gamma, sigma, delta, C,
                         theta=None):
    """Constants for the bound on the difference of two linearizations.

    norms: dict with keys u, u_tilde, v, v_tilde (controlled-path norms of
    the base solutions and their linearizations) and du (norm of the base
    difference).  theta defaults to the canonical step capped below 1.
    """
    nu = _check_params(gamma, sigma, delta, C)
    n_u, n_ut = norms["u"], norms["u_tilde"]
    n_v, n_vt = norms["v"], norms["v_tilde"]
    n_du = norms["du"]
    drift_pow = dt ** (1.0 - max(2.0 * gamma, delta))
    poly = _coupling_poly(n_u, n_ut, n_v, n_vt)
    phi1 = n_v + n_du * (C_DF * drift_pow * n_v + dt ** (gamma - sigma) * C_G * rho**3 * poly
                         + rho + C_G * (n_vt + n_u * n_v + n_v))
    phi2 = 1.0 + rho * C_G * (1.0 + n_ut)
    phi3 = C_DF * drift_pow * (1.0 + n_u) + dt ** (gamma - sigma) * C_G * rho**3 * poly
    if theta is None:
        theta = (2.0 * C * phi3) ** (-1.0 / nu) if phi3 > 0 else 1.0
        theta = min(theta, 1.0 - 1e-12)
    if not 0.0 < theta < 1.0:
        raise ValueError("need 0 < theta < 1")
    q = C * theta**nu * phi3
    if not (2.0 * C * phi2 > 1.0 - q > 0.0):
        raise ValueError("inadmissible theta: need 2 C Phi_2 > 1 - C theta^nu Phi_3 > 0")
    _, C2, log_C1 = _assemble(phi1, phi2, phi3, nu, C, theta)
    return DifferenceConstants(phi1, phi2, phi3, nu, theta, C, C2, log_C1, rho,
                               theta=theta)


def log_difference_bound(consts, dv_alpha, dvp_gamma, dt):
    if dv_alpha + dvp_gamma == 0.0:
        return -math.inf
    return (consts.log_C1 + math.log(consts.rho)
            + math.log(dv_alpha + dvp_gamma) + consts.C2 * dt)


def difference_bound(consts, dv_alpha, dvp_gamma, dt):
    lb = log_difference_bound(consts, dv_alpha, dvp_gamma, dt)
    return math.exp(lb) if lb < LOG_FLOAT_MAX else float("inf")


class CertificationReport:
    def __init__(self, passed, log10_margin, norm_total, log_bound, consts,
                 components, failure_kind=None):
        self.passed = passed
        self.log10_margin = log10_margin
        self.norm_total = norm_total
        self.log_bound = log_bound
        self.consts = consts
        self.components = components
        self.failure_kind = failure_kind

    @property
    def margin(self):
        """bound / norm as a float (inf when the bound overflows)."""
        lm = self.log10_margin * math.log(10.0)
        return math.exp(lm) if lm < LOG_FLOAT_MAX else float("inf")

    def as_dict(self):
        return {
            "passed": self.passed, "log10_margin": self.log10_margin,
            "norm_total": self.norm_total, "log_bound": self.log_bound,
            "failure_kind": self.failure_kind,
            "components": self.components.as_dict(),
            "constants": {"phi1": self.consts.phi1, "phi2": self.consts.phi2,
                          "phi3": self.consts.phi3, "nu": self.consts.nu,
                          "kappa": self.consts.kappa, "C": self.consts.C,
                          "C2": self.consts.C2, "log_C1": self.consts.log_C1,
                          "rho": self.consts.rho},
        }


def certify(result, rp, norm, C, gamma=None, calibrated_C=None, i0=0, i1=None):
    """Check norm <= bound for a solved trajectory; margin reported in log10.

    A failure with C below the calibrated floor is reported as a calibration
    failure, not a bound violation.
    """
    if gamma is None:
        gamma = rp.gamma
    if i1 is None:
        i1 = rp.n
    nl = result.nl
    consts = compute_constants(rp, (i0, i1), nl.C_F, nl.C_G, gamma, nl.sigma,
                               nl.delta, C)
    comp = result.norm_components(norm, gamma, i0, i1)
    u_s = float(norm(result.values[i0]))
    gnorm = norm.shifted(-gamma)
    gmat = nl.G(result.path.times[i0], result.values[i0])
    g_s = max(float(gnorm(gmat[:, l])) for l in range(gmat.shape[1]))
    dt = result.path.times[i1] - result.path.times[i0]
    log_bound = log_gronwall_bound(consts, u_s, g_s, dt)
    log_norm = math.log(comp.total) if comp.total > 0 else -math.inf
    passed = log_norm <= log_bound
    failure = None
    if not passed:
        failure = ("calibration" if calibrated_C is not None and C < calibrated_C
                   else "bound_violation")
    margin = (log_bound - log_norm) / math.log(10.0)
    return CertificationReport(passed, margin, comp.total, log_bound, consts,
                               comp, failure_kind=failure)


def calibration_ratio(result, rp, norm, gamma=None, i0=0, i1=None):
    """norm / bound with the theory constant normalized to C = 1.

    The C = 1 'bound' is only a reference scale for calibration (the lemma
    needs C > 1); computed in log space like everything else.
    """
    if gamma is None:
        gamma = rp.gamma
    if i1 is None:
        i1 = rp.n
    nl = result.nl
    nu = _check_params(gamma, nl.sigma, nl.delta, 2.0)  # validate ranges only
    rho = rho_gamma(rp, i0, i1, gamma)
    phi1 = nl.C_F + nl.C_G * rho**2 + nl.C_G * rho
    phi2 = max(1.0, nl.C_G * rho)
    phi3 = nl.C_F + nl.C_G * rho**2
    kappa, C2, log_C1 = _assemble(phi1, phi2, phi3, nu, 1.0 + 1e-12, None)
    consts = GronwallConstants(phi1, phi2, phi3, nu, kappa, 1.0 + 1e-12, C2,
                               log_C1, rho)
    comp = result.norm_components(norm, gamma, i0, i1)
    u_s = float(norm(result.values[i0]))
    gnorm = norm.shifted(-gamma)
    gmat = nl.G(result.path.times[i0], result.values[i0])
    g_s = max(float(gnorm(gmat[:, l])) for l in range(gmat.shape[1]))
    dt = result.path.times[i1] - result.path.times[i0]
    log_bound = log_gronwall_bound(consts, u_s, g_s, dt)
    if comp.total <= 0.0:
        return 0.0
    return math.exp(min(math.log(comp.total) - log_bound, LOG_FLOAT_MAX))


def calibrate(ratios, factor=1.5, floor=1.0 + 1e-6):
    """Frozen calibration constant: factor x worst training ratio, floored above 1."""
    return max(factor * max(ratios), floor)
