"""Lyapunov spectrum of the linearized flow via volume growth.

Tangent ensembles follow the first-variation equation

    dv = [A(t) v + DF(t, u_t) v] dt + DG(t, u_t) v dX,

stepped with the same one-step scheme as the base solution; the step is the
exact Jacobian of the nonlinear step, which the finite-difference tests
exploit.  Exponents come from periodic orthonormalization in the weighted
inner product <x, y>_alpha = sum mu_k^(2 alpha) x_k y_k, accumulating the
log stretching factors; volumes are cross-checked against an independent
sequential-distance route.
"""

import numpy as np

from .rough_core import AlphaNorm
from .solver import exp_weights, solve_mild


class EnsembleCollapseError(RuntimeError):
    def __init__(self, step):
        super().__init__(f"tangent ensemble lost rank at step {step}")
        self.step = step


def _as_matrix(vectors):
    if isinstance(vectors, (list, tuple)):
        return np.stack([np.asarray(v, float) for v in vectors], axis=1)
    return np.asarray(vectors, dtype=float)


def weighted_qr(vectors, scale):
    """QR in the weighted inner product: scale rows, factor, unscale.

    Returns (Q, r) with Q weighted-orthonormal columns spanning the input
    and r the positive diagonal stretching factors.
    """
    a = vectors * scale[:, None]
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    q = q * signs
    return q / scale[:, None], np.abs(np.diag(r))


def volume(vectors, norm):
    """Vol(x_1..x_k) = ||x_1|| prod_i dist(x_i, span of predecessors).

    Computed as sqrt(det Gram) through a triangular factorization of the
    weighted coordinate matrix; dependent sets give 0.
    """
    mat = _as_matrix(vectors)
    if mat.ndim != 2:
        raise ValueError("pass vectors as columns or a list of vectors")
    if not np.all(np.isfinite(mat)):
        raise ValueError("vectors must be finite")
    _, r = np.linalg.qr(mat * norm.scale[:, None])
    return float(np.prod(np.abs(np.diag(r))))


def sequential_distance_product(vectors, norm):
    """The defining product, each distance from an explicit least-squares
    projection; an independent oracle for volume()."""
    mat = _as_matrix(vectors) * norm.scale[:, None]
    out = float(np.linalg.norm(mat[:, 0]))
    for i in range(1, mat.shape[1]):
        prev, x = mat[:, :i], mat[:, i]
        coef, *_ = np.linalg.lstsq(prev, x, rcond=None)
        out *= float(np.linalg.norm(x - prev @ coef))
    return out


def linearize_step(gen, nl, u_i, t0, t1, tangents, dx, xx):
    """One scheme step of the first-variation equation for tangent columns.

    Exact Jacobian of the nonlinear step: U (v + tangent noise) + drift
    weights times DF v.  For additive diffusion the noise term vanishes and
    this is the exponential-integrator linear step.
    """
    udiag = gen.u_diag(t0, t1)
    inc = nl.tangent_noise(t0, u_i, tangents, dx, xx)
    drift = exp_weights(gen, t0, t1)[:, None] * nl.DF_apply(t0, u_i, tangents)
    nxt = udiag[:, None] * (tangents + inc) + drift
    if not np.all(np.isfinite(nxt)):
        raise EnsembleCollapseError(-1)
    return nxt


def multiplicity_clusters(lams, gap=0.05):
    """Group a nonincreasing spectrum into clusters separated by > gap."""
    clusters = []
    for lam in lams:
        if clusters and clusters[-1]["lambdas"][-1] - lam <= gap:
            clusters[-1]["lambdas"].append(lam)
        else:
            clusters.append({"lambdas": [lam]})
    return [{"lambda": float(np.mean(c["lambdas"])), "multiplicity": len(c["lambdas"])}
            for c in clusters]


class LyapunovEstimate:
    """Spectrum with running diagnostics from the orthonormalization sweep."""

    def __init__(self, lambdas, per_index, checkpoint_times, running, log_vol,
                 alpha, vol_slope, log_r=None, gap=0.05):
        self.lambdas = lambdas
        self.per_index = per_index
        self.checkpoint_times = checkpoint_times
        self.running = running
        self.log_vol = log_vol
        self.alpha = alpha
        self.vol_slope = vol_slope
        self.log_r = log_r  # per-renorm log stretching factors, (n_cp, k)
        self.clusters = multiplicity_clusters(lambdas, gap)

    @property
    def sum_lambdas(self):
        return float(np.sum(self.lambdas))


def initial_ensemble(m, k, scale, init):
    """Weighted-orthonormal starting tangents.

    "axes": coordinate directions (diagonal flows then stay axis-aligned and
    the estimates are exact).  "mixed": a fixed upper-triangular blend of
    modes, orthonormalized; this makes the finite-horizon transient of the
    estimates visible, which the norm-independence study relies on.  An
    explicit (m, k) array is orthonormalized and used as given.
    """
    if isinstance(init, np.ndarray):
        q, _ = weighted_qr(np.asarray(init, float), scale)
        return q
    if init == "axes":
        tangents = np.zeros((m, k))
        tangents[:k, :k] = np.diag(1.0 / scale[:k])
        return tangents
    if init == "mixed":
        raw = np.zeros((m, k))
        for i in range(k):
            raw[i:, i] = 2.0 ** -np.arange(m - i)
        q, _ = weighted_qr(raw, scale)
        return q
    raise ValueError(f"unknown ensemble init {init!r}")


def lyapunov_spectrum(gen, nl, rp, u0, k, renorm_every, norm, burn_steps=0,
                      volume_checks=False, init="axes"):
    """Benettin sweep: propagate k tangents along the solved base trajectory,
    orthonormalize every renorm_every steps in the weighted inner product,
    and average the log stretching factors.

    The log-volume series is rebuilt at every checkpoint from the volume of
    the pre-renormalization ensemble plus the accumulated rescalings, so its
    fitted slope is an independent consistency check on sum(lambda_i).
    """
    if k > gen.m:
        raise ValueError("ensemble larger than the Galerkin dimension")
    if rp.n - burn_steps < renorm_every:
        raise ValueError("horizon too short for the renormalization interval")
    base = solve_mild(gen, nl, rp, np.asarray(u0, float))
    times = rp.times
    x = rp.values
    scale = norm.scale
    tangents = initial_ensemble(gen.m, k, scale, init)
    acc = np.zeros(k)
    cp_times, running, log_vol, log_r = [], [], [], []
    vol_checks = []
    t_start = times[burn_steps]
    for i in range(burn_steps, rp.n):
        u_i = base.values[i]
        try:
            tangents = linearize_step(gen, nl, u_i, times[i], times[i + 1], tangents,
                                      x[i + 1] - x[i], rp.second_level[i])
        except EnsembleCollapseError:
            raise EnsembleCollapseError(i + 1) from None
        done = i + 1 - burn_steps
        if done % renorm_every == 0 or i + 1 == rp.n:
            if volume_checks:
                vol_checks.append((volume(tangents, norm),
                                   sequential_distance_product(tangents, norm)))
            pre_vol = volume(tangents, norm)
            if pre_vol <= 0.0 or not np.isfinite(pre_vol):
                raise EnsembleCollapseError(i + 1)
            log_vol.append(float(np.sum(acc)) + float(np.log(pre_vol)))
            tangents, r = weighted_qr(tangents, scale)
            if np.any(r < 1e-280):
                raise EnsembleCollapseError(i + 1)
            log_r.append(np.log(r))
            acc = acc + log_r[-1]
            t_el = times[i + 1] - t_start
            cp_times.append(times[i + 1])
            running.append(acc / t_el)
    per_index = acc / (times[rp.n] - t_start)
    lambdas = np.sort(per_index)[::-1]
    cp_times = np.asarray(cp_times)
    log_vol = np.asarray(log_vol)
    vol_slope = float(np.polyfit(cp_times, log_vol, 1)[0]) if len(cp_times) > 1 \
        else float("nan")
    est = LyapunovEstimate(lambdas, per_index, cp_times, np.asarray(running),
                           log_vol, norm.alpha, vol_slope, log_r=np.asarray(log_r))
    if volume_checks:
        est.volume_check_pairs = vol_checks
    return est


def norm_independence_check(gen, nl, rp, u0, k, alpha_list, renorm_every,
                            burn_steps=0, init="mixed"):
    """Spectra at several space indices alpha on the same driver sample.

    Returns the spectra and the max deviation across indices and exponents;
    the deviation is a finite-horizon transient and should shrink as the
    horizon grows.  The mixed ensemble init keeps that transient nonzero
    (diagonal flows from axis-aligned ensembles agree to float precision at
    every alpha, which would make the horizon comparison vacuous).
    """
    if len(alpha_list) < 2:
        raise ValueError("need at least two alpha values")
    spectra = {}
    for alpha in alpha_list:
        norm = AlphaNorm(gen.mu, alpha)
        spectra[alpha] = lyapunov_spectrum(gen, nl, rp, u0, k, renorm_every,
                                           norm, burn_steps=burn_steps, init=init)
    alphas = list(alpha_list)
    dev = 0.0
    for i, a in enumerate(alphas):
        for b in alphas[i + 1 :]:
            dev = max(dev, float(np.max(np.abs(spectra[a].lambdas - spectra[b].lambdas))))
    return {"spectra": spectra, "max_deviation": dev}


def decay_check(gen, nl, rp, x0, y0, norm, fit_window=(0.2, 0.95),
                floor=1e-250):
    """Fitted separation rate of two nearby solutions on the same driver.

    Fits the slope of log |phi_t(x) - phi_t(y)|_alpha over the fit window,
    shrinking the window wherever the difference underflows; identical
    initial data short-circuits with a notice.
    """
    x0 = np.asarray(x0, float)
    y0 = np.asarray(y0, float)
    if np.array_equal(x0, y0):
        return {"skipped": True, "reason": "identical initial data"}
    rx = solve_mild(gen, nl, rp, x0)
    ry = solve_mild(gen, nl, rp, y0)
    diff = rx.values - ry.values
    mags = np.sqrt(np.sum((diff * norm.scale) ** 2, axis=1))
    times = rp.times
    lo = int(fit_window[0] * rp.n)
    hi = int(fit_window[1] * rp.n)
    alive = np.nonzero(mags > floor)[0]
    hi = min(hi, alive[-1]) if len(alive) else lo
    if hi - lo < 8:
        return {"skipped": True, "reason": "difference underflow before fit window"}
    slope = float(np.polyfit(times[lo : hi + 1], np.log(mags[lo : hi + 1]), 1)[0])
    return {"skipped": False, "rate": slope, "times": times, "separation": mags}
