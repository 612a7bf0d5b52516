"""Mild-formulation march for the semilinear rough PDE in Galerkin form.

One step of the scheme, from t_i to t_{i+1} with dX and XX the driver
increments over the interval:

    u_{i+1} = U_{i+1,i} u_i
            + w_i * F(t_i, u_i)                       (exponential quadrature)
            + U_{i+1,i} (G(t_i,u_i) . dX + (DG.G)(t_i,u_i) o XX)

with w_i the closed-form diagonal weights (1 - exp(-mu xi_bar dt))/(mu xi_bar).
This is the one-step second-order scheme induced by the compensated-sum
definition of the rough convolution; the Gubinelli derivative of the solution
is stored as G(t_i, u_i) at every node.
"""

import numpy as np

from .rough_core import ControlledPath, crp_norm


class SolverBlowupError(RuntimeError):
    def __init__(self, step):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


class RoughConvolutionError(RuntimeError):
    def __init__(self, last, prev):
        super().__init__("compensated sums did not converge within the grid resolution")
        self.last = last
        self.prev = prev


class Nonlinearity:
    """Drift F and diffusion G with derivative evaluators.

    drift:     "zero" | "linear" (F(t,u) = c u)
    diffusion: "additive" (G(t,u) = g, an (m, d) matrix)
             | "tanh"     (G(t,u)[k,l] = g[k,l] tanh(u_k) on the first p modes)

    The declared constants C_F, C_G, C_DF are conservative bounds computed
    against a weighted norm via declare_constants(); delta and sigma are the
    declared regularity losses of F and G.
    """

    def __init__(self, m, d, drift="zero", c=0.0, diffusion="additive",
                 g=None, p=None, delta=0.0, sigma=0.0):
        if drift not in ("zero", "linear"):
            raise ValueError(f"unknown drift kind {drift!r}")
        if diffusion not in ("additive", "tanh"):
            raise ValueError(f"unknown diffusion kind {diffusion!r}")
        self.m, self.d = m, d
        self.drift = drift
        self.c = float(c)
        self.diffusion = diffusion
        self.g = np.zeros((m, d)) if g is None else np.asarray(g, dtype=float)
        if self.g.shape != (m, d):
            raise ValueError("g must be an (m, d) amplitude matrix")
        self.p = m if p is None else int(p)
        if diffusion == "tanh":
            self.g = self.g.copy()
            self.g[self.p :] = 0.0
        self.delta = float(delta)
        self.sigma = float(sigma)
        self.G_bounded = True
        self.G_additive = diffusion == "additive"
        self.C_F = abs(self.c) if drift == "linear" else 0.0
        self.C_DF = self.C_F
        self.C_G = 0.0

    def declare_constants(self, norm):
        """Fill C_F, C_G, C_DF as conservative bounds in the given norm scale.

        tanh and its first three derivatives are bounded by 2, so the
        diffusion constant is 2 max_l |g_col|; additive diffusion needs only
        the column norms themselves.
        """
        col = max(norm(self.g[:, l]) for l in range(self.d)) if self.d else 0.0
        self.C_G = col if self.G_additive else 2.0 * col
        self.C_F = abs(self.c) if self.drift == "linear" else 0.0
        self.C_DF = self.C_F
        return self

    # drift -------------------------------------------------------------
    def F(self, t, u):
        if self.drift == "zero":
            return np.zeros_like(u)
        return self.c * u

    def DF_apply(self, t, u, v):
        if self.drift == "zero":
            return np.zeros_like(v)
        return self.c * v

    # diffusion ----------------------------------------------------------
    def G(self, t, u):
        if self.G_additive:
            return self.g
        out = np.zeros((self.m, self.d))
        out[: self.p] = self.g[: self.p] * np.tanh(u[: self.p])[:, None]
        return out

    def DG_apply(self, t, u, v):
        """Columns DG_l(u) v, an (m, d) matrix (zero for additive G)."""
        if self.G_additive:
            return np.zeros((self.m, self.d))
        sech2 = np.zeros(self.m)
        sech2[: self.p] = 1.0 / np.cosh(u[: self.p]) ** 2
        return self.g * (sech2 * v)[:, None]

    def second_order(self, t, u):
        """(DG.G)(t,u): [:,k,l] = DG_l(u)[G(u) e_k], contracted against XX[k,l]."""
        if self.G_additive:
            return np.zeros((self.m, self.d, self.d))
        th = np.tanh(u[: self.p])
        sech2 = 1.0 / np.cosh(u[: self.p]) ** 2
        out = np.zeros((self.m, self.d, self.d))
        out[: self.p] = (self.g[: self.p, :, None] * self.g[: self.p, None, :]
                         * (sech2 * th)[:, None, None])
        return out

    def noise_increment(self, t, u, dx, xx):
        """G(t,u) . dX + (DG.G)(t,u) o XX over one interval."""
        inc = self.G(t, u) @ dx
        if not self.G_additive:
            inc = inc + np.einsum("mkl,kl->m", self.second_order(t, u), xx)
        return inc

    def tangent_noise(self, t, u, tangents, dx, xx):
        """DG(u) v . dX + (DG(u) v)' o XX for each tangent column v.

        The Gubinelli derivative of DG(u)v follows the chain rule
        (DG(u)v)'[:,k,l] = D2G_l(u)[G_k(u), v] + DG_l(u)[(DG(u)v)_k];
        for the diagonal tanh diffusion this contracts to the closed form
        used below.  Identically zero for additive G.
        """
        if self.G_additive:
            return np.zeros_like(tangents)
        p = self.p
        th = np.tanh(u[:p])
        sech2 = 1.0 / np.cosh(u[:p]) ** 2
        gdx = self.g[:p] @ dx
        first = np.zeros_like(tangents)
        first[:p] = (sech2 * gdx)[:, None] * tangents[:p]
        quad = np.einsum("jk,kl,jl->j", self.g[:p], xx, self.g[:p])
        coeff = sech2 * (sech2 - 2.0 * th * th) * quad
        first[:p] += coeff[:, None] * tangents[:p]
        return first


def exp_weights(gen, t0, t1):
    """Diagonal drift-quadrature weights int_{t0}^{t1} U_{t1,r} dr per mode.

    (1 - exp(-mu_k xi_bar dt)) / (mu_k xi_bar), with the mu -> 0 limit dt
    handled through expm1.
    """
    dt = t1 - t0
    if dt == 0.0:
        return np.zeros_like(gen.mu)
    z = gen.mu * gen.phase(t0, t1)
    out = np.full_like(gen.mu, dt)
    nz = z != 0.0
    out[nz] = -np.expm1(-z[nz]) / z[nz] * dt
    return out


def drift_quadrature(gen, nl, u_i, t0, t1):
    """Exponential-integrator drift contribution over [t0, t1], F frozen at t0."""
    return exp_weights(gen, t0, t1) * nl.F(t0, u_i)


class SolveResult:
    """Solution controlled path with its Gubinelli derivative and diagnostics."""

    def __init__(self, path, gen, nl, rp, diagnostics):
        self.path = path
        self.gen = gen
        self.nl = nl
        self.rp = rp
        self.diagnostics = diagnostics

    @property
    def values(self):
        return self.path.values

    @property
    def terminal(self):
        return self.path.values[-1]

    def norm_components(self, norm, gamma=None, i0=0, i1=None):
        return crp_norm(self.path, self.rp, norm, gamma=gamma, i0=i0, i1=i1)


def solve_mild(gen, nl, rp, u0):
    """March the one-step scheme over the driver grid."""
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (gen.m,):
        raise ValueError("initial state dimension mismatch")
    if not np.all(np.isfinite(u0)):
        raise ValueError("initial state must be finite")
    times = rp.times
    n = rp.n
    values = np.empty((n + 1, gen.m))
    gub = np.empty((n + 1, gen.m, rp.d))
    values[0] = u0
    gub[0] = nl.G(times[0], u0)
    x = rp.values
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            t0, t1 = times[i], times[i + 1]
            udiag = gen.u_diag(t0, t1)
            inc = nl.noise_increment(t0, values[i], x[i + 1] - x[i], rp.second_level[i])
            nxt = udiag * (values[i] + inc) + drift_quadrature(gen, nl, values[i], t0, t1)
            if not np.all(np.isfinite(nxt)):
                raise SolverBlowupError(i)
            values[i + 1] = nxt
            gub[i + 1] = nl.G(t1, nxt)
    path = ControlledPath(values, gub, times)
    diag = {"steps": n, "n": rp.n, "dt": rp.base.dt}
    return SolveResult(path, gen, nl, rp, diag)


def _partition_indices(i0, i1, level):
    pieces = min(2**level, i1 - i0)
    idx = i0 + np.round(np.arange(pieces + 1) * (i1 - i0) / pieces).astype(int)
    return np.unique(idx)


def _compensated_sum(gen, y, yp, rp, pts, t_end):
    acc = np.zeros(y.shape[1])
    times = rp.times
    x = rp.values
    for a, b in zip(pts[:-1], pts[1:]):
        dx = x[b] - x[a]
        xx = rp.second_level_pair(a, b)
        term = y[a] @ dx + np.einsum("mkl,kl->m", yp[a], xx)
        acc += gen.u_diag(times[a], t_end) * term
    return acc


def rough_convolution(gen, cp, rp, i0, i1, norm, tol=1e-9, min_level=2):
    """Rough convolution int_s^t U_{t,r} y_r dX_r by compensated sums.

    The partition of [t_{i0}, t_{i1}] is refined dyadically (snapped to grid
    nodes) until two successive levels differ by less than tol in the given
    norm; refining past the grid resolution raises RoughConvolutionError
    carrying the last two level values.

    ``cp`` is either a ControlledPath (d = 1 drivers: the values are the
    integrand column) or a pair (y, yp) of arrays shaped (n+1, m, d) and
    (n+1, m, d, d).
    """
    if i0 >= i1:
        raise ValueError("need i0 < i1")
    if isinstance(cp, ControlledPath):
        if rp.d != 1:
            raise ValueError("pass explicit (y, yp) arrays for d > 1 drivers")
        y = cp.values[:, :, None]
        yp = cp.gubinelli[:, :, :, None]
    else:
        y, yp = cp
    t_end = rp.times[i1]
    prev = None
    level = min_level
    while True:
        pts = _partition_indices(i0, i1, level)
        cur = _compensated_sum(gen, y, yp, rp, pts, t_end)
        if prev is not None and norm(cur - prev) < tol:
            return cur
        if len(pts) == i1 - i0 + 1:
            raise RoughConvolutionError(cur, prev)
        prev = cur
        level += 1


def convergence_study(gen, nl, u0, rp_fine, levels, norm=None):
    """Self-convergence of terminal states on nested restrictions of one driver.

    levels: increasing dyadic grid sizes, each dividing rp_fine.n; the finest
    level is the reference.  Returns per-level errors and the fitted order
    (least squares on the nonzero errors; exact schemes report order inf).
    """
    levels = sorted(levels)
    if len(levels) < 3:
        raise ValueError("need at least 3 dyadic levels")
    terminals = {}
    for n in levels:
        rp = rp_fine.restrict(rp_fine.n // n) if n != rp_fine.n else rp_fine
        terminals[n] = solve_mild(gen, nl, rp, u0).terminal
    ref = terminals[levels[-1]]
    measure = (lambda v: float(np.linalg.norm(v))) if norm is None else norm
    errors = {n: measure(terminals[n] - ref) for n in levels[:-1]}
    errs = np.array([errors[n] for n in levels[:-1]])
    hs = np.array([1.0 / n for n in levels[:-1]])
    floor = 1e-12 * max(1.0, float(np.linalg.norm(ref)))
    if np.all(errs <= floor):
        # exact up to roundoff (e.g. F = G = 0, where every level reproduces
        # the evolution family); report infinite order rather than fitting noise
        order = float("inf")
    else:
        mask = errs > 0
        order = float(np.polyfit(np.log(hs[mask]), np.log(errs[mask]), 1)[0])
    monotone = bool(np.all(np.diff(errs) <= 0.0)) or bool(np.all(errs <= floor))
    return {"errors": errors, "order": order, "monotone": monotone, "levels": levels}
