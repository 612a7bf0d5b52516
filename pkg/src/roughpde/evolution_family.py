"""Diagonal non-autonomous parabolic evolution families on a spectral basis.

The generator family is A(t) = -xi(t) diag(mu_k) with xi(t) >= xi_min > 0,
so U_{t,s} = diag(exp(-mu_k (Xi(t) - Xi(s)))) with Xi a closed-form
antiderivative of xi.  The cocycle identity U_{t,s} U_{s,r} = U_{t,r} holds
by exponent additivity; no quadrature enters the evolution family itself.
"""

import numpy as np


class TimeCoefficient:
    """Scalar coefficient xi(t), either constant or sinusoidally periodic."""

    def __init__(self, kind, c0=1.0, eps=0.0, tau=1.0):
        if kind not in ("constant", "periodic"):
            raise ValueError(f"unknown coefficient kind {kind!r}")
        if kind == "periodic" and not c0 > eps >= 0.0:
            raise ValueError("need c0 > eps >= 0 for positivity")
        if kind == "constant" and c0 <= 0.0:
            raise ValueError("constant coefficient must be positive")
        self.kind = kind
        self.c0 = float(c0)
        self.eps = float(eps) if kind == "periodic" else 0.0
        self.tau = float(tau)
        self.offset = 0.0

    def value(self, t):
        t = np.asarray(t, dtype=float) + self.offset
        if self.kind == "constant":
            return np.broadcast_to(self.c0, t.shape).copy() if t.ndim else self.c0
        return self.c0 + self.eps * np.sin(2.0 * np.pi * t / self.tau)

    def antiderivative(self, t):
        """Xi(t) with Xi(0) = 0 (before any shift)."""
        t = np.asarray(t, dtype=float) + self.offset
        if self.kind == "constant":
            return self.c0 * t
        w = 2.0 * np.pi / self.tau
        return self.c0 * t + self.eps / w * (1.0 - np.cos(w * t))

    @property
    def minimum(self):
        return self.c0 - self.eps

    def shifted(self, s):
        """The coefficient t -> xi(t + s), used for the cocycle-shift test."""
        out = TimeCoefficient(self.kind, self.c0, self.eps, self.tau)
        out.eps = self.eps
        out.offset = self.offset + float(s)
        return out

    def spec_string(self):
        if self.kind == "constant":
            return f"constant:c={self.c0:g}"
        return f"periodic:c0={self.c0:g},eps={self.eps:g},tau={self.tau:g}"


class SpectralGenerator:
    """A(t) = -xi(t) diag(mu) on an m-dimensional spectral basis."""

    def __init__(self, mu, xi):
        mu = np.asarray(mu, dtype=float)
        if np.any(mu <= 0) or np.any(np.diff(mu) < 0):
            raise ValueError("eigenvalues must be positive and nondecreasing")
        self.mu = mu
        self.xi = xi

    @property
    def m(self):
        return len(self.mu)

    def phase(self, s, t):
        return self.xi.antiderivative(t) - self.xi.antiderivative(s)

    def u_diag(self, s, t):
        """Diagonal of U_{t,s} for s <= t."""
        ph = self.phase(s, t)
        return np.exp(-np.multiply.outer(ph, self.mu)) if np.ndim(ph) else np.exp(-ph * self.mu)


def laplacian_modes(m):
    """Dirichlet Laplacian eigenvalues on (0, pi): mu_k = k^2."""
    return np.arange(1, m + 1, dtype=float) ** 2


def apply_U(gen, t, s, x):
    """U_{t,s} x, componentwise exp(-mu_k (Xi(t) - Xi(s))) x_k."""
    if t < s:
        raise ValueError("apply_U requires s <= t")
    x = np.asarray(x, dtype=float)
    diag = gen.u_diag(s, t)
    return diag[:, None] * x if x.ndim == 2 else diag * x


def smoothing_report(gen, alpha, sigma1, sigma2, grid):
    """Empirical smoothing constants of the evolution family on a time grid.

    C_est  = sup |(U_{t,s} - Id) e_k|_alpha / ((t-s)^sigma1 |e_k|_{alpha+sigma1})
    Ct_est = sup |U_{t,s} e_k|_{alpha+sigma2} (t-s)^sigma2 / |e_k|_alpha

    both over all grid pairs s < t and basis vectors e_k.  For the diagonal
    family these reduce to scalar expressions per mode.
    """
    if not 0.0 <= sigma1 <= 1.0:
        raise ValueError("sigma1 must lie in [0, 1]")
    if sigma2 < 0.0:
        raise ValueError("sigma2 must be nonnegative")
    grid = np.asarray(grid, dtype=float)
    s_idx, t_idx = np.triu_indices(len(grid), k=1)
    dt = grid[t_idx] - grid[s_idx]
    ph = gen.phase(grid[s_idx], grid[t_idx])
    z = np.multiply.outer(ph, gen.mu)
    decay = np.exp(-z)
    c_est = np.max(-np.expm1(-z) / (dt[:, None] ** sigma1 * gen.mu[None, :] ** sigma1))
    ct_est = np.max(decay * gen.mu[None, :] ** sigma2 * dt[:, None] ** sigma2)
    return {"C_est": float(c_est), "Ct_est": float(ct_est),
            "sigma1": sigma1, "sigma2": sigma2, "alpha": alpha}


def parse_coefficient(spec):
    """Parse 'constant:c=1' / 'periodic:c0=1,eps=0.5,tau=1'."""
    kind, _, args = spec.partition(":")
    kv = dict(item.split("=") for item in args.split(",") if item)
    if kind == "constant":
        return TimeCoefficient("constant", c0=float(kv.get("c", 1.0)))
    if kind == "periodic":
        return TimeCoefficient("periodic", c0=float(kv.get("c0", 1.0)),
                               eps=float(kv.get("eps", 0.0)), tau=float(kv.get("tau", 1.0)))
    raise ValueError(f"unknown coefficient spec {spec!r}")


def parse_generator(spec, coefficient):
    """Parse 'laplace:m=32' or 'diag:mu=1,2,3' into a SpectralGenerator."""
    kind, _, args = spec.partition(":")
    if kind == "laplace":
        kv = dict(item.split("=") for item in args.split(",") if item)
        return SpectralGenerator(laplacian_modes(int(kv.get("m", 32))), coefficient)
    if kind == "diag":
        mu = [float(v) for v in args.removeprefix("mu=").split(",")]
        return SpectralGenerator(np.asarray(mu), coefficient)
    raise ValueError(f"unknown generator spec {spec!r}")
