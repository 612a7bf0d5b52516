"""Discrete rough paths and controlled paths on uniform grids.

A rough path is stored as the grid path X together with the second-level
increments over *adjacent* grid intervals only.  The value over an arbitrary
pair (i, j) is reconstructed through Chen's relation

    XX_{i,j} = XX_{i,k} + XX_{k,j} + dX_{i,k} (x) dX_{k,j},

which, unrolled to adjacent blocks, becomes a prefix-sum formula:

    XX_{i,j} = (Q_j - Q_i) + (P_j - P_i) - X_i (x) (X_j - X_i),

with P_j = sum_{k<j} X_k (x) dX_k and Q_j = sum_{k<j} XX_{k,k+1}.  Chen
consistency of reconstructed values is then exact up to float roundoff.

Holder functionals are exact maxima over all grid pairs.  Very long grids
can request an optional dyadic-lags approximation via dyadic=True (sensible
beyond DYADIC_CUTOFF points): it scans only pair distances 1, 2, 4, ... and
therefore under-estimates the exact grid value; it is never used implicitly.
"""

import csv

import numpy as np

from ._kernels import (
    control_w_dp,
    path_holder_max,
    remainder_holder_max,
    second_holder_max,
)

DYADIC_CUTOFF = 8192


class AlphaNorm:
    """Weighted l2 norm |x|_alpha = (sum_k w_k^(2 alpha) x_k^2)^(1/2).

    The weights are the generator eigenvalues mu_k (positive, increasing);
    alpha is the space index of the interpolation scale.
    """

    def __init__(self, weights, alpha):
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 1 or np.any(weights <= 0):
            raise ValueError("weights must be a 1-d array of positive values")
        if np.any(np.diff(weights) < 0):
            raise ValueError("weights must be nondecreasing")
        self.weights = weights
        self.alpha = float(alpha)

    @property
    def scale(self):
        return self.weights**self.alpha

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scaled = x * self.scale
        return float(np.sqrt(np.sum(scaled * scaled, axis=-1))) if scaled.ndim == 1 \
            else np.sqrt(np.sum(scaled * scaled, axis=-1))

    def shifted(self, delta):
        """Norm on the same weight scale at index alpha + delta."""
        return AlphaNorm(self.weights, self.alpha + delta)

    def embedding_constant(self, alpha_lo, alpha_hi):
        """Constant in |x|_{alpha_lo} <= c |x|_{alpha_hi} (valid for alpha_lo <= alpha_hi)."""
        return float(np.max(self.weights ** (alpha_lo - alpha_hi)))


class GridPath:
    """A d-vector path sampled at t_i = i T / n with X_0 = 0."""

    def __init__(self, T, values):
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[0] == 1 and values.shape[1] > 1:
            values = values.T
        if values.shape[0] < 2:
            raise ValueError("a grid path needs at least two points")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid path values must be finite")
        if np.max(np.abs(values[0])) != 0.0:
            raise ValueError("grid paths start at zero")
        self.T = float(T)
        self.values = np.ascontiguousarray(values)
        self.n = values.shape[0] - 1
        self.times = np.linspace(0.0, self.T, self.n + 1)

    @property
    def d(self):
        return self.values.shape[1]

    @property
    def dt(self):
        return self.T / self.n

    def index_of(self, t):
        i = int(round(t / self.dt))
        if not (0 <= i <= self.n) or abs(self.times[i] - t) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"t={t} is not a grid point")
        return i


class RoughPath:
    """Grid path plus adjacent-interval second level, Chen-consistent."""

    def __init__(self, base, second_level, gamma):
        if not (1.0 / 3.0 < gamma <= 0.5):
            raise ValueError("gamma must lie in (1/3, 1/2]")
        second_level = np.ascontiguousarray(second_level, dtype=float)
        if second_level.shape != (base.n, base.d, base.d):
            raise ValueError("second level must have one d x d block per interval")
        self.base = base
        self.second_level = second_level
        self.gamma = float(gamma)
        self._pfx = None
        self._qfx = None

    @property
    def values(self):
        return self.base.values

    @property
    def times(self):
        return self.base.times

    @property
    def n(self):
        return self.base.n

    @property
    def d(self):
        return self.base.d

    def _prefixes(self):
        if self._pfx is None:
            x = self.base.values
            dx = np.diff(x, axis=0)
            blocks = np.einsum("ik,il->ikl", x[:-1], dx)
            pfx = np.zeros((self.n + 1, self.d, self.d))
            np.cumsum(blocks, axis=0, out=pfx[1:])
            qfx = np.zeros_like(pfx)
            np.cumsum(self.second_level, axis=0, out=qfx[1:])
            self._pfx = np.ascontiguousarray(pfx)
            self._qfx = np.ascontiguousarray(qfx)
        return self._pfx, self._qfx

    def second_level_pair(self, i, j):
        """Second level over the grid pair (i, j), via the Chen prefix formula."""
        if not (0 <= i <= j <= self.n):
            raise IndexError("pair out of range")
        if i == j:
            return np.zeros((self.d, self.d))
        pfx, qfx = self._prefixes()
        x = self.base.values
        return qfx[j] - qfx[i] + pfx[j] - pfx[i] - np.outer(x[i], x[j] - x[i])

    def restrict(self, factor):
        """Restriction of the same driver to an n/factor grid (exact blocks)."""
        if self.n % factor:
            raise ValueError("grid length not divisible by factor")
        coarse = GridPath(self.base.T, self.base.values[::factor])
        blocks = np.stack(
            [self.second_level_pair(b * factor, (b + 1) * factor) for b in range(coarse.n)]
        )
        return RoughPath(coarse, blocks, self.gamma)


def chen_defect(rp, i, k, j):
    """XX_{i,j} - XX_{i,k} - XX_{k,j} - dX_{i,k} (x) dX_{k,j}; ~0 for consistent paths."""
    if not (0 <= i <= k <= j <= rp.n):
        raise IndexError("need 0 <= i <= k <= j <= n")
    x = rp.base.values
    return (
        rp.second_level_pair(i, j)
        - rp.second_level_pair(i, k)
        - rp.second_level_pair(k, j)
        - np.outer(x[k] - x[i], x[j] - x[k])
    )


def max_chen_defect(rp, n_triples=512, seed=0):
    """Max |chen_defect| over dyadic and seeded random index triples."""
    rng = np.random.default_rng(seed)
    triples = set()
    step = rp.n
    while step >= 2:
        for i in range(0, rp.n - step + 1, step):
            triples.add((i, i + step // 2, i + step))
        step //= 2
        if len(triples) > 4 * n_triples:
            break
    while len(triples) < n_triples and rp.n >= 2:
        i, k, j = sorted(rng.integers(0, rp.n + 1, size=3))
        if i < k < j:
            triples.add((int(i), int(k), int(j)))
    return max(np.max(np.abs(chen_defect(rp, *t))) for t in triples)


def _as_weighted(values, norm):
    values = np.asarray(values, dtype=float)
    if norm is None:
        return np.ascontiguousarray(values)
    return np.ascontiguousarray(values * norm.scale)


def holder_seminorm(path, gamma, norm=None, i0=0, i1=None, dyadic=False):
    """Exact grid Holder seminorm max_{s<t} |path_t - path_s| / (t-s)^gamma.

    ``path`` is a GridPath or a (values, dt) pair with values (n+1, m) on a
    uniform grid of spacing dt.  With dyadic=True only pairs at dyadic lags
    are scanned (a documented under-approximation for very long grids).
    """
    if not (0.0 < gamma <= 1.0):
        raise ValueError("gamma must lie in (0, 1]")
    if isinstance(path, GridPath):
        values, dt = path.values, path.dt
    else:
        values, dt = path
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[0] == 1:
            values = values.T
    if values.shape[0] < 2:
        raise ValueError("empty path")
    if i1 is None:
        i1 = values.shape[0] - 1
    weighted = _as_weighted(values, norm)
    if dyadic:
        return _holder_dyadic(weighted, dt, gamma, i0, i1)
    return path_holder_max(weighted, dt, gamma, i0, i1)


def _holder_dyadic(values, dt, gamma, i0, i1):
    best = 0.0
    lag = 1
    while i0 + lag <= i1:
        diff = values[i0 + lag : i1 + 1] - values[i0 : i1 + 1 - lag]
        best = max(best, float(np.max(np.sqrt(np.sum(diff * diff, axis=-1)))) / (lag * dt) ** gamma)
        lag *= 2
    return best


def second_level_seminorm(rp, gamma2, i0=0, i1=None, dyadic=False):
    """[XX]_{gamma2} over all pairs in [i0, i1], Frobenius norm."""
    if i1 is None:
        i1 = rp.n
    pfx, qfx = rp._prefixes()
    if dyadic:
        x = rp.base.values
        best = 0.0
        lag = 1
        while i0 + lag <= i1:
            a = slice(i0, i1 + 1 - lag)
            b = slice(i0 + lag, i1 + 1)
            dx = x[b] - x[a]
            xx = (qfx[b] - qfx[a]) + (pfx[b] - pfx[a]) \
                - x[a][:, :, None] * dx[:, None, :]
            mags = np.sqrt(np.einsum("ikl,ikl->i", xx, xx))
            best = max(best, float(np.max(mags)) / (lag * rp.base.dt) ** gamma2)
            lag *= 2
        return best
    return second_holder_max(rp.base.values, pfx, qfx, rp.base.dt, gamma2, i0, i1)


def rho_gamma(rp, i0=0, i1=None, gamma=None, dyadic=False):
    """1 + [X]_gamma + [XX]_{2 gamma} over the index range [i0, i1]."""
    if i1 is None:
        i1 = rp.n
    if i0 >= i1:
        raise ValueError("need i0 < i1")
    if gamma is None:
        gamma = rp.gamma
    hx = holder_seminorm((rp.values, rp.base.dt), gamma, i0=i0, i1=i1, dyadic=dyadic)
    hxx = second_level_seminorm(rp, 2.0 * gamma, i0=i0, i1=i1, dyadic=dyadic)
    return 1.0 + hx + hxx


def control_W(rp, gamma, eta, i0=0, i1=None):
    """Optimal-partition control of the driver over [i0, i1].

    Computed exactly on the grid by dynamic programming over all grid
    partitions; superadditive as a function of the interval.
    """
    if not 0.0 <= eta < gamma:
        raise ValueError("need 0 <= eta < gamma")
    if i1 is None:
        i1 = rp.n
    if i0 >= i1:
        raise ValueError("need i0 < i1")
    pfx, qfx = rp._prefixes()
    return control_w_dp(rp.base.values, pfx, qfx, rp.base.dt, gamma, eta, i0, i1)


class ControlledPath:
    """Path values plus Gubinelli derivative, sharing the driver grid.

    values: (n+1, m) Galerkin coefficients; gubinelli: (n+1, m, d).
    The remainder R_{i,j} = dy_{i,j} - gubinelli_i . dX_{i,j} is derived.
    """

    def __init__(self, values, gubinelli, times):
        values = np.ascontiguousarray(values, dtype=float)
        gubinelli = np.ascontiguousarray(gubinelli, dtype=float)
        if values.ndim != 2 or gubinelli.ndim != 3:
            raise ValueError("values must be (n+1, m), gubinelli (n+1, m, d)")
        if values.shape[0] != gubinelli.shape[0] or values.shape[0] != len(times):
            raise ValueError("grid mismatch between values, gubinelli and times")
        self.values = values
        self.gubinelli = gubinelli
        self.times = np.ascontiguousarray(times, dtype=float)

    @property
    def n(self):
        return self.values.shape[0] - 1

    @property
    def m(self):
        return self.values.shape[1]

    @property
    def d(self):
        return self.gubinelli.shape[2]

    def remainder(self, driver_values, i, j):
        dy = self.values[j] - self.values[i]
        dx = driver_values[j] - driver_values[i]
        return dy - self.gubinelli[i] @ dx


class CrpNorm:
    """The five seminorm components of the controlled-path norm."""

    __slots__ = ("sup_path", "sup_gubinelli", "holder_gubinelli", "remainder_gamma",
                 "remainder_2gamma")

    def __init__(self, sup_path, sup_gubinelli, holder_gubinelli, remainder_gamma,
                 remainder_2gamma):
        self.sup_path = sup_path
        self.sup_gubinelli = sup_gubinelli
        self.holder_gubinelli = holder_gubinelli
        self.remainder_gamma = remainder_gamma
        self.remainder_2gamma = remainder_2gamma

    @property
    def total(self):
        return (self.sup_path + self.sup_gubinelli + self.holder_gubinelli
                + self.remainder_gamma + self.remainder_2gamma)

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__slots__} | {"total": self.total}

    def __repr__(self):
        parts = ", ".join(f"{k}={getattr(self, k):.6g}" for k in self.__slots__)
        return f"CrpNorm({parts}, total={self.total:.6g})"


def crp_norm(cp, rp, norm, gamma=None, i0=0, i1=None):
    """Controlled-path norm of (y, y') against the driver rp.

    Components, with alpha the index of ``norm``:
      sup |y|_alpha, sup |y'|_{alpha-gamma}, [y']_{gamma, alpha-2gamma},
      [R]_{gamma, alpha-gamma}, [R]_{2gamma, alpha-2gamma},
    where |y'| takes the max over driver columns of the column norm.
    """
    if gamma is None:
        gamma = rp.gamma
    if cp.n != rp.n or not np.allclose(cp.times, rp.times):
        raise ValueError("controlled path and driver must share the grid")
    if i1 is None:
        i1 = cp.n
    dt = rp.base.dt
    x = rp.base.values
    s_a = norm.scale
    s_g = norm.shifted(-gamma).scale
    s_2g = norm.shifted(-2.0 * gamma).scale

    y_a = cp.values[i0 : i1 + 1] * s_a
    sup_path = float(np.max(np.sqrt(np.sum(y_a * y_a, axis=1)))) if i1 >= i0 else 0.0

    gub = cp.gubinelli
    col_sups = []
    hold_g = 0.0
    for l in range(cp.d):
        col = np.ascontiguousarray(gub[:, :, l] * s_g)
        seg = col[i0 : i1 + 1]
        col_sups.append(np.max(np.sqrt(np.sum(seg * seg, axis=1))))
        col2 = np.ascontiguousarray(gub[:, :, l] * s_2g)
        if i1 > i0:
            hold_g = max(hold_g, path_holder_max(col2, dt, gamma, i0, i1))
    sup_gub = float(np.max(col_sups))

    if i1 > i0:
        rem_g = remainder_holder_max(
            np.ascontiguousarray(cp.values * s_g),
            np.ascontiguousarray(gub * s_g[None, :, None]),
            x, dt, gamma, i0, i1,
        )
        rem_2g = remainder_holder_max(
            np.ascontiguousarray(cp.values * s_2g),
            np.ascontiguousarray(gub * s_2g[None, :, None]),
            x, dt, 2.0 * gamma, i0, i1,
        )
    else:
        rem_g = rem_2g = 0.0
    return CrpNorm(sup_path, sup_gub, hold_g, rem_g, rem_2g)


def lift_geometric(fine, coarsen, gamma=0.4):
    """Second-order lift of a fine grid path onto a coarser grid.

    The second level over each coarse interval is the iterated integral of
    the piecewise-linear interpolant of the fine path, computed exactly:
    sum over fine steps of (X_k - X_block) (x) dx_k + dx_k (x) dx_k / 2.
    """
    if fine.n % coarsen:
        raise ValueError("fine grid length must be divisible by the coarsening factor")
    n = fine.n // coarsen
    x = fine.values
    dx = np.diff(x, axis=0).reshape(n, coarsen, fine.d)
    xl = x[:-1].reshape(n, coarsen, fine.d)
    x0 = x[::coarsen][:n]
    blocks = np.einsum("bck,bcl->bkl", xl - x0[:, None, :], dx)
    blocks += 0.5 * np.einsum("bck,bcl->bkl", dx, dx)
    coarse = GridPath(fine.T, x[::coarsen])
    return RoughPath(coarse, blocks, gamma)


def lift_ito(fine, coarsen, gamma=0.4):
    """Ito lift for Brownian drivers: geometric lift minus dt/2 on the diagonal."""
    rp = lift_geometric(fine, coarsen, gamma)
    half = 0.5 * rp.base.dt
    for k in range(rp.d):
        rp.second_level[:, k, k] -= half
    rp._pfx = rp._qfx = None
    return rp


def save_rough_csv(rp, path):
    """Columnar CSV: t, X^1..X^d, then the d*d adjacent block row-major.

    Row i carries the block for [t_i, t_{i+1}]; the final row's block is zero.
    """
    d = rp.d
    header = (["t"] + [f"X{k + 1}" for k in range(d)]
              + [f"XX{k + 1}{l + 1}" for k in range(d) for l in range(d)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(rp.n + 1):
            block = rp.second_level[i].ravel() if i < rp.n else np.zeros(d * d)
            w.writerow([repr(float(v)) for v in
                        np.concatenate(([rp.times[i]], rp.values[i], block))])


def load_rough_csv(path, gamma=0.4):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
    d = sum(1 for h in header if h.startswith("X") and not h.startswith("XX"))
    times, values = data[:, 0], data[:, 1 : 1 + d]
    blocks = data[:-1, 1 + d :].reshape(-1, d, d)
    return RoughPath(GridPath(times[-1], values), blocks, gamma)
