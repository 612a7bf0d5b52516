"""Numpy reference implementations of the pairwise-scan kernels.

These are the fallback backend when the compiled extension is unavailable
(set ROUGHPDE_PURE=1 to force them).  Every function here mirrors one in
``_native.pyx`` exactly; the parity test suite asserts agreement.

Array conventions: ``values``/``y`` are (n, m) paths, ``yp`` is (n, m, d),
``x`` is the (n, d) driver, ``pfx``/``qfx`` are the (n, d, d) prefix arrays
from which the second level over any pair (i, j) is reconstructed as

    XX(i, j) = qfx[j] - qfx[i] + pfx[j] - pfx[i] - x[i] (x) (x[j] - x[i]).

Grids are uniform with spacing ``dt``; time differences enter only through
the pair lag, so the lag powers (L dt)^expo are tabulated once per call.
All index ranges [i0, i1] are inclusive.
"""

import numpy as np

BACKEND = "reference"


def _lag_powers(dt, expo, max_lag):
    return (dt * np.arange(1, max_lag + 1)) ** expo


def path_holder_max(values, dt, gamma, i0, i1):
    """max over i0 <= i < j <= i1 of |values_j - values_i| / ((j-i) dt)^gamma."""
    pw = _lag_powers(dt, gamma, i1 - i0)
    best = 0.0
    for i in range(i0, i1):
        diff = values[i + 1 : i1 + 1] - values[i]
        ratios = np.sqrt(np.einsum("jk,jk->j", diff, diff)) / pw[: i1 - i]
        m = ratios.max()
        if m > best:
            best = m
    return float(best)


def remainder_holder_max(y, yp, x, dt, expo, i0, i1):
    """Holder ratio of the remainder R_ij = (y_j - y_i) - yp_i . (x_j - x_i)."""
    pw = _lag_powers(dt, expo, i1 - i0)
    best = 0.0
    for i in range(i0, i1):
        dy = y[i + 1 : i1 + 1] - y[i]
        dx = x[i + 1 : i1 + 1] - x[i]
        rem = dy - dx @ yp[i].T
        ratios = np.sqrt(np.einsum("jk,jk->j", rem, rem)) / pw[: i1 - i]
        m = ratios.max()
        if m > best:
            best = m
    return float(best)


def second_holder_max(x, pfx, qfx, dt, expo, i0, i1):
    """Holder ratio (Frobenius norm) of the reconstructed second level."""
    pw = _lag_powers(dt, expo, i1 - i0)
    best = 0.0
    for i in range(i0, i1):
        sl = slice(i + 1, i1 + 1)
        dx = x[sl] - x[i]
        xx = (qfx[sl] - qfx[i]) + (pfx[sl] - pfx[i]) - x[i][None, :, None] * dx[:, None, :]
        ratios = np.sqrt(np.einsum("jkl,jkl->j", xx, xx)) / pw[: i1 - i]
        m = ratios.max()
        if m > best:
            best = m
    return float(best)


def control_w_dp(x, pfx, qfx, dt, gamma, eta, i0, i1):
    """Optimal-partition value of the two-parameter control on [i0, i1].

    Interval cost:
        c(i, j) = ((j-i) dt)^(-eta/(gamma-eta))
                  * (|dX_ij|^(1/(gamma-eta)) + |XX_ij|^(1/(2(gamma-eta))))
    DP recursion: best[j] = max_{i<j} best[i] + c(i, j).
    """
    p = 1.0 / (gamma - eta)
    q = 0.5 * p
    pw = _lag_powers(dt, -eta * p, i1 - i0)
    n1 = i1 - i0 + 1
    best = np.empty(n1)
    best[0] = 0.0
    for j in range(i0 + 1, i1 + 1):
        sl = slice(i0, j)
        dx = x[j] - x[sl]
        xn = np.sqrt(np.einsum("ik,ik->i", dx, dx))
        xx = (qfx[j] - qfx[sl]) + (pfx[j] - pfx[sl]) - x[sl][:, :, None] * dx[:, None, :]
        xxn = np.sqrt(np.einsum("ikl,ikl->i", xx, xx))
        cost = pw[: j - i0][::-1] * (xn**p + xxn**q)
        best[j - i0] = np.max(best[: j - i0] + cost)
    return float(best[n1 - 1])
