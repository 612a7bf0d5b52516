"""Compiled and reference kernel backends must agree on identical inputs."""

import numpy as np
import pytest

from roughpde._kernels import get_backend

native = get_backend("native")
reference = get_backend("reference")


def make_arrays(n, d, m, seed):
    rng = np.random.default_rng(seed)
    dt = 1.0 / n
    x = np.vstack([np.zeros((1, d)),
                   np.cumsum(rng.standard_normal((n, d)) * np.sqrt(dt), axis=0)])
    dx = np.diff(x, axis=0)
    pfx = np.zeros((n + 1, d, d))
    np.cumsum(np.einsum("ik,il->ikl", x[:-1], dx), axis=0, out=pfx[1:])
    qfx = np.zeros((n + 1, d, d))
    np.cumsum(0.5 * np.einsum("ik,il->ikl", dx, dx), axis=0, out=qfx[1:])
    y = np.cumsum(rng.standard_normal((n + 1, m)), axis=0) * np.sqrt(dt)
    yp = rng.standard_normal((n + 1, m, d))
    return dict(x=np.ascontiguousarray(x), pfx=pfx, qfx=qfx, dt=dt,
                y=np.ascontiguousarray(y), yp=np.ascontiguousarray(yp))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("i0,i1", [(0, 64), (7, 50), (30, 33)])
def test_backends_agree(seed, i0, i1):
    a = make_arrays(64, 2, 3, seed)
    for args in (
        ("path_holder_max", (a["y"], a["dt"], 0.4, i0, i1)),
        ("remainder_holder_max", (a["y"], a["yp"], a["x"], a["dt"], 0.8, i0, i1)),
        ("second_holder_max", (a["x"], a["pfx"], a["qfx"], a["dt"], 0.8, i0, i1)),
        ("control_w_dp", (a["x"], a["pfx"], a["qfx"], a["dt"], 0.4, 0.1, i0, i1)),
    ):
        name, call = args
        v_nat = getattr(native, name)(*call)
        v_ref = getattr(reference, name)(*call)
        assert v_nat == pytest.approx(v_ref, rel=1e-13, abs=1e-300), name


def test_backend_selected():
    from roughpde._kernels import backend_name

    assert backend_name() in ("native", "reference")
