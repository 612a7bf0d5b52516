"""Named problem presets tying noise, generator and nonlinearity together.

Every preset referenced by the acceptance suite ships both here and as a
JSON config under configs/.  A Problem is a plain value object; build()
instantiates the generator/nonlinearity and a seeded driver rough path.
"""

from dataclasses import dataclass, replace

import numpy as np

from .evolution_family import SpectralGenerator, parse_coefficient, parse_generator
from .rough_core import AlphaNorm, GridPath, lift_geometric, lift_ito
from .solver import Nonlinearity
from .volterra_noise import parse_kernel, sample_volterra


@dataclass(frozen=True)
class Problem:
    name: str
    mu: tuple = ()
    generator: str = ""             # alternative to mu: "laplace:m=32" / "diag:mu=1,2"
    coefficient: str = "constant:c=1"
    kernel: str = "fbm:H=0.5"
    driver: str = "kernel"          # "kernel" | "sin"
    lift: str = "geometric"         # "geometric" | "ito"
    d: int = 1
    drift: str = "zero"
    c: float = 0.0
    diffusion: str = "additive"
    g_amp: float = 0.05
    g_pattern: str = "e1"           # "e1" | "rows" (first p rows, all columns)
    p: int = 1
    delta: float = 0.1
    sigma: float = 0.05
    gamma: float = 0.4
    alpha: float = 0.0
    T: float = 1.0
    n: int = 512
    oversample: int = 16
    u0_scale: float = 0.0

    def with_(self, **kw):
        return replace(self, **kw)

    def modes(self):
        if self.mu:
            return np.asarray(self.mu, float)
        if self.generator:
            coeff = parse_coefficient(self.coefficient)
            return parse_generator(self.generator, coeff).mu
        raise ValueError("problem needs either mu or a generator spec string")

    @property
    def m(self):
        return len(self.modes())


def amplitude_matrix(problem):
    g = np.zeros((problem.m, problem.d))
    if problem.g_pattern == "e1":
        g[0, 0] = problem.g_amp
    elif problem.g_pattern == "rows":
        g[: problem.p] = problem.g_amp
    else:
        raise ValueError(f"unknown g pattern {problem.g_pattern!r}")
    return g


def build_operators(problem):
    """Generator, nonlinearity (with declared constants) and the state norm."""
    gen = SpectralGenerator(problem.modes(), parse_coefficient(problem.coefficient))
    norm = AlphaNorm(gen.mu, problem.alpha)
    nl = Nonlinearity(problem.m, problem.d, drift=problem.drift, c=problem.c,
                      diffusion=problem.diffusion, g=amplitude_matrix(problem),
                      p=problem.p, delta=problem.delta, sigma=problem.sigma)
    nl.declare_constants(norm)
    return gen, nl, norm


def build_driver(problem, seed):
    """Seeded driver rough path on the solver grid (16x-oversampled lift)."""
    nf = problem.n * problem.oversample
    if problem.driver == "sin":
        tf = np.linspace(0.0, problem.T, nf + 1)
        fine = GridPath(problem.T, np.sin(tf)[:, None])
    elif problem.driver == "kernel":
        sample = sample_volterra(parse_kernel(problem.kernel), nf, problem.T,
                                 seed, problem.d)
        fine = sample.path
    else:
        raise ValueError(f"unknown driver kind {problem.driver!r}")
    lift = lift_ito if problem.lift == "ito" else lift_geometric
    return lift(fine, problem.oversample, gamma=problem.gamma)


def build(problem, seed):
    gen, nl, norm = build_operators(problem)
    rp = build_driver(problem, seed)
    u0 = np.full(problem.m, problem.u0_scale, dtype=float)
    return gen, nl, rp, u0, norm


PRESETS = {
    # Additive Brownian noise on a two-mode generator; the solver oracle and
    # bound-certification workhorse.
    "ou-additive": Problem(
        name="ou-additive", mu=(1.0, 2.0), kernel="fbm:H=0.5", lift="ito",
        diffusion="additive", g_amp=0.05, g_pattern="e1",
        delta=0.1, sigma=0.05, gamma=0.4, alpha=0.0, T=1.0, n=512),
    # Deterministic smooth driver against Riemann-Stieltjes quadrature.
    "smooth-driver": Problem(
        name="smooth-driver", mu=(1.0,), driver="sin", lift="geometric",
        diffusion="additive", g_amp=1.0, g_pattern="e1",
        delta=0.1, sigma=0.05, gamma=0.4, alpha=0.0, T=1.0, n=2048),
    # Bounded tanh diffusion driven by an OU Volterra path.
    "tanh-ou": Problem(
        name="tanh-ou", mu=(1.0, 4.0, 9.0, 16.0), kernel="ou:a=-1.0",
        lift="geometric", diffusion="tanh", g_amp=0.02, g_pattern="rows", p=2,
        delta=0.1, sigma=0.05, gamma=0.4, alpha=0.0, T=1.0, n=512,
        u0_scale=0.1),
    # Diagonal deterministic tangent flow; spectrum (-1, -2, -3).
    "diag": Problem(
        name="diag", mu=(1.0, 2.0, 3.0), kernel="fbm:H=0.5", lift="ito",
        diffusion="additive", g_amp=0.05, g_pattern="e1",
        delta=0.1, sigma=0.05, gamma=0.4, alpha=0.0, T=100.0, n=6400),
    # Periodic coefficient; spectrum -mu_k * time-mean(xi) = -mu_k.
    "periodic": Problem(
        name="periodic", mu=(1.0, 2.0, 3.0),
        coefficient="periodic:c0=1,eps=0.5,tau=1", kernel="fbm:H=0.5",
        lift="ito", diffusion="additive", g_amp=0.05, g_pattern="e1",
        delta=0.1, sigma=0.05, gamma=0.4, alpha=0.0, T=100.0, n=6400),
    # Linear drift shift; spectrum c - mu_k.
    "linear-shift": Problem(
        name="linear-shift", mu=(1.0, 2.0, 3.0), kernel="fbm:H=0.5",
        lift="ito", drift="linear", c=0.5, diffusion="additive", g_amp=0.05,
        g_pattern="e1", delta=0.1, sigma=0.05, gamma=0.4, alpha=0.0,
        T=100.0, n=12800),
    # tanh diffusion for the norm-independence study (k tangents, two alphas).
    "tanh-norm": Problem(
        name="tanh-norm", mu=(1.0, 2.0, 3.0, 4.0), kernel="ou:a=-1.0",
        lift="geometric", diffusion="tanh", g_amp=0.02, g_pattern="rows", p=2,
        delta=0.1, sigma=0.05, gamma=0.4, alpha=0.0, T=200.0, n=12800,
        u0_scale=0.1),
    # Contractive configuration (c < mu_1) for the decay-rate check.
    "contractive": Problem(
        name="contractive", mu=(1.0, 2.0, 3.0), kernel="ou:a=-1.0",
        lift="geometric", drift="linear", c=0.5, diffusion="tanh",
        g_amp=0.02, g_pattern="rows", p=2, delta=0.1, sigma=0.05, gamma=0.4,
        alpha=0.0, T=100.0, n=12800, u0_scale=0.1),
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
