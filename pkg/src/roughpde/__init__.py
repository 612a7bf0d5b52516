"""Rough-path SPDE toolbox: drivers, solver, bound certification, Lyapunov spectra."""

from ._kernels import backend_name
from .evolution_family import SpectralGenerator, TimeCoefficient, apply_U
from .gronwall import certify, compute_constants, gronwall_bound
from .lyapunov import lyapunov_spectrum, volume
from .presets import PRESETS, Problem, build, get_preset
from .rough_core import (
    AlphaNorm,
    ControlledPath,
    GridPath,
    RoughPath,
    chen_defect,
    control_W,
    crp_norm,
    holder_seminorm,
    lift_geometric,
    lift_ito,
    rho_gamma,
)
from .solver import Nonlinearity, rough_convolution, solve_mild
from .volterra_noise import parse_kernel, sample_volterra

__version__ = "0.1.0"

__all__ = [
    "AlphaNorm", "ControlledPath", "GridPath", "Nonlinearity", "PRESETS",
    "Problem", "RoughPath", "SpectralGenerator", "TimeCoefficient", "apply_U",
    "backend_name", "build", "certify", "chen_defect", "compute_constants",
    "control_W", "crp_norm", "get_preset", "gronwall_bound", "holder_seminorm",
    "lift_geometric", "lift_ito", "lyapunov_spectrum", "parse_kernel",
    "rho_gamma", "rough_convolution", "sample_volterra", "solve_mild",
    "volume", "__version__",
]
