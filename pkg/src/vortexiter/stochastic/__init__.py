"""Monte Carlo estimators built on Euler-Maruyama path ensembles."""

from .estimators import (
    KernelEstimate,
    bismut_gradient,
    feynman_kac_vorticity,
    gaussian_density_evaluator,
    grid_density_evaluator,
    kernel_mc,
    write_estimates,
)
from .paths import (
    PathBundle,
    PathError,
    SdeConfig,
    cameron_martin_weight,
    integrate_Q,
    integrate_Z,
    q_bound,
    sample_backward_paths,
    sample_paths,
    z_bound,
)

__all__ = [
    "KernelEstimate",
    "PathBundle",
    "PathError",
    "SdeConfig",
    "bismut_gradient",
    "cameron_martin_weight",
    "feynman_kac_vorticity",
    "gaussian_density_evaluator",
    "grid_density_evaluator",
    "integrate_Q",
    "integrate_Z",
    "kernel_mc",
    "q_bound",
    "sample_backward_paths",
    "sample_paths",
    "write_estimates",
    "z_bound",
]
