"""uqbench: gradient-enhanced surrogate vs direct-integration UQ benchmark.

A numpy/scipy library for comparing uncertainty-quantification methods
(QMC quadrature, sparse-quadrature polynomial chaos, gradient-enhanced
polynomial chaos, gradient-enhanced RBF, and gradient-enhanced / plain
kriging) on problems whose uncertainty enters through a Karhunen-Loeve
parameterized random perturbation field.
"""

__version__ = "0.1.0"

from .lowdisc import (
    SamplePlan,
    SobolSequence,
    gaussian_plan,
    inverse_normal_cdf,
    qmc_mean,
    sobol_points,
)

from . import bench, chaos, kriging, lowdisc, models, randfield, rbf, stats

__all__ = [
    "SamplePlan",
    "SobolSequence",
    "gaussian_plan",
    "inverse_normal_cdf",
    "qmc_mean",
    "sobol_points",
    "bench",
    "chaos",
    "kriging",
    "lowdisc",
    "models",
    "randfield",
    "rbf",
    "stats",
    "__version__",
]
