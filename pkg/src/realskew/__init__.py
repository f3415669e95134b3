"""Realized skewness with jumps, irregular sampling and microstructure noise.

Modules
-------
simkit      jump-diffusion paths, observation times, noise
kernels     pre-averaging kernels and their integral constants
estimators  realized power variations, RDSkew, PRV, PCV
limitlaw    limit-law samplers, the Gamma matrix, the oscillating counterexample
harness     Monte Carlo experiments and checks
cli         command-line front end
"""

from .errors import (
    ConfigurationError, ConsistencyError, DegenerateDenominatorError, DomainError,
    GenerationError, KernelValidityError, RealSkewError,
)
from .estimators import EstimateSet, ObservedSeries, estimate_all, pcv, power_variation, prv, realized_skewness
from .kernels import KernelSpec, kernel_by_name, kernel_constants, min_kernel
from .simkit import ModelSpec, PathRecord, SamplingScheme, generate_times, simulate_observations, simulate_path

__version__ = "0.1.0"
