"""Smooth stationary Gaussian fields: sampling, component counts, critical points
and numerical checks of their central limit behaviour."""

__version__ = "0.1.0"

from .errors import ConfigError, FieldCLTError
from .kernels import CovarianceOracle, Functional, KernelSpec
from .domain import BoxDomain
from .sampler import FieldRealization, derive_seed, resample_cubes, sample_field
from .topology import ES, LS, count_components, count_interior

__all__ = ["BoxDomain", "ConfigError", "CovarianceOracle", "ES", "FieldCLTError", "FieldRealization",
           "Functional", "KernelSpec", "LS", "__version__", "count_components", "count_interior",
           "derive_seed", "resample_cubes", "sample_field"]
