"""Poisson kernels of the nonstationary Stokes system in the half-space.

Subpackages and modules:

- ``kernels``: fundamental solutions, Gaussian-Riesz convolutions, L_ij, K_ij, pressure kernels
- ``quadrature``: graded and composite rules, space-time convolution helpers
- ``representation``: velocity, pressure, layer potentials and the tangential operator
- ``moduli``: moduli of continuity with Dini and logDini functionals
- ``experiments``: reproducible experiment runners and their outputs
"""

from .config import ConfigError, HalfSpacePoint, KernelConfig, KernelValueWithDelta, load_config, parse_config_text

__version__ = "0.1.0"

__all__ = ["ConfigError", "HalfSpacePoint", "KernelConfig", "KernelValueWithDelta", "load_config",
           "parse_config_text", "__version__"]
