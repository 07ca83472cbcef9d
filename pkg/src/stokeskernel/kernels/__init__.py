"""Kernels of the half-space Stokes problem: E, Γ, R_i, B_in, κ, L_ij, K_ij, A and π_j."""

from .fundamental import (REGIONS, a_factor, heat_kernel, heat_kernel_derivative, heat_time_integral,
                          heat_time_tail, hilbert_of_indicator, laplace_derivative, laplace_fundamental,
                          laplace_fundamental_gradient, laplace_hessian, normal_heat_derivative,
                          region_bound)
from .poisson import (kernel_K, kernel_L, kernel_pressure, pressure_A_dt, pressure_harmonic_A,
                      smoothed_E_std)
from .riesz import (METHODS, composite_kappa_halfspace, kernel_B, riesz_gauss_convolution,
                    riesz_method_check, riesz_poisson_convolution, riesz_regions_std)

__all__ = [
    "REGIONS", "METHODS", "a_factor", "heat_kernel", "heat_kernel_derivative", "heat_time_integral",
    "heat_time_tail", "hilbert_of_indicator", "laplace_derivative", "laplace_fundamental",
    "laplace_fundamental_gradient", "laplace_hessian", "normal_heat_derivative", "region_bound",
    "kernel_K", "kernel_L", "kernel_pressure", "pressure_A_dt", "pressure_harmonic_A", "smoothed_E_std",
    "composite_kappa_halfspace", "kernel_B", "riesz_gauss_convolution", "riesz_method_check",
    "riesz_poisson_convolution", "riesz_regions_std",
]
