"""Wavelet coefficients of Hermite-subordinated long-memory processes.

Modules: ``spectra`` (spectral densities and convolution powers), ``hermite``
(chaos expansions), ``synth`` (exact Gaussian synthesis), ``filters``
(wavelet filter banks), ``transform`` (coefficients), ``limit`` (covariance
of the limit field), ``mc`` (Monte Carlo checks) and ``cli``.
"""
from .filters import FilterBank, build_mra_bank
from .hermite import HermiteExpansion, hermite_coeffs
from .limit import LimitSpec, limit_cov, limit_cov_block
from .spectra import MemoryModel, farima, white_noise
from .synth import PathConfig, sample_path
from .transform import CoeffMatrix, coeffs_from_path, coeffs_from_stationary

__version__ = "0.1.0"

__all__ = [
    "FilterBank",
    "build_mra_bank",
    "HermiteExpansion",
    "hermite_coeffs",
    "LimitSpec",
    "limit_cov",
    "limit_cov_block",
    "MemoryModel",
    "farima",
    "white_noise",
    "PathConfig",
    "sample_path",
    "CoeffMatrix",
    "coeffs_from_path",
    "coeffs_from_stationary",
]
