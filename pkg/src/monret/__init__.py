"""Monitored quantum return: first-detected-return statistics under random measurement times."""

from .distributions import Exponential, Fixed, Gamma, TimeDistribution, Uniform
from .errors import (ConfigError, MonretError, NumericalHealthError, ResonanceError,
                     ResonanceWarning, TruncationError, UndefinedWindingError)
from .spectral import (CanonicalSpectralModel, HamiltonianInput, RawSpectralModel, canonicalize,
                       from_hamiltonian, from_levels, spectral_decompose, two_level)

__version__ = "0.1.0"

__all__ = [
    "CanonicalSpectralModel", "ConfigError", "Exponential", "Fixed", "Gamma",
    "HamiltonianInput", "MonretError", "NumericalHealthError", "RawSpectralModel",
    "ResonanceError", "ResonanceWarning", "TimeDistribution", "TruncationError",
    "UndefinedWindingError", "Uniform", "canonicalize", "from_hamiltonian", "from_levels",
    "spectral_decompose", "two_level",
]
