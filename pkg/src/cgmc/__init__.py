"""Coarse-grained Monte Carlo for 1D Ising-type lattice spin systems.

Implements block-spin coarse graining of two-body lattice Hamiltonians,
the 2nd-order coarse Hamiltonian (conditional expectation given cell
occupancies), 3rd-order cluster-expansion corrections, seeded Metropolis /
birth-death samplers, and exact-enumeration error estimators based on
specific relative entropy.
"""

from cgmc.errors import (
    CgmcError,
    ConfigError,
    EnumerationCapError,
    UndefinedMomentError,
    ValidationError,
)

__all__ = [
    "CgmcError",
    "ConfigError",
    "EnumerationCapError",
    "UndefinedMomentError",
    "ValidationError",
]

__version__ = "0.1.0"
