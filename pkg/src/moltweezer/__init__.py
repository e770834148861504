"""Two polar molecules in a pair of optical tweezers.

Rotor algebra, quasi-1D dipolar matrix elements, Hamiltonian assembly and
spectra, interaction-picture dynamics and controlled-phase gate search.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DimensionError,
    EigensolverError,
    EmptyBasisError,
    MolTweezerError,
    NumericalError,
    PropagationError,
    QuadratureError,
    ValidationError,
)
from .params import MoleculeSpec, SystemParams, TrapSpec, derive_params, nacs_tweezers, preset  # noqa: E402

__all__ = [
    "__version__",
    "DimensionError",
    "EigensolverError",
    "EmptyBasisError",
    "MolTweezerError",
    "NumericalError",
    "PropagationError",
    "QuadratureError",
    "ValidationError",
    "MoleculeSpec",
    "SystemParams",
    "TrapSpec",
    "derive_params",
    "nacs_tweezers",
    "preset",
]
