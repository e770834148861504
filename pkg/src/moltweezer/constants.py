"""CODATA-2018 constants (SI) shared by the parameter conversions and the tests."""

HBAR = 1.054571817e-34  # J s
PLANCK = 6.62607015e-34  # J s
EPSILON_0 = 8.8541878128e-12  # F / m
BOHR_RADIUS = 5.29177210903e-11  # m
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg
SPEED_OF_LIGHT = 299792458.0  # m / s
DEBYE = 1e-21 / SPEED_OF_LIGHT  # C m

COULOMB_FACTOR = 1.0 / (4.0 * 3.141592653589793 * EPSILON_0)  # 1 / (4 pi eps0)

__all__ = [
    "HBAR",
    "PLANCK",
    "EPSILON_0",
    "BOHR_RADIUS",
    "ATOMIC_MASS_UNIT",
    "SPEED_OF_LIGHT",
    "DEBYE",
    "COULOMB_FACTOR",
]
