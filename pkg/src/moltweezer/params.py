"""Physical inputs and the dimensionless parameter set used by every other module.

All internal quantities are expressed in trap units: energies in hbar*omega,
lengths in a_ho = sqrt(hbar / (mu * omega)) with mu = m / 2, times in 1/omega.
Dipolar energies are converted with an explicit 1/(4 pi eps0); the Gaussian
shorthand d^2/r^3 is never used numerically.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from . import constants as C
from .errors import ValidationError


@dataclass(frozen=True)
class MoleculeSpec:
    """A polar molecule in the rigid-rotor approximation.

    Attributes
    ----------
    name : str
    dipole_moment : float
        Body-frame permanent dipole in Debye.
    rotational_constant : float
        B/h in Hz.
    mass : float
        Molecular mass in atomic mass units.
    """

    name: str
    dipole_moment: float
    rotational_constant: float
    mass: float

    def __post_init__(self):
        for field in ("dipole_moment", "rotational_constant", "mass"):
            value = getattr(self, field)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"MoleculeSpec.{field}", f"must be > 0, got {value!r}")


@dataclass(frozen=True)
class TrapSpec:
    """Pair of identical cigar-shaped tweezers, axes along the field.

    ``omega`` is the axial angular frequency (rad/s), ``eta`` the ratio of the
    transverse to the axial frequency, ``separation`` the distance between the
    trap minima in units of a_ho and ``theta`` the trap-axis/field angle.
    """

    omega: float
    eta: float = 10.0
    separation: float = 10.4
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValidationError("TrapSpec.omega", f"must be > 0, got {self.omega!r}")
        if not (math.isfinite(self.eta) and self.eta >= 1):
            raise ValidationError("TrapSpec.eta", f"must be >= 1, got {self.eta!r}")
        if not (math.isfinite(self.separation) and self.separation >= 0):
            raise ValidationError(
                "TrapSpec.separation", f"must be >= 0, got {self.separation!r}"
            )
        if not math.isfinite(self.theta):
            raise ValidationError("TrapSpec.theta", f"must be finite, got {self.theta!r}")


@dataclass(frozen=True)
class SystemParams:
    """Dimensionless model parameters.

    Attributes
    ----------
    b : float
        B / (hbar omega).
    dip_strength : float
        D = d^2 / (4 pi eps0 a_ho^3 hbar omega).
    eta : float
    a_over_aho : float
    beta : float
        d E / B.
    aho_meters : float
    lperp_over_aho : float
        eta**-0.5.
    r_B_over_aho : float
        (d^2 / (4 pi eps0 B))**(1/3) / a_ho.
    omega : float
        Axial trap angular frequency in rad/s; converts dimensionless times.
    theta : float
    contact_strength : float
        Optional short-range contact coupling g in hbar*omega*a_ho; 0 disables it.
    """

    b: float
    dip_strength: float
    eta: float
    a_over_aho: float
    beta: float
    aho_meters: float
    lperp_over_aho: float
    r_B_over_aho: float
    omega: float
    theta: float = 0.0
    contact_strength: float = 0.0

    @property
    def transverse_dip_strength(self) -> float:
        """D_perp = D * eta**1.5, the prefactor scale of the quasi-1D potential."""
        return self.dip_strength * self.eta**1.5

    @property
    def angular_factor(self) -> float:
        return 1.0 + 3.0 * math.cos(2.0 * self.theta)

    def to_seconds(self, t):
        return t / self.omega

    def from_seconds(self, t):
        return t * self.omega

    def to_meters(self, x):
        return x * self.aho_meters

    def from_meters(self, x):
        return x / self.aho_meters

    def replace(self, **changes) -> "SystemParams":
        data = asdict(self)
        data.update(changes)
        return SystemParams(**data)


def derive_params(
    mol: MoleculeSpec, trap: TrapSpec, field_beta: float = 0.0, contact_strength: float = 0.0
) -> SystemParams:
    """Convert physical specifications to :class:`SystemParams`."""
    if not (math.isfinite(field_beta) and field_beta >= 0):
        raise ValidationError("field_beta", f"must be >= 0, got {field_beta!r}")
    mu = 0.5 * mol.mass * C.ATOMIC_MASS_UNIT
    aho = math.sqrt(C.HBAR / (mu * trap.omega))
    hbar_omega = C.HBAR * trap.omega
    B = C.PLANCK * mol.rotational_constant
    d = mol.dipole_moment * C.DEBYE
    d2 = C.COULOMB_FACTOR * d * d  # J m^3
    return SystemParams(
        b=B / hbar_omega,
        dip_strength=d2 / (aho**3 * hbar_omega),
        eta=trap.eta,
        a_over_aho=trap.separation,
        beta=field_beta,
        aho_meters=aho,
        lperp_over_aho=trap.eta**-0.5,
        r_B_over_aho=(d2 / B) ** (1.0 / 3.0) / aho,
        omega=trap.omega,
        theta=trap.theta,
        contact_strength=contact_strength,
    )


# NaCs: d and B as used for the tweezer calculations; mass = m(23Na) + m(133Cs).
PRESETS: dict[str, MoleculeSpec] = {
    "nacs": MoleculeSpec("NaCs", 4.607, 1.813e9, 22.98976928 + 132.905451961),
    "krb": MoleculeSpec("KRb", 0.574, 1.1139e9, 39.96399848 + 86.909180531),
    "rbcs": MoleculeSpec("RbCs", 1.225, 0.4903e9, 86.909180531 + 132.905451961),
}


def preset(name: str) -> MoleculeSpec:
    key = name.strip().lower()
    try:
        return PRESETS[key]
    except KeyError:
        available = ", ".join(spec.name for spec in PRESETS.values())
        raise KeyError(f"unknown molecule preset {name!r}; available: {available}") from None


def nacs_tweezers(separation: float = 10.4, eta: float = 10.0) -> TrapSpec:
    """The 2 pi * 50 kHz tweezer pair used throughout the NaCs examples."""
    return TrapSpec(omega=2 * math.pi * 50e3, eta=eta, separation=separation)
