"""Physical constants and conversions between SI and lattice units.

Downstream of the Casimir-Polder tabulation everything is expressed in
lattice units: lengths in ``lambda_l / 2`` and energies in the recoil
energy ``E_r = hbar**2 k_l**2 / 2m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy import constants as _sc

from .errors import DomainError, UnitError

__all__ = [
    "PhysicalConstants",
    "LatticeUnits",
    "CONSTANTS",
    "RB87_MASS",
    "recoil_energy",
    "bloch_frequency",
    "convert",
]

#: Mass of 87Rb in kg (86.909180531 u).
RB87_MASS = 86.909180531 * _sc.atomic_mass


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants used by the pipeline (SI)."""

    hbar: float = _sc.hbar
    c: float = _sc.c
    k_B: float = _sc.k
    epsilon_0: float = _sc.epsilon_0
    g: float = 9.81
    bohr_radius: float = _sc.physical_constants["Bohr radius"][0]
    electronvolt: float = _sc.electron_volt
    e: float = _sc.elementary_charge

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise DomainError(f"constant {name} must be positive, got {value}")

    @property
    def h(self) -> float:
        return 2.0 * math.pi * self.hbar

    def with_overrides(self, **kw) -> "PhysicalConstants":
        return replace(self, **kw)


CONSTANTS = PhysicalConstants()


def _positive(**kw):
    for name, value in kw.items():
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"{name} must be positive and finite, got {value!r}")


def recoil_energy(lambda_l: float, mass: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """Recoil energy ``hbar**2 k_l**2 / (2 m)`` in J, with ``k_l = 2 pi / lambda_l``."""
    _positive(lambda_l=lambda_l, mass=mass)
    k_l = 2.0 * math.pi / lambda_l
    return constants.hbar**2 * k_l**2 / (2.0 * mass)


def bloch_frequency(
    lambda_l: float, mass: float, g: float, constants: PhysicalConstants = CONSTANTS
) -> float:
    """Bloch frequency ``m g (lambda_l/2) / h`` in Hz."""
    _positive(lambda_l=lambda_l, mass=mass, g=g)
    return mass * g * (lambda_l / 2.0) / constants.h


@dataclass(frozen=True)
class LatticeUnits:
    """Length and energy scales of the lattice.

    Parameters
    ----------
    lambda_l : float
        Lattice laser wavelength in m.
    atom_mass : float
        Atomic mass in kg.
    g : float
        Gravitational acceleration in m/s^2.
    """

    lambda_l: float = 532e-9
    atom_mass: float = RB87_MASS
    g: float = 9.81
    constants: PhysicalConstants = field(default=CONSTANTS, repr=False)

    def __post_init__(self):
        _positive(lambda_l=self.lambda_l, atom_mass=self.atom_mass, g=self.g)

    @property
    def length_unit(self) -> float:
        return self.lambda_l / 2.0

    @property
    def recoil_energy(self) -> float:
        return recoil_energy(self.lambda_l, self.atom_mass, self.constants)

    @property
    def bloch_frequency(self) -> float:
        return bloch_frequency(self.lambda_l, self.atom_mass, self.g, self.constants)

    @property
    def gravity_slope(self) -> float:
        """``m g a / E_r``, the Wannier-Stark step in recoil units."""
        return self.atom_mass * self.g * self.length_unit / self.recoil_energy

    @property
    def kinetic_prefactor(self) -> float:
        """Coefficient of ``-d^2/dz^2`` in lattice units (``1/pi**2``)."""
        return (self.constants.hbar**2 / (2 * self.atom_mass * self.length_unit**2)) / self.recoil_energy


DEFAULT_UNITS = LatticeUnits()

# unit name -> (dimension, SI factor or callable of LatticeUnits)
_UNITS = {
    "m": ("length", 1.0),
    "nm": ("length", 1e-9),
    "angstrom": ("length", 1e-10),
    "bohr": ("length", lambda u: u.constants.bohr_radius),
    "lattice": ("length", lambda u: u.length_unit),
    "J": ("energy", 1.0),
    "eV": ("energy", lambda u: u.constants.electronvolt),
    "meV": ("energy", lambda u: 1e-3 * u.constants.electronvolt),
    "Er": ("energy", lambda u: u.recoil_energy),
    "Hz": ("energy", lambda u: u.constants.h),
    "mHz": ("energy", lambda u: 1e-3 * u.constants.h),
    "J*m3": ("C3", 1.0),
    "a0^3*eV": ("C3", lambda u: u.constants.bohr_radius**3 * u.constants.electronvolt),
}


def _factor(unit: str, units: LatticeUnits) -> tuple[str, float]:
    try:
        dim, f = _UNITS[unit]
    except KeyError:
        raise UnitError(f"unknown unit {unit!r}; known: {sorted(_UNITS)}") from None
    return dim, (f(units) if callable(f) else f)


def convert(value, from_unit: str, to_unit: str, units: LatticeUnits = DEFAULT_UNITS):
    """Convert ``value`` between units of the same dimension.

    Energies may be given as frequencies (``"Hz"``), meaning ``h * nu``.

    Examples
    --------
    >>> round(convert(1.0, "lattice", "nm"), 6)
    266.0
    """
    d1, f1 = _factor(from_unit, units)
    d2, f2 = _factor(to_unit, units)
    if d1 != d2:
        raise UnitError(f"cannot convert {d1} ({from_unit}) to {d2} ({to_unit})")
    return value * (f1 / f2)
