"""Ground-state polarizability at imaginary frequency from a list of lines."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.constants import c as C_LIGHT, e as E_CHARGE, epsilon_0, hbar, physical_constants

from .errors import ConfigError, DomainError
from .optics import DATA_DIR

__all__ = [
    "TransitionLine",
    "AtomModel",
    "polarizability_imag",
    "polarizability_a03",
    "load_atom",
]

A0 = physical_constants["Bohr radius"][0]


@dataclass(frozen=True)
class TransitionLine:
    """Transition angular frequency (rad/s) and effective dipole (C m)."""

    omega: float
    dipole: float
    label: str = ""

    def __post_init__(self):
        if not self.omega > 0 or not self.dipole >= 0:
            raise ConfigError(f"invalid transition line {self}")


@dataclass(frozen=True)
class AtomModel:
    name: str
    mass: float
    lines: tuple[TransitionLine, ...]

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if not self.mass > 0:
            raise ConfigError("atom mass must be positive")

    def scaled(self, factor: float) -> "AtomModel":
        """Atom whose line strengths ``d**2`` are multiplied by ``factor``."""
        s = math.sqrt(factor)
        return AtomModel(self.name, self.mass, tuple(TransitionLine(l.omega, l.dipole * s, l.label) for l in self.lines))

    def merged(self, other: "AtomModel") -> "AtomModel":
        return AtomModel(self.name, self.mass, self.lines + other.lines)


def polarizability_imag(atom: AtomModel, xi):
    """SI polarizability ``alpha(i xi) = (2/hbar) sum_j w_j d_j**2 / (w_j**2 + xi**2)``.

    Parameters
    ----------
    atom : AtomModel
    xi : float or ndarray
        Imaginary frequency in rad/s, non-negative.

    Returns
    -------
    float or ndarray
        Polarizability in C m^2 / V.
    """
    if not atom.lines:
        raise ConfigError(f"atom {atom.name!r} has no transition lines")
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise DomainError("xi must be non-negative")
    xi2 = xi * xi
    a = np.zeros_like(xi)
    for l in atom.lines:
        a = a + l.omega * l.dipole**2 / (l.omega**2 + xi2)
    a = (2.0 / hbar) * a
    return a if a.ndim else float(a)


def polarizability_a03(atom: AtomModel, xi):
    """``alpha / (4 pi eps0)`` in units of the Bohr radius cubed."""
    return polarizability_imag(atom, xi) / (4 * math.pi * epsilon_0 * A0**3)


def _line(row: dict) -> TransitionLine:
    if "wavelength_nm" in row:
        omega = 2 * math.pi * C_LIGHT / (float(row["wavelength_nm"]) * 1e-9)
    elif "omega_rad_s" in row:
        omega = float(row["omega_rad_s"])
    else:
        raise ConfigError(f"line {row} needs wavelength_nm or omega_rad_s")
    if "dipole_ea0" in row:
        d = float(row["dipole_ea0"]) * E_CHARGE * A0
    elif "dipole_Cm" in row:
        d = float(row["dipole_Cm"])
    else:
        raise ConfigError(f"line {row} needs dipole_ea0 or dipole_Cm")
    return TransitionLine(omega, d, str(row.get("label", "")))


def load_atom(path_or_name="rb87") -> AtomModel:
    """Read an atomic line file with explicit unit tags on every column."""
    p = Path(path_or_name)
    if not p.exists():
        p = DATA_DIR / f"{path_or_name}.json"
    if not p.exists():
        raise ConfigError(f"atom file not found: {path_or_name}")
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        lines = tuple(_line(r) for r in d["lines"])
        atom = AtomModel(str(d["name"]), float(d["mass_kg"]), lines)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{p}: malformed atom file ({exc})") from None
    if not atom.lines:
        raise ConfigError(f"{p}: empty line list")
    return atom
