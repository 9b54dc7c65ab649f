"""Total potential seen by the atom: surface + gravity + optical lattice.

Surface physics is evaluated in SI and converted at the boundary; the
``TotalPotential`` callable takes ``z`` in lattice units and returns E_r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .casimir import PotentialTable, extract_C3
from .errors import DomainError, MatchingError
from .units import DEFAULT_UNITS, LatticeUnits

__all__ = [
    "LennardJonesParams",
    "SurfacePotential",
    "TotalPotential",
    "optical_potential",
    "gravity_potential",
    "lj_depth_from_z0",
    "lj_potential",
    "find_matching_distance",
    "surface_potential",
    "total_potential",
    "assemble",
]

VARIANTS = ("lj+cp", "perfect", "none")


def optical_potential(z, U):
    """Lattice potential ``U (1 - cos 2 pi z) / 2`` with ``z`` in lattice units.

    Any energy unit works for ``U``; minima sit on integer ``z``.
    """
    if np.any(np.asarray(U) < 0):
        raise DomainError("U must be >= 0")
    return 0.5 * U * (1.0 - np.cos(2.0 * np.pi * np.asarray(z, float)))


def gravity_potential(z, mass: float, g: float):
    """``-m g z``: the mirror is above the atoms, so energy falls with distance."""
    return -mass * g * np.asarray(z, float)


def lj_depth_from_z0(z0: float, C3: float, p: int = 12) -> float:
    """Well depth fixed by the long-range constraint.

    For the 12-3 form, ``(4/3) D z0**3 = C3`` so ``D = 3 C3 / (4 z0**3)``.
    """
    if not z0 > 0 or not C3 > 0:
        raise DomainError("z0 and C3 must be positive")
    return C3 * (p - 3) / (p * z0**3)


@dataclass(frozen=True)
class LennardJonesParams:
    """``p-3`` Lennard-Jones parameters (SI); ``p = 12`` is the standard form."""

    z0: float
    D: float
    C3: float
    p: int = 12

    def __post_init__(self):
        if not self.z0 > 0 or not self.D > 0 or not self.C3 > 0:
            raise DomainError("z0, D and C3 must be positive")
        if self.p <= 3:
            raise DomainError("repulsive exponent must exceed 3")
        lhs = self.D * self.z0**3 * self.p / (self.p - 3)
        if abs(lhs - self.C3) > 1e-10 * self.C3:
            raise DomainError("D, z0 and C3 violate the long-range constraint")

    @classmethod
    def from_z0(cls, z0: float, C3: float, p: int = 12) -> "LennardJonesParams":
        return cls(z0, lj_depth_from_z0(z0, C3, p), C3, p)

    @classmethod
    def from_depth(cls, D: float, C3: float, p: int = 12) -> "LennardJonesParams":
        z0 = (C3 * (p - 3) / (p * D)) ** (1.0 / 3.0)
        return cls(z0, C3 * (p - 3) / (p * z0**3), C3, p)


def lj_potential(z, params: LennardJonesParams):
    """``(D/3)[(z0/z)**12 - 4 (z0/z)**3]`` for the 12-3 form (SI in, SI out)."""
    z = np.asarray(z, float)
    if np.any(z <= 0):
        raise DomainError("z must be positive")
    p = params.p
    x = params.z0 / z
    v = params.D / (p - 3) * (3.0 * x**p - p * x**3)
    return v if v.ndim else float(v)


def find_matching_distance(
    params: LennardJonesParams,
    cp_table: PotentialTable,
    z_limit: float = 50e-9,
    floor: float = 5.0,
    rep_tol: float = 1e-3,
    c3_tol: float = 1e-2,
) -> float:
    """Smallest ``z >= floor*z0`` where both branches behave as ``-C3/z**3``.

    The criteria are a negligible repulsive fraction ``(3/p)(z0/z)**(p-3)``
    and ``|z**3 V_CP + C3| / C3`` below ``c3_tol``.
    """
    lo = max(floor * params.z0, cp_table.z_range[0])
    hi = min(z_limit, cp_table.z_range[1])
    if lo >= hi:
        raise MatchingError(f"CP table does not cover [{floor:g} z0, {z_limit:g} m]")
    z = np.geomspace(lo, hi, 4001)
    rep = (3.0 / params.p) * (params.z0 / z) ** (params.p - 3)
    dev = np.abs(z**3 * cp_table(z) + params.C3) / params.C3
    ok = np.nonzero((rep < rep_tol) & (dev < c3_tol))[0]
    if len(ok) == 0:
        raise MatchingError(
            f"no matching distance below {z_limit:g} m: min |z^3 V_CP + C3|/C3 = {dev.min():.3g}; "
            "C3 of the short-range model is inconsistent with the CP table"
        )
    return float(z[ok[0]])


@dataclass(frozen=True)
class SurfacePotential:
    """Atom-surface potential in SI.

    ``variant`` is ``"lj+cp"`` (Lennard-Jones below ``z_m``, tabulated CP
    above), ``"perfect"`` (impenetrable wall at z = 0 and nothing else) or
    ``"none"`` (no surface at all).
    """

    variant: str
    lj: LennardJonesParams | None = None
    cp_table: PotentialTable | None = None
    z_m: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"surface variant must be one of {VARIANTS}")
        if self.variant == "lj+cp" and (self.lj is None or self.cp_table is None or self.z_m is None):
            raise DomainError("lj+cp variant needs lj, cp_table and z_m")

    @classmethod
    def lj_cp(cls, lj: LennardJonesParams, table: PotentialTable, z_m: float | None = None) -> "SurfacePotential":
        return cls("lj+cp", lj, table, find_matching_distance(lj, table) if z_m is None else z_m)

    def __call__(self, z):
        return surface_potential(z, self)


def surface_potential(z, sp: SurfacePotential):
    """Surface term in J at ``z`` (m)."""
    z = np.asarray(z, float)
    if sp.variant == "none":
        v = np.zeros_like(z)
    elif sp.variant == "perfect":
        v = np.where(z > 0, 0.0, np.inf)
    else:
        if np.any(z <= 0):
            raise DomainError("z must be positive for the lj+cp surface")
        v = np.empty_like(z)
        inner = z < sp.z_m
        v[inner] = lj_potential(z[inner], sp.lj)
        v[~inner] = sp.cp_table(z[~inner])
    return v if v.ndim else float(v)


@dataclass(frozen=True)
class TotalPotential:
    """``V = V_s + V_g + V_op`` in E_r as a function of ``z`` in lattice units."""

    U: float
    surface: SurfacePotential
    include_gravity: bool = True
    include_lattice: bool = True
    units: LatticeUnits = field(default=DEFAULT_UNITS)

    def __post_init__(self):
        if not self.U >= 0:
            raise DomainError("U must be >= 0")

    @property
    def F(self) -> float:
        """Gravity slope in E_r per lattice unit (0 when gravity is off)."""
        return self.units.gravity_slope if self.include_gravity else 0.0

    def surface_lat(self, z):
        """Surface term in E_r at ``z`` in lattice units."""
        a, Er = self.units.length_unit, self.units.recoil_energy
        return surface_potential(np.asarray(z, float) * a, self.surface) / Er

    def __call__(self, z):
        return total_potential(z, self)

    @property
    def depth(self) -> float:
        """Depth of the short-range well in E_r (0 without one)."""
        if self.surface.variant != "lj+cp":
            return 0.0
        return self.surface.lj.D / self.units.recoil_energy

    def with_surface(self, surface: SurfacePotential) -> "TotalPotential":
        return replace(self, surface=surface)

    def describe(self) -> dict:
        s = self.surface
        d = {
            "U": repr(self.U),
            "variant": s.variant,
            "gravity": self.include_gravity,
            "lattice": self.include_lattice,
            "lambda_l": repr(self.units.lambda_l),
            "mass": repr(self.units.atom_mass),
            "g": repr(self.units.g),
        }
        if s.variant == "lj+cp":
            d.update(
                z0=repr(s.lj.z0), D=repr(s.lj.D), C3=repr(s.lj.C3), p=s.lj.p, z_m=repr(s.z_m),
                cp_table=s.cp_table.fingerprint, cp_scale=repr(s.cp_table.metadata.get("scale", 1.0)),
            )
        return d


def total_potential(z, tp: TotalPotential):
    """Sum of the enabled terms, in E_r, at ``z`` in lattice units."""
    z = np.asarray(z, float)
    v = np.zeros_like(z)
    if tp.include_lattice:
        v = v + optical_potential(z, tp.U)
    if tp.include_gravity:
        v = v - tp.units.gravity_slope * z
    if tp.surface.variant != "none":
        v = v + tp.surface_lat(z)
    return v if v.ndim else float(v)


def assemble(
    table: PotentialTable | None,
    U: float = 3.0,
    z0: float = 2.3e-10,
    C3: float | None = None,
    variant: str = "lj+cp",
    units: LatticeUnits = DEFAULT_UNITS,
    z_m: float | None = None,
    D: float | None = None,
    include_gravity: bool = True,
    include_lattice: bool = True,
) -> TotalPotential:
    """Build a ``TotalPotential`` from a CP table and short-range parameters.

    ``C3`` defaults to the value extracted from ``table`` so both branches
    share the same van der Waals tail.  Passing ``D`` fixes the depth and
    moves ``z0`` to keep the constraint.
    """
    if variant != "lj+cp":
        return TotalPotential(U, SurfacePotential(variant), include_gravity, include_lattice, units)
    if table is None:
        raise DomainError("lj+cp variant needs a CP table")
    C3 = extract_C3(table).C3 if C3 is None else C3
    lj = LennardJonesParams.from_depth(D, C3) if D is not None else LennardJonesParams.from_z0(z0, C3)
    return TotalPotential(U, SurfacePotential.lj_cp(lj, table, z_m), include_gravity, include_lattice, units)
