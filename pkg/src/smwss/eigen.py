"""Bound states of the 1D Schrödinger equation on a graded mesh.

In lattice units the Hamiltonian is ``-(1/pi**2) d^2/dz^2 + V(z)`` with V
in E_r.  The non-uniform three-point stencil

    -(c/w_i) [(psi_{i+1} - psi_i)/h_i - (psi_i - psi_{i-1})/h_{i-1}] + V_i psi_i

with ``w_i = (h_{i-1} + h_i)/2`` is symmetric in the ``w``-weighted inner
product; scaling by ``sqrt(w)`` makes it a symmetric tridiagonal matrix,
whose eigenpairs inside an energy window come from LAPACK bisection plus
inverse iteration.  The matrix norm near the wall is ~1e13 E_r, so the
LAPACK vectors get one more shifted solve and a Rayleigh-Ritz step in the
positive-definite difference form; that keeps energies, vectors and their
Rayleigh quotients mutually consistent.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal
from scipy.linalg.lapack import dgtsv

from .errors import AccuracyError, DomainError, ResourceError
from .potential import TotalPotential

__all__ = [
    "Mesh",
    "EigenState",
    "SpectrumResult",
    "build_mesh",
    "uniform_mesh",
    "solve",
    "mean_distance",
    "rayleigh_quotient",
    "classify",
    "surface_region",
    "MAX_NODES",
    "SolverSettings",
]

MAX_NODES = 10_000_000
KINETIC = 1.0 / math.pi**2

LABELS = ("surface-bound", "smwss", "edge-artifact", "untrapped")


@dataclass(frozen=True)
class Mesh:
    """Strictly increasing nodes in lattice units, Dirichlet at both ends."""

    nodes: np.ndarray
    policy: dict = field(default_factory=dict)

    def __post_init__(self):
        z = np.asarray(self.nodes, float)
        if z.ndim != 1 or len(z) < 3 or np.any(np.diff(z) <= 0):
            raise DomainError("mesh nodes must be a strictly increasing array of length >= 3")
        object.__setattr__(self, "nodes", z)

    @property
    def z_min(self) -> float:
        return float(self.nodes[0])

    @property
    def z_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights on all nodes (the end weights multiply zeros)."""
        h = self.h
        w = np.zeros_like(self.nodes)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w

    def fingerprint(self) -> str:
        return hashlib.sha256(self.nodes.tobytes()).hexdigest()


def uniform_mesh(z_min: float, z_max: float, points_per_unit: int) -> Mesh:
    n = int(math.ceil((z_max - z_min) * points_per_unit))
    if n + 1 > MAX_NODES:
        raise ResourceError(f"{n + 1} nodes exceed the limit of {MAX_NODES}")
    return Mesh(np.linspace(z_min, z_max, n + 1), {"kind": "uniform", "points_per_unit": points_per_unit})


def build_mesh(
    tp: TotalPotential,
    z_max: float = 25.0,
    density: float = 6000.0,
    lattice_points: int = 1000,
    z_min: float | None = None,
    energy_floor: float | None = None,
) -> Mesh:
    """Mesh adapted to the local de Broglie wavelength.

    The target spacing is ``h(z) = min(1/lattice_points, 2 pi/(density k(z)))``
    with ``k(z) = pi sqrt(min(|V|, 4 D) + E_floor)``, so the deep well gets
    ``density`` points per local wavelength and the lattice region a uniform
    ``lattice_points`` per period.  Nodes are placed by inverting the
    cumulative integral of ``1/h``.

    Parameters
    ----------
    tp : TotalPotential
    z_max : float
        Far end in lattice units (>= 20).
    density : float
        Points per local wavelength in the surface well (>= 12).
    lattice_points : int
        Points per lattice period far from the surface (>= 40).
    z_min : float, optional
        Near end.  Defaults to 0 for the perfect surface, to the point where
        the repulsive wall reaches ~2000 D for the Lennard-Jones surface.
    energy_floor : float, optional
        Kinetic-energy floor in E_r; defaults to ``U + 5``.
    """
    if z_max < 20:
        raise DomainError("z_max must be >= 20 lattice units")
    if density < 12 or lattice_points < 40:
        raise DomainError("density must be >= 12 and lattice_points >= 40")
    variant = tp.surface.variant
    if variant != "lj+cp":
        lo = 0.0 if z_min is None else z_min
        m = uniform_mesh(lo, z_max, lattice_points)
        return replace(m, policy={**m.policy, "variant": variant})

    a = tp.units.length_unit
    lj = tp.surface.lj
    z0 = lj.z0 / a
    if z_min is None:
        z_min = z0 * 6000.0 ** (-1.0 / lj.p)
    D = tp.depth
    floor = tp.U + 5.0 if energy_floor is None else energy_floor
    split = min(2.0, z_max / 2)
    aux = np.concatenate([
        np.geomspace(z_min, split, 200_001),
        np.linspace(split, z_max, int((z_max - split) * 4 * lattice_points) + 1)[1:],
    ])
    V = tp(aux)
    k = math.pi * np.sqrt(np.minimum(np.abs(V), 4.0 * D) + floor)
    h = np.minimum(1.0 / lattice_points, 2.0 * math.pi / (density * k))
    inv = 1.0 / h
    cum = np.concatenate([[0.0], np.cumsum(np.diff(aux) * 0.5 * (inv[1:] + inv[:-1]))])
    n = int(math.ceil(cum[-1]))
    if n + 1 > MAX_NODES:
        raise ResourceError(f"mesh would need {n + 1} nodes (limit {MAX_NODES}); lower the density")
    nodes = np.interp(np.linspace(0.0, cum[-1], n + 1), cum, aux)
    nodes[0], nodes[-1] = z_min, z_max
    policy = {
        "kind": "graded",
        "variant": variant,
        "density": density,
        "lattice_points": lattice_points,
        "energy_floor": floor,
        "h_min": float(np.min(np.diff(nodes))),
    }
    return Mesh(nodes, policy)


@dataclass
class EigenState:
    """Eigenpair with ``psi`` on all mesh nodes (zero at the ends)."""

    energy: float
    psi: np.ndarray
    mean_z: float
    label: str = "smwss"
    n: int | None = None
    v: int | None = None
    surface_fraction: float = 0.0
    edge_fraction: float = 0.0

    @property
    def reported(self) -> bool:
        return self.label in ("surface-bound", "smwss")


@dataclass
class SpectrumResult:
    states: list[EigenState]
    mesh: Mesh
    potential: TotalPotential
    window: tuple[float, float]
    fingerprint: str = ""

    @property
    def reported(self) -> list[EigenState]:
        return [s for s in self.states if s.reported]

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.reported])

    @property
    def mean_z(self) -> np.ndarray:
        return np.array([s.mean_z for s in self.reported])

    @property
    def intervals(self) -> np.ndarray:
        """``E_n - E_{n-1}`` over reported states in ``<z>`` order (first entry NaN)."""
        e = self.energies
        return np.concatenate([[np.nan], np.diff(e)]) if len(e) else e

    def bound(self) -> list[EigenState]:
        return [s for s in self.states if s.label == "surface-bound"]

    def smwss(self) -> list[EigenState]:
        return [s for s in self.states if s.label == "smwss"]

    def psi_matrix(self, states=None) -> np.ndarray:
        states = self.reported if states is None else states
        return np.array([s.psi for s in states])


def mean_distance(state: EigenState, mesh: Mesh) -> float:
    """``<psi|z|psi>/<psi|psi>`` by trapezoid quadrature on the mesh."""
    w = mesh.weights * state.psi**2
    return float(np.dot(w, mesh.nodes) / np.sum(w))


def _hamiltonian(tp: TotalPotential, mesh: Mesh):
    z = mesh.nodes
    h = np.diff(z)
    w = 0.5 * (h[:-1] + h[1:])
    V = np.asarray(tp(z[1:-1]), float)
    if not np.all(np.isfinite(V)):
        raise DomainError("potential is not finite on the interior mesh")
    s = 1.0 / np.sqrt(w)
    d = KINETIC * (1.0 / h[:-1] + 1.0 / h[1:]) * s * s + V
    e = -KINETIC / h[1:-1] * s[:-1] * s[1:]
    return d, e, s, V


def rayleigh_quotient(psi: np.ndarray, V_interior: np.ndarray, mesh: Mesh) -> float:
    """Energy of ``psi`` in the positive-definite difference form, summed exactly."""
    h = mesh.h
    w = mesh.weights
    kin = KINETIC * np.diff(psi) ** 2 / h
    pot = (w * psi**2)[1:-1] * V_interior
    num = math.fsum(kin) + math.fsum(pot)
    return num / math.fsum(w * psi**2)


def _refine(d, e, s, V, mesh: Mesh, E, phi):
    """One shifted tridiagonal solve per vector, then Rayleigh-Ritz on the window.

    Returns Ritz values and vectors on all nodes (zero ends).
    """
    if len(E) == 0:
        return E, np.zeros((mesh.size, 0))
    X = np.empty_like(phi)
    for j in range(len(E)):
        *_, x, info = dgtsv(e, d - E[j], e, phi[:, j])
        X[:, j] = x / np.linalg.norm(x) if info == 0 and np.all(np.isfinite(x)) else phi[:, j]
    P = np.zeros((mesh.size, len(E)))
    P[1:-1] = X * s[:, None]
    w = mesh.weights
    grad = np.diff(P, axis=0) * np.sqrt(KINETIC / mesh.h)[:, None]
    A = grad.T @ grad + (P[1:-1] * (V * w[1:-1])[:, None]).T @ P[1:-1]
    B = (P * w[:, None]).T @ P
    try:
        theta, W = eigh(0.5 * (A + A.T), 0.5 * (B + B.T))
    except np.linalg.LinAlgError as exc:
        raise AccuracyError(f"Rayleigh-Ritz step failed: {exc}") from None
    return theta, P @ W


def solve(tp: TotalPotential, mesh: Mesh, energy_window=(-5.0, 5.0), tol: float = 1e-14) -> SpectrumResult:
    """All eigenpairs with energies in ``energy_window`` (E_r), classified.

    ``tp`` is normally a :class:`TotalPotential`; any callable mapping
    lattice-unit ``z`` to E_r is accepted and then left unclassified.

    States are returned sorted by ``<z>`` (ties by energy), each with
    ``psi`` normalized to 1 under trapezoid quadrature and a deterministic
    sign (largest lobe positive).
    """
    lo, hi = map(float, energy_window)
    if not hi > lo:
        raise DomainError("energy window must be non-empty")
    d, e, s, V = _hamiltonian(tp, mesh)
    try:
        E, phi = eigh_tridiagonal(d, e, select="v", select_range=(lo, hi), tol=tol)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise AccuracyError(f"tridiagonal eigensolver failed: {exc}") from None
    E, P = _refine(d, e, s, V, mesh, E, phi)
    states = []
    z = mesh.nodes
    w = mesh.weights
    for j in range(len(E)):
        psi = P[:, j]
        norm = math.sqrt(math.fsum(w * psi**2))
        psi = psi / norm
        if psi[np.argmax(np.abs(psi))] < 0:
            psi = -psi
        states.append(EigenState(float(E[j]), psi, float(np.dot(w * psi**2, z))))
    states.sort(key=lambda st: (round(st.mean_z, 12), st.energy))
    desc = tp.describe() if isinstance(tp, TotalPotential) else repr(tp)
    fp = hashlib.sha256(json.dumps([desc, mesh.fingerprint(), [lo, hi], tol], sort_keys=True).encode()).hexdigest()
    res = SpectrumResult(states, mesh, tp, (lo, hi), fp)
    return classify(res) if isinstance(tp, TotalPotential) else res


def surface_region(tp: TotalPotential, ratio: float = 0.1) -> float:
    """Edge of the surface region in lattice units.

    The first lattice maximum ``k + 1/2`` where the surface term has fallen
    below ``ratio * U``; 0 when there is no attractive surface.
    """
    if tp.surface.variant != "lj+cp":
        return 0.0
    thresh = ratio * max(tp.U, 1e-300)
    lo, hi = tp.surface.cp_table.z_range
    k = 0
    while True:
        zk = k + 0.5
        if zk * tp.units.length_unit > hi or abs(tp.surface_lat(zk)) < thresh:
            return zk
        k += 1


def classify(result: SpectrumResult, surface_ratio: float = 0.1, edge_width: float = 2.0,
             edge_tol: float = 0.01) -> SpectrumResult:
    """Label each state and number the reported ones.

    Labels, in order of precedence:

    * ``edge-artifact``: more than ``edge_tol`` of the probability within
      ``edge_width`` of an artificial boundary (the far end, and the near
      end too when there is no surface).
    * ``untrapped``: ``E + F <z> > U``, i.e. above the lattice barrier at
      its own site (first excited band and the continuum).
    * ``surface-bound``: more than half of the probability inside the
      surface region (see :func:`surface_region`).
    * ``smwss``: everything else.

    Reported states (bound and smwss) get ``n = 1, 2, ...`` in ``<z>``
    order; bound states also get ``v = -1, -2, ...`` counted downward
    from the least bound.
    """
    tp = result.potential
    mesh = result.mesh
    z, w = mesh.nodes, mesh.weights
    zs = surface_region(tp, surface_ratio)
    far = z > mesh.z_max - edge_width
    near = z < mesh.z_min + edge_width if tp.surface.variant == "none" else np.zeros_like(far)
    inner = z < zs
    for st in result.states:
        p = w * st.psi**2
        st.edge_fraction = float(p[far | near].sum())
        st.surface_fraction = float(p[inner].sum())
        st.n = st.v = None
        if st.edge_fraction > edge_tol:
            st.label = "edge-artifact"
        elif tp.include_lattice and st.energy + tp.F * st.mean_z > tp.U:
            st.label = "untrapped"
        elif zs > 0 and st.surface_fraction > 0.5:
            st.label = "surface-bound"
        else:
            st.label = "smwss"
    rep = [s for s in result.states if s.reported]
    for i, st in enumerate(rep, 1):
        st.n = i
    bound = sorted((s for s in rep if s.label == "surface-bound"), key=lambda s: -s.energy)
    for i, st in enumerate(bound, 1):
        st.v = -i
    return result


@dataclass(frozen=True)
class SolverSettings:
    """Mesh and window choices bundled for repeated solves."""

    window: tuple[float, float] = (-5.0, 5.0)
    density: float = 6000.0
    lattice_points: int = 1000
    z_max: float = 25.0

    def mesh(self, tp: TotalPotential) -> Mesh:
        return build_mesh(tp, self.z_max, self.density, self.lattice_points)

    def run(self, tp: TotalPotential, mesh: Mesh | None = None) -> SpectrumResult:
        return solve(tp, self.mesh(tp) if mesh is None else mesh, self.window)

    def refined(self, factor: float = 2.0) -> "SolverSettings":
        return replace(self, density=self.density * factor, lattice_points=int(self.lattice_points * factor))
