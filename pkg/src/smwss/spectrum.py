"""Raman matrix elements, stick spectra and parameter scans.

Scans re-solve the eigenproblem for a sequence of short-range parameters,
follow state identities by wavefunction overlap and flag avoided crossings.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .errors import DomainError, TrackingWarning
from .eigen import EigenState, Mesh, SolverSettings, SpectrumResult
from .potential import LennardJonesParams, SurfacePotential, TotalPotential, find_matching_distance

__all__ = [
    "RamanConfig",
    "SpectrumLine",
    "ScanStep",
    "Crossing",
    "ScanResult",
    "C3ScanResult",
    "raman_amplitude",
    "raman_matrix",
    "stick_spectrum",
    "with_short_range",
    "scan_z0",
    "scan_c3",
    "infer_c3_uncertainty",
    "z0_slopes",
    "track_states",
    "find_crossings",
    "resolve_crossing",
    "DEFAULT_TRANSITIONS",
]

#: (n, m) pairs with n = 6..11 and |n - m| in {1, 3, 5}, the far state outside.
DEFAULT_TRANSITIONS = tuple((n, n + d) for n in range(6, 12) for d in (1, 3, 5))


@dataclass(frozen=True)
class RamanConfig:
    """Effective Raman wave vector (1/m) and the intensity floor of a stick spectrum."""

    k_eff: float = 4.0 * math.pi / 780e-9
    intensity_floor: float = 1e-6
    include_bound: bool = False

    def __post_init__(self):
        if not self.k_eff > 0:
            raise DomainError("k_eff must be positive")


@dataclass(frozen=True)
class SpectrumLine:
    """Transition ``n -> m``; the offset is ``(E_n - E_m)/h`` from the hyperfine frequency."""

    n: int
    m: int
    frequency_offset: float  # Hz
    intensity: float


def _check_same_mesh(psis, mesh: Mesh):
    for p in psis:
        if np.shape(p) != (mesh.size,):
            raise DomainError(f"state has {np.shape(p)} samples, mesh has {mesh.size}")


def raman_amplitude(state_n: EigenState, state_m: EigenState, mesh: Mesh, k_eff: float,
                    length_unit: float = 266e-9) -> complex:
    """``<psi_n| exp(i k_eff z) |psi_m>`` by trapezoid quadrature.

    ``k_eff`` is in 1/m; ``length_unit`` converts the mesh (lattice units) to m.
    """
    _check_same_mesh([state_n.psi, state_m.psi], mesh)
    phase = np.exp(1j * k_eff * length_unit * mesh.nodes)
    return complex(np.sum(mesh.weights * state_n.psi * phase * state_m.psi))


def raman_matrix(result: SpectrumResult, k_eff: float, states: list[EigenState] | None = None) -> np.ndarray:
    """Matrix of Raman amplitudes between ``states`` (default: reported states)."""
    states = result.reported if states is None else states
    mesh = result.mesh
    P = np.array([s.psi for s in states]) if states else np.zeros((0, mesh.size))
    _check_same_mesh(P, mesh)
    a = result.potential.units.length_unit if isinstance(result.potential, TotalPotential) else 266e-9
    phase = np.exp(1j * k_eff * a * mesh.nodes)
    return (P * (mesh.weights * phase)) @ P.T


def stick_spectrum(result: SpectrumResult, config: RamanConfig = RamanConfig(),
                   include_bound: bool | None = None) -> list[SpectrumLine]:
    """All ordered pairs of window states with intensity above the floor.

    Surface-bound states take part only with ``include_bound``.
    """
    include_bound = config.include_bound if include_bound is None else include_bound
    states = [s for s in result.reported if include_bound or s.label != "surface-bound"]
    if not states:
        return []
    A = raman_matrix(result, config.k_eff, states)
    I = np.abs(A) ** 2
    units = result.potential.units
    hz = units.recoil_energy / units.constants.h
    lines = []
    for i, si in enumerate(states):
        for j, sj in enumerate(states):
            if I[i, j] >= config.intensity_floor:
                lines.append(SpectrumLine(si.n, sj.n, (si.energy - sj.energy) * hz, float(min(I[i, j], 1.0))))
    return lines


def with_short_range(tp: TotalPotential, z0: float | None = None, C3: float | None = None,
                     D: float | None = None, cp_scale: float = 1.0, z_m: float | None = None,
                     rematch: bool = True) -> TotalPotential:
    """Copy of ``tp`` with new Lennard-Jones parameters and/or a rescaled CP table.

    Exactly one of ``z0`` / ``D`` fixes the well (``z0`` kept when neither
    is given); ``C3`` defaults to the current value times ``cp_scale``.
    """
    sp = tp.surface
    if sp.variant != "lj+cp":
        raise DomainError("short-range parameters need the lj+cp surface")
    C3 = sp.lj.C3 * cp_scale if C3 is None else C3
    if D is not None:
        lj = LennardJonesParams.from_depth(D, C3, sp.lj.p)
    else:
        lj = LennardJonesParams.from_z0(sp.lj.z0 if z0 is None else z0, C3, sp.lj.p)
    table = sp.cp_table.scaled(cp_scale) if cp_scale != 1.0 else sp.cp_table
    if z_m is None:
        z_m = find_matching_distance(lj, table) if rematch else sp.z_m
    return replace(tp, surface=SurfacePotential("lj+cp", lj, table, z_m))


def _tracking_grid(z_max: float) -> np.ndarray:
    return np.concatenate([np.geomspace(1e-4, 1.0, 4000), np.linspace(1.0, z_max, int(200 * (z_max - 1)) + 1)[1:]])


@dataclass
class ScanStep:
    value: float
    energies: np.ndarray
    mean_z: np.ndarray
    labels: list[str]
    n: list[int]
    v: list[int | None]
    psi: np.ndarray = field(repr=False)  # on the tracking grid, float32
    slopes: np.ndarray | None = None  # dE/dz0 in E_r per angstrom (Hellmann-Feynman)


@dataclass(frozen=True)
class Crossing:
    track_a: int
    track_b: int
    step: int  # index of the sampled minimum (or of the step after an order swap)
    value: float
    gap: float  # E_r, smallest sampled gap
    kind: str  # "minimum" or "swap"


@dataclass
class ScanResult:
    """Per-parameter spectra with state identities followed across steps.

    ``tracks[t, s]`` is the index of track ``t`` among the reported states
    of step ``s`` (-1 where the track is absent).
    """

    parameter: str
    values: np.ndarray
    steps: list[ScanStep]
    tracks: np.ndarray
    overlaps: np.ndarray  # best overlap of each track with its predecessor (NaN at start)
    crossings: list[Crossing]
    warnings: dict[int, str]

    def energy(self, track: int) -> np.ndarray:
        return np.array([self.steps[s].energies[i] if i >= 0 else np.nan for s, i in enumerate(self.tracks[track])])

    def label(self, track: int) -> list[str | None]:
        return [self.steps[s].labels[i] if i >= 0 else None for s, i in enumerate(self.tracks[track])]


def _summarize(value: float, res: SpectrumResult, grid: np.ndarray, slopes=None) -> ScanStep:
    rep = res.reported
    psi = np.array([np.interp(grid, res.mesh.nodes, s.psi) for s in rep], dtype=np.float32)
    return ScanStep(value, np.array([s.energy for s in rep]), np.array([s.mean_z for s in rep]),
                    [s.label for s in rep], [s.n for s in rep], [s.v for s in rep], psi, slopes)


def z0_slopes(tp: TotalPotential, res: SpectrumResult) -> np.ndarray:
    """Hellmann-Feynman ``dE/dz0`` (E_r per angstrom) at fixed ``C3`` for the reported states.

    Only the Lennard-Jones branch depends on ``z0``:
    ``dV/dz0 = 3 C3 (p-3)/p * z0**(p-4) / z**p``, which is positive, so
    every level rises with ``z0``; the slope measures how strongly.
    """
    lj, a = tp.surface.lj, tp.units.length_unit
    z = res.mesh.nodes * a
    inner = z < tp.surface.z_m
    dV = np.zeros_like(z)
    p = lj.p
    dV[inner] = 3.0 * lj.C3 * (p - 3) / p * lj.z0 ** (p - 4) / z[inner] ** p
    dV *= 1e-10 / tp.units.recoil_energy
    w = res.mesh.weights
    return np.array([float(np.sum(w * s.psi**2 * dV)) for s in res.reported])


def _overlap(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    a = a.astype(float)
    b = b.astype(float)
    na = np.sqrt((a * a) @ w)
    nb = np.sqrt((b * b) @ w)
    return np.abs((a * w) @ b.T) / np.outer(na, nb)


def _trapz_weights(z: np.ndarray) -> np.ndarray:
    h = np.diff(z)
    w = np.zeros_like(z)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def track_states(steps: list[ScanStep], grid: np.ndarray, min_overlap: float = 0.5):
    """Follow identities by maximal overlap (optimal one-to-one assignment)."""
    w = _trapz_weights(grid)
    tracks: list[list[int]] = [[i] for i in range(len(steps[0].energies))]
    best: list[list[float]] = [[np.nan] for _ in tracks]
    warn: dict[int, str] = {}
    for s in range(1, len(steps)):
        prev, cur = steps[s - 1], steps[s]
        O = _overlap(prev.psi, cur.psi, w) if len(prev.energies) and len(cur.energies) else np.zeros((0, 0))
        rows, cols = linear_sum_assignment(-O) if O.size else (np.array([], int), np.array([], int))
        match = dict(zip(rows.tolist(), cols.tolist()))
        used = set()
        weak = []
        for t, tr in enumerate(tracks):
            i = tr[-1]
            if i >= 0 and i in match:
                j = match[i]
                tr.append(j)
                best[t].append(float(O[i, j]))
                used.add(j)
                if O[i, j] < min_overlap:
                    weak.append((t, float(O[i, j])))
            else:
                tr.append(-1)
                best[t].append(np.nan)
        for j in range(len(cur.energies)):
            if j not in used:
                tracks.append([-1] * s + [j])
                best.append([np.nan] * (s + 1))
        if weak:
            msg = ", ".join(f"track {t}: {o:.2f}" for t, o in weak)
            warn[s] = f"ambiguous tracking at step {s} ({msg})"
            warnings.warn(warn[s], TrackingWarning, stacklevel=2)
    return np.array(tracks, dtype=int), np.array(best), warn


def find_crossings(values, steps: list[ScanStep], tracks: np.ndarray, threshold: float = 0.05,
                   overlaps: np.ndarray | None = None, min_overlap: float = 0.5) -> list[Crossing]:
    """Local minima of pairwise track gaps below ``threshold`` and order swaps.

    With ``overlaps``, a track is cut wherever its link to the previous step
    is weaker than ``min_overlap``, so unrelated states are never compared.
    """
    nt, ns = tracks.shape
    E = np.full((nt, ns), np.nan)
    for t in range(nt):
        for s in range(ns):
            if tracks[t, s] >= 0:
                E[t, s] = steps[s].energies[tracks[t, s]]
    linked = np.ones((nt, ns), bool)
    if overlaps is not None:
        linked[:, 1:] = overlaps[:, 1:] >= min_overlap
    out = []
    for a in range(nt):
        for b in range(a + 1, nt):
            d = E[a] - E[b]
            g = np.abs(d)
            ok = linked[a] & linked[b]
            for s in range(ns):
                if not np.isfinite(g[s]):
                    continue
                left = g[s - 1] if s > 0 and ok[s] else np.inf
                right = g[s + 1] if s < ns - 1 and ok[s + 1] else np.inf
                left = np.inf if not np.isfinite(left) else left
                right = np.inf if not np.isfinite(right) else right
                if g[s] < threshold and g[s] <= left and g[s] <= right and np.isfinite(left) and np.isfinite(right):
                    out.append(Crossing(a, b, s, float(values[s]), float(g[s]), "minimum"))
                if s > 0 and ok[s] and np.isfinite(d[s - 1]) and np.isfinite(d[s]) and np.sign(d[s]) != np.sign(d[s - 1]):
                    if not any(c.track_a == a and c.track_b == b and c.step in (s - 1, s) for c in out):
                        out.append(Crossing(a, b, s, float(values[s]), float(min(g[s - 1], g[s])), "swap"))
    return out


def _run_all(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def scan_z0(base: TotalPotential, z0_values, settings: SolverSettings = SolverSettings(),
            threads: int = 1, crossing_threshold: float = 0.05) -> ScanResult:
    """Spectra versus the Lennard-Jones distance ``z0`` (m) at fixed ``C3``.

    ``D`` follows from the long-range constraint at every step and the
    matching distance is recomputed.
    """
    z0_values = np.asarray(z0_values, float)
    if np.any(np.diff(z0_values) <= 0):
        raise DomainError("z0 values must be strictly increasing")
    grid = _tracking_grid(settings.z_max)

    def one(z0):
        tp = with_short_range(base, z0=z0)
        res = settings.run(tp)
        return _summarize(z0, res, grid, z0_slopes(tp, res))

    steps = _run_all(one, z0_values, threads)
    tracks, ov, warn = track_states(steps, grid)
    cross = find_crossings(z0_values, steps, tracks, crossing_threshold, ov)
    return ScanResult("z0", z0_values, steps, tracks, ov, cross, warn)


@dataclass
class C3ScanResult:
    """Transition frequencies versus a common scale factor on ``C3``."""

    factors: np.ndarray
    rescale_D: bool
    transitions: tuple[tuple[int, int], ...]
    frequencies: np.ndarray  # Hz, shape (n_factors, n_transitions)
    energies: np.ndarray  # E_r of the reported base states, shape (n_factors, n_states)
    mean_z: np.ndarray  # of the base states
    min_overlap: float

    @property
    def deltas(self) -> np.ndarray:
        """Frequency changes relative to factor 1 (Hz)."""
        i = int(np.argmin(np.abs(self.factors - 1.0)))
        if abs(self.factors[i] - 1.0) > 1e-12:
            raise DomainError("scan does not contain factor 1")
        return self.frequencies - self.frequencies[i]


def scan_c3(base: TotalPotential, factors=(0.999, 1.0, 1.001), rescale_D: bool = True,
            transitions=DEFAULT_TRANSITIONS, settings: SolverSettings = SolverSettings(),
            threads: int = 1, mesh: Mesh | None = None) -> C3ScanResult:
    """Raman frequencies ``(E_n - E_m)/h`` as the whole surface ``C3`` is scaled.

    The CP table is multiplied by each factor.  With ``rescale_D`` the well
    keeps ``z0`` and ``D`` scales with ``C3``; otherwise ``D`` is kept and
    ``z0`` moves to satisfy the constraint.  The matching distance and the
    mesh are those of the unscaled model, so differences between factors are
    not polluted by remeshing.  States are identified with the factor-1
    states by overlap on that common mesh.
    """
    factors = np.asarray(factors, float)
    if np.any(factors <= 0):
        raise DomainError("scale factors must be positive")
    mesh = settings.mesh(base) if mesh is None else mesh
    ref = settings.run(base, mesh)
    ref_states = ref.reported
    P0 = np.array([s.psi for s in ref_states])
    w = mesh.weights
    lj = base.surface.lj
    units = base.units
    hz = units.recoil_energy / units.constants.h
    by_n = {s.n: k for k, s in enumerate(ref_states)}
    missing = [t for t in transitions if t[0] not in by_n or t[1] not in by_n]
    if missing:
        raise DomainError(f"transitions {missing} involve states outside the window")

    def one(f):
        if f == 1.0:
            return np.array([s.energy for s in ref_states]), 1.0
        kw = dict(cp_scale=f, z_m=base.surface.z_m)
        tp = with_short_range(base, z0=lj.z0, **kw) if rescale_D else with_short_range(base, D=lj.D, **kw)
        res = settings.run(tp, mesh)
        P = np.array([s.psi for s in res.reported])
        O = np.abs((P0 * w) @ P.T)
        rows, cols = linear_sum_assignment(-O)
        E = np.full(len(ref_states), np.nan)
        E[rows] = [res.reported[c].energy for c in cols]
        return E, float(O[rows, cols].min())

    out = _run_all(one, factors, threads)
    E = np.array([o[0] for o in out])
    freqs = np.array([[(Ef[by_n[n]] - Ef[by_n[m]]) * hz for n, m in transitions] for Ef in E])
    return C3ScanResult(factors, rescale_D, tuple(transitions), freqs, E,
                        np.array([s.mean_z for s in ref_states]), min(o[1] for o in out))


def infer_c3_uncertainty(scan: C3ScanResult, freq_uncertainty: float = 0.02) -> np.ndarray:
    """``delta C3 / C3`` per transition for a given frequency uncertainty (Hz).

    The sensitivity ``d nu / d ln C3`` is a centered difference between the
    factors bracketing 1 most closely; zero sensitivity gives ``inf``.
    """
    f = scan.factors
    lo = np.where(f < 1.0)[0]
    hi = np.where(f > 1.0)[0]
    if len(lo) == 0 or len(hi) == 0:
        raise DomainError("scan must bracket factor 1")
    i, j = lo[np.argmax(f[lo])], hi[np.argmin(f[hi])]
    sens = (scan.frequencies[j] - scan.frequencies[i]) / (math.log(f[j]) - math.log(f[i]))
    with np.errstate(divide="ignore"):
        return np.where(sens != 0, freq_uncertainty / np.abs(sens), np.inf)


def resolve_crossing(base: TotalPotential, scan: ScanResult, crossing: Crossing,
                     settings: SolverSettings = SolverSettings(), xatol: float = 1e-15):
    """Minimize the gap of the two adiabatic levels involved in ``crossing``.

    The pair is the adjacent couple of eigenvalues closest to the mean of the
    two tracked energies at the flagged step; the search covers the
    neighbouring scan values.  Returns ``(z0, gap)`` with the gap in E_r.
    A strictly positive gap at the minimum shows the crossing is avoided.
    """
    s = crossing.step
    ta, tb = scan.tracks[crossing.track_a, s], scan.tracks[crossing.track_b, s]
    target = 0.5 * (scan.steps[s].energies[ta] + scan.steps[s].energies[tb])
    lo = scan.values[max(s - 1, 0)]
    hi = scan.values[min(s + 1, len(scan.values) - 1)]

    def gap(z0):
        res = settings.run(with_short_range(base, z0=z0))
        E = np.sort([st.energy for st in res.states])
        if len(E) < 2:
            return np.inf
        mid = 0.5 * (E[1:] + E[:-1])
        k = int(np.argmin(np.abs(mid - target)))
        return float(E[k + 1] - E[k])

    opt = minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    return float(opt.x), float(opt.fun)
