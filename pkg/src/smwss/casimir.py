"""Finite-temperature Casimir-Polder potential of an atom above a planar mirror.

The potential is a Matsubara sum over imaginary frequencies ``xi_n`` of a
transverse wave-number integral.  With ``kappa = sqrt(k**2 + xi**2/c**2)``
each term is

    k_B T alpha(i xi_n)/(4 pi eps0) * M * int k dk/kappa e^{-2 kappa z} f(kappa)

    f = (xi/c)**2 rho_TE - ((xi/c)**2 + 2 kappa**2) rho_TM

for the ``"printed"`` kernel (see ``KERNELS``), where ``M`` is the
normalization of the transverse measure (see ``K_MEASURES``).  Substituting ``u = 2 kappa z`` turns the integral into a
Laplace transform on ``[2 xi z / c, inf)`` that Gauss-Laguerre quadrature
handles after a shift.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.polynomial.laguerre import laggauss
from scipy.constants import c as C_LIGHT, epsilon_0, hbar, k as K_B, physical_constants
from scipy.interpolate import CubicSpline

from .atom import AtomModel, polarizability_imag
from .errors import AccuracyError, DomainError, ExtrapolationError
from .optics import LayerStack, PerfectMirror, epsilon_imag

__all__ = [
    "K_MEASURES",
    "CPConfig",
    "PotentialTable",
    "C3Fit",
    "KERNELS",
    "matsubara_frequencies",
    "cp_k_integral",
    "cp_potential",
    "tabulate",
    "extract_C3",
    "load_or_tabulate",
    "A03_EV",
]

#: Bohr radius cubed times electronvolt, the reporting unit of C3 (J m^3).
A03_EV = physical_constants["Bohr radius"][0] ** 3 * physical_constants["electron volt"][0]

#: Factor multiplying ``int k dk`` for each reading of the transverse measure:
#: d^2k/(2 pi)^2, d^2k/(2 pi) and a bare d^2k.
K_MEASURES = {"fourier": 1.0 / (2.0 * math.pi), "physical": 1.0, "literal": 2.0 * math.pi}

#: Polarization brackets ``f(kappa)`` (with the ``(xi/c)**2`` prefactor folded in).
#: ``"printed"`` is ``q rho_TE - (q + 2 kappa**2) rho_TM``; ``"lifshitz"`` is the
#: textbook ``q (rho_TE + rho_TM) - 2 kappa**2 rho_TM``.  They coincide in the
#: non-retarded limit and differ by ``2 q rho_TM`` otherwise.
KERNELS = ("printed", "lifshitz")

TABLE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CPConfig:
    """Inputs of the Casimir-Polder evaluation.

    Parameters
    ----------
    temperature : float
        Temperature in K.
    atom : AtomModel
    stack : LayerStack or PerfectMirror
    matsubara_rel_tol : float
        Relative tolerance of the truncated Matsubara sum.
    k_quadrature_order : int
        Number of Gauss-Laguerre nodes.
    k_measure : str
        Key of ``K_MEASURES``.
    n_max : int
        Hard cap on the number of Matsubara terms.
    """

    temperature: float
    atom: AtomModel
    stack: LayerStack | PerfectMirror
    matsubara_rel_tol: float = 1e-8
    k_quadrature_order: int = 64
    k_measure: str = "fourier"
    kernel: str = "printed"
    n_max: int = 1_000_000

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError("temperature must be positive")
        if not 0 < self.matsubara_rel_tol <= 1e-4:
            raise DomainError("matsubara_rel_tol must lie in (0, 1e-4]")
        if self.k_quadrature_order < 20:
            raise DomainError("k_quadrature_order must be >= 20")
        if self.k_measure not in K_MEASURES:
            raise DomainError(f"k_measure must be one of {sorted(K_MEASURES)}")
        if self.kernel not in KERNELS:
            raise DomainError(f"kernel must be one of {KERNELS}")

    @property
    def measure(self) -> float:
        return K_MEASURES[self.k_measure]

    def fingerprint(self) -> str:
        return _hash(self.describe())

    def describe(self) -> dict:
        stack = self.stack
        if isinstance(stack, PerfectMirror):
            st = "perfect-mirror"
        else:
            st = {
                "layers": [[_mat(l.material), repr(l.thickness)] for l in stack.layers],
                "substrate": _mat(stack.substrate),
            }
        return {
            "temperature": repr(self.temperature),
            "atom": [self.atom.name, repr(self.atom.mass), [[repr(l.omega), repr(l.dipole)] for l in self.atom.lines]],
            "stack": st,
            "matsubara_rel_tol": repr(self.matsubara_rel_tol),
            "k_quadrature_order": self.k_quadrature_order,
            "k_measure": self.k_measure,
            "kernel": self.kernel,
        }


def _mat(m):
    return [m.name, [[repr(o.strength), repr(o.resonance), repr(o.damping)] for o in m.oscillators]]


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def matsubara_frequencies(temperature: float, n):
    """``xi_n = 2 pi n k_B T / hbar`` in rad/s."""
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise DomainError("Matsubara index must be >= 0")
    if not temperature > 0:
        raise DomainError("temperature must be positive")
    xi = 2.0 * math.pi * K_B * temperature / hbar * n_arr.astype(float)
    return xi if xi.ndim else float(xi)


@dataclass
class _Quadrature:
    """Gauss-Laguerre rule and per-frequency material data, grown on demand."""

    config: CPConfig
    nodes: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.nodes, self.weights = laggauss(self.config.k_quadrature_order)
        self._size = 0
        self._grow(256)

    def _grow(self, size: int):
        n = np.arange(size)
        self.xi = matsubara_frequencies(self.config.temperature, n)
        self.alpha = polarizability_imag(self.config.atom, self.xi) / (4 * math.pi * epsilon_0)
        self.eps = [np.asarray(epsilon_imag(m, self.xi)) for m in self.config.stack.materials]
        self._size = size

    def ensure(self, size: int):
        if size > self._size:
            self._grow(max(size, 2 * self._size))


def _k_integral(z, xi, stack, eps, nodes, weights, kernel="printed"):
    """Vectorized k integral for an array of frequencies ``xi``.

    Returns ``int_{xi/c}^inf d kappa e^{-2 kappa z} f(kappa)``, which equals
    ``int_0^inf k dk / kappa e^{-2 kappa z} f``.
    """
    xi = np.asarray(xi, float)[:, None]
    u0 = 2.0 * xi * z / C_LIGHT
    kap = (nodes[None, :] + u0) / (2.0 * z)
    q = (xi / C_LIGHT) ** 2
    eps2 = [e[:, None] for e in eps] if eps is not None else None
    r_tm = stack.reflection_kappa(kap, xi, "TM", eps2)
    r_te = stack.reflection_kappa(kap, xi, "TE", eps2)
    if kernel == "printed":
        f = q * (r_te - r_tm) - 2.0 * kap * kap * r_tm
    else:
        f = q * (r_te + r_tm) - 2.0 * kap * kap * r_tm
    return np.exp(-u0[:, 0]) / (2.0 * z) * (f @ weights)


def cp_k_integral(z: float, xi: float, stack, order: int = 64, kernel: str = "printed") -> float:
    """Transverse integral of one Matsubara term, ``xi**2/c**2`` prefactor included.

    Parameters
    ----------
    z : float
        Atom-mirror distance in m.
    xi : float
        Imaginary frequency in rad/s (0 allowed; the limit is finite).
    stack : LayerStack or PerfectMirror
    order : int
        Gauss-Laguerre order.
    kernel : {"printed", "lifshitz"}
        Polarization bracket, see ``KERNELS``.

    Returns
    -------
    float
        ``int_0^inf k dk/kappa e^{-2 kappa z} f(kappa)`` in 1/m^3, e.g.
        ``f = (xi/c)**2 rho_TE - ((xi/c)**2 + 2 kappa**2) rho_TM`` for the
        printed kernel.  The transverse-measure normalization is applied by
        :func:`cp_potential`.
    """
    if not z > 0:
        raise DomainError("z must be positive")
    if xi < 0:
        raise DomainError("xi must be non-negative")
    if kernel not in KERNELS:
        raise DomainError(f"kernel must be one of {KERNELS}")
    nodes, weights = laggauss(order)
    eps = [np.atleast_1d(epsilon_imag(m, xi)) for m in stack.materials]
    val = float(_k_integral(z, [xi], stack, eps, nodes, weights, kernel)[0])
    if not math.isfinite(val):
        raise AccuracyError(f"k integral not finite at z={z}, xi={xi}")
    return val


def _potential_one(z: float, config: CPConfig, quad: _Quadrature) -> tuple[float, int]:
    kT = K_B * config.temperature
    pref = kT * config.measure
    tol = config.matsubara_rel_tol
    terms: list[float] = []
    total = 0.0
    n0, chunk = 0, 32
    while True:
        n1 = n0 + chunk
        if n1 > config.n_max:
            raise AccuracyError(f"Matsubara sum not converged after {config.n_max} terms at z={z:g} m")
        quad.ensure(n1)
        sl = slice(n0, n1)
        eps = [e[sl] for e in quad.eps]
        I = _k_integral(z, quad.xi[sl], config.stack, eps, quad.nodes, quad.weights, config.kernel)
        t = pref * quad.alpha[sl] * I
        if n0 == 0:
            t[0] *= 0.5
        for j, tj in enumerate(t):
            n = n0 + j
            prev = terms[-1] if terms else 0.0
            terms.append(float(tj))
            total += tj
            if n < 2 or total == 0.0:
                continue
            if abs(tj) < 1e-12 * abs(total):
                return math.fsum(terms), n + 1
            ratio = tj / prev if prev != 0.0 else 1.0
            if 0.0 <= ratio < 1.0 and abs(tj) * ratio / (1.0 - ratio) < tol * abs(total):
                return math.fsum(terms), n + 1
        n0 = n1
        chunk = min(2 * chunk, 1024)


def cp_potential(z, config: CPConfig, return_terms: bool = False):
    """Casimir-Polder potential in J at distance(s) ``z`` (m).

    The primed Matsubara sum (n = 0 weighted by 1/2) is truncated when the
    geometric tail estimate drops below ``matsubara_rel_tol`` times the
    partial sum, or a single term drops below 1e-12 of it.  Terms are
    reduced with ``math.fsum`` so the result does not depend on ordering.
    """
    z_arr = np.atleast_1d(np.asarray(z, float))
    if np.any(z_arr <= 0):
        raise DomainError("z must be positive")
    quad = _Quadrature(config)
    out = [_potential_one(float(zz), config, quad) for zz in z_arr]
    V = np.array([o[0] for o in out])
    nterms = np.array([o[1] for o in out])
    if np.ndim(z) == 0:
        V, nterms = float(V[0]), int(nterms[0])
    return (V, nterms) if return_terms else V


@dataclass(frozen=True)
class PotentialTable:
    """Tabulated ``V(z)`` (SI) with log-log cubic-spline interpolation."""

    z: np.ndarray
    V: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        z = np.asarray(self.z, float)
        V = np.asarray(self.V, float)
        if z.ndim != 1 or z.shape != V.shape or len(z) < 4:
            raise DomainError("table needs matching 1-D arrays with at least 4 samples")
        if np.any(z <= 0) or np.any(np.diff(z) <= 0):
            raise DomainError("table z must be positive and strictly increasing")
        if np.any(V >= 0):
            raise DomainError("tabulated potential must be attractive (V < 0)")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "V", V)

    @cached_property
    def _spline(self):
        return CubicSpline(np.log(self.z), np.log(-self.V))

    @property
    def z_range(self) -> tuple[float, float]:
        return float(self.z[0]), float(self.z[-1])

    def __call__(self, z):
        z = np.asarray(z, float)
        lo, hi = self.z_range
        if np.any(z < lo * (1 - 1e-12)) or np.any(z > hi * (1 + 1e-12)):
            raise ExtrapolationError(f"z outside tabulated range [{lo:g}, {hi:g}] m")
        v = -np.exp(self._spline(np.log(np.clip(z, lo, hi))))
        return v if v.ndim else float(v)

    def scaled(self, factor: float) -> "PotentialTable":
        if not factor > 0:
            raise DomainError("scale factor must be positive")
        meta = dict(self.metadata)
        meta["scale"] = meta.get("scale", 1.0) * factor
        return PotentialTable(self.z, self.V * factor, meta)

    @property
    def fingerprint(self) -> str:
        return self.metadata.get("fingerprint") or _hash([self.z.tobytes().hex(), self.V.tobytes().hex()])

    def save(self, path: str | Path):
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp.npz")
        np.savez(tmp, z=self.z, V=self.V, version=TABLE_FORMAT_VERSION, metadata=json.dumps(self.metadata))
        tmp.replace(path)

    @classmethod
    def load(cls, path: str | Path) -> "PotentialTable":
        with np.load(path, allow_pickle=False) as d:
            if int(d["version"]) != TABLE_FORMAT_VERSION:
                raise DomainError(f"{path}: table format version {int(d['version'])} unsupported")
            return cls(d["z"], d["V"], json.loads(str(d["metadata"])))


def default_grid(z_min=0.5e-9, z_max=1e-5, points_per_decade=60) -> np.ndarray:
    n = int(round(math.log10(z_max / z_min) * points_per_decade)) + 1
    return np.geomspace(z_min, z_max, n)


def tabulate(config: CPConfig, z=None, threads: int = 1) -> PotentialTable:
    """Evaluate the potential on a grid (default 0.5 nm to 10 um, 60 per decade).

    Grid points are independent; with ``threads > 1`` they are farmed out to
    a thread pool and reassembled in grid order.
    """
    z = default_grid() if z is None else np.asarray(z, float)

    def one(zz):
        return _potential_one(float(zz), config, _Quadrature(config))

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            out = list(ex.map(one, z))
    else:
        quad = _Quadrature(config)
        out = [_potential_one(float(zz), config, quad) for zz in z]
    V = np.array([o[0] for o in out])
    meta = {
        "config": config.describe(),
        "grid": [repr(float(z[0])), repr(float(z[-1])), len(z)],
        "matsubara_terms": [int(o[1]) for o in out],
    }
    meta["fingerprint"] = _hash([meta["config"], z.tobytes().hex()])
    return PotentialTable(z, V, meta)


def load_or_tabulate(config: CPConfig, cache_dir: str | Path | None, z=None, threads: int = 1) -> PotentialTable:
    """Return a cached table keyed by the config and grid fingerprint, computing it if absent."""
    z = default_grid() if z is None else np.asarray(z, float)
    if cache_dir is None:
        return tabulate(config, z, threads)
    key = _hash([config.describe(), z.tobytes().hex()])
    path = Path(cache_dir) / f"cp_{key[:20]}.npz"
    if path.exists():
        try:
            table = PotentialTable.load(path)
            if table.metadata.get("fingerprint") == key:
                return table
        except (OSError, ValueError, KeyError):
            pass
    table = tabulate(config, z, threads)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.save(path)
    return table


@dataclass(frozen=True)
class C3Fit:
    C3: float  # J m^3
    flatness: float  # (max - min)/median of z^3|V| over the window
    window: tuple[float, float]  # m

    @property
    def C3_a03eV(self) -> float:
        return self.C3 / A03_EV


def extract_C3(
    table: PotentialTable, z_range: tuple[float, float] = (1e-9, 10e-9), max_flatness: float = 0.1,
    samples_per_decade: int = 120,
) -> C3Fit:
    """Van der Waals coefficient from the flattest decade of ``z**3 V`` inside ``z_range``.

    The table is resampled through its spline; every one-decade window
    inside ``z_range`` is a candidate and the one with the smallest relative
    spread wins.  ``C3`` is the median of ``-z**3 V`` over it.  The default
    range starts at 1 nm because the tail is only ever used beyond the
    matching distance, which is at least a few z0.
    """
    lo, hi = map(float, z_range)
    t_lo, t_hi = table.z_range
    if hi / lo < 10 * (1 - 1e-9) or lo < t_lo * (1 - 1e-12) or hi > t_hi * (1 + 1e-12):
        raise DomainError("z_range must span a decade inside the tabulated range")
    n = int(round(math.log10(hi / lo) * samples_per_decade)) + 1
    z = np.geomspace(lo, hi, n)
    zv = -z**3 * table(z)
    best = None
    for i in range(n - samples_per_decade):
        w = zv[i : i + samples_per_decade + 1]
        flat = float((w.max() - w.min()) / np.median(w))
        if best is None or flat < best[0]:
            best = (flat, float(np.median(w)), (float(z[i]), float(z[i + samples_per_decade])))
    flat, c3, win = best
    if flat > max_flatness:
        raise AccuracyError(f"no z^-3 plateau flat to {max_flatness:.0%} (best {flat:.1%})")
    return C3Fit(c3, flat, win)
