"""Dielectric response and multilayer reflection on the imaginary frequency axis.

Along ``omega = i xi`` every medium has a real permittivity and every wave
vector component normal to the layers becomes a real decay constant
``kappa = sqrt(k**2 + eps xi**2 / c**2)``.  Propagation factors are pure
exponential decays, so all transfer matrices are real.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.constants import c as C_LIGHT

from .errors import ConfigError, DomainError

__all__ = [
    "Oscillator",
    "MaterialModel",
    "Layer",
    "LayerStack",
    "PerfectMirror",
    "VACUUM",
    "epsilon_imag",
    "refractive_index",
    "fresnel_imag",
    "interface_matrix",
    "propagation_matrix",
    "transfer_matrices",
    "compose",
    "reflection_from_matrix",
    "stack_reflection",
    "bragg_stack",
    "load_material",
    "load_stack",
    "DATA_DIR",
]

DATA_DIR = Path(__file__).resolve().parent / "data"
_POLS = ("TE", "TM")


@dataclass(frozen=True)
class Oscillator:
    """One Lorentz term ``strength / (resonance**2 + xi**2 + damping*xi)``."""

    strength: float
    resonance: float
    damping: float = 0.0

    def __post_init__(self):
        if self.strength < 0 or self.resonance <= 0 or self.damping < 0:
            raise ConfigError(f"invalid oscillator {self}")


@dataclass(frozen=True)
class MaterialModel:
    """Oscillator model of ``eps(i xi)``."""

    name: str
    oscillators: tuple[Oscillator, ...] = ()

    def epsilon(self, xi):
        return epsilon_imag(self, xi)

    def scaled(self, factor: float) -> "MaterialModel":
        """Material whose susceptibility ``eps - 1`` is multiplied by ``factor``."""
        osc = tuple(Oscillator(o.strength * factor, o.resonance, o.damping) for o in self.oscillators)
        return MaterialModel(f"{self.name}*{factor:g}", osc)


VACUUM = MaterialModel("vacuum")


def epsilon_imag(material: MaterialModel, xi):
    """Permittivity at imaginary frequency ``i xi`` (``xi`` in rad/s).

    Parameters
    ----------
    material : MaterialModel
    xi : float or ndarray
        Non-negative imaginary frequency.

    Returns
    -------
    float or ndarray
        ``1 + sum_j S_j / (w_j**2 + xi**2 + g_j xi)``, real and >= 1.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise DomainError("xi must be non-negative")
    eps = np.ones_like(xi)
    for o in material.oscillators:
        eps = eps + o.strength / (o.resonance**2 + xi * xi + o.damping * xi)
    return eps if eps.ndim else float(eps)


def refractive_index(material: MaterialModel, wavelength: float) -> float:
    """Lossless real-frequency index, used only to size quarter-wave layers."""
    w = 2.0 * math.pi * C_LIGHT / wavelength
    eps = 1.0 + sum(o.strength / (o.resonance**2 - w * w) for o in material.oscillators)
    if eps <= 0:
        raise DomainError(f"{material.name} is not transparent at {wavelength:g} m")
    return math.sqrt(eps)


def _check_pol(pol: str) -> str:
    if pol not in _POLS:
        raise DomainError(f"polarization must be 'TE' or 'TM', got {pol!r}")
    return pol


def _fresnel_kappa(kap_i, kap_j, eps_i, eps_j, pol):
    if pol == "TE":
        return (kap_i - kap_j) / (kap_i + kap_j)
    return (eps_j * kap_i - eps_i * kap_j) / (eps_j * kap_i + eps_i * kap_j)


def fresnel_imag(k, xi, eps_i, eps_j, pol: str):
    """Fresnel amplitude from medium ``i`` to medium ``j`` at imaginary frequency.

    Parameters
    ----------
    k : float or ndarray
        In-plane wave number (1/m).
    xi : float or ndarray
        Imaginary frequency (rad/s).
    eps_i, eps_j : float or ndarray
        Permittivities ``eps(i xi)`` of the two media.
    pol : {"TE", "TM"}

    Returns
    -------
    float or ndarray
        Real amplitude with ``|r| <= 1``.
    """
    _check_pol(pol)
    k, xi = np.broadcast_arrays(np.asarray(k, float), np.asarray(xi, float))
    if np.any(k < 0) or np.any(xi < 0):
        raise DomainError("k and xi must be non-negative")
    if np.any((k == 0) & (xi == 0)):
        raise DomainError("k = xi = 0 is degenerate")
    q = (xi / C_LIGHT) ** 2
    kap_i = np.sqrt(k * k + eps_i * q)
    kap_j = np.sqrt(k * k + eps_j * q)
    r = _fresnel_kappa(kap_i, kap_j, eps_i, eps_j, pol)
    return r if r.ndim else float(r)


@dataclass(frozen=True)
class Layer:
    material: MaterialModel
    thickness: float  # m

    def __post_init__(self):
        if not self.thickness >= 0:
            raise ConfigError(f"layer thickness must be >= 0, got {self.thickness}")


@dataclass(frozen=True)
class LayerStack:
    """Planar multilayer, listed from the vacuum-facing layer to the substrate."""

    layers: tuple[Layer, ...]
    substrate: MaterialModel
    name: str = field(default="stack", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def materials(self) -> tuple[MaterialModel, ...]:
        return tuple(l.material for l in self.layers) + (self.substrate,)

    def reflection(self, k, xi, pol: str):
        return stack_reflection(self, k, xi, pol)

    def reflection_kappa(self, kappa, xi, pol: str, eps=None):
        """Reflection in terms of the vacuum decay constant ``kappa >= xi/c``.

        ``eps`` may carry precomputed permittivities of ``self.materials``
        evaluated at ``xi``; this is the hot path of the CP quadrature.
        """
        if eps is None:
            eps = [epsilon_imag(m, xi) for m in self.materials]
        q = (np.asarray(xi, float) / C_LIGHT) ** 2
        return _ratio_recursion(kappa, q, eps, [l.thickness for l in self.layers], pol)

    def susceptibility_scaled(self, factor: float) -> "LayerStack":
        layers = tuple(Layer(l.material.scaled(factor), l.thickness) for l in self.layers)
        return LayerStack(layers, self.substrate.scaled(factor), self.name)


class PerfectMirror:
    """Ideal reflector: ``rho_TE = -1`` and ``rho_TM = +1`` for every mode."""

    name = "perfect-mirror"
    materials = ()

    def reflection(self, k, xi, pol: str):
        _check_pol(pol)
        shape = np.broadcast(np.asarray(k), np.asarray(xi)).shape
        return np.full(shape, -1.0 if pol == "TE" else 1.0)

    def reflection_kappa(self, kappa, xi, pol: str, eps=None):
        return self.reflection(kappa, xi, pol)


def _ratio_recursion(kap0, q, eps, thicknesses, pol):
    """``-T21/T22`` of the product, carried as the ratio of the bottom row.

    The row vector ``[0, 1] T`` is propagated from the substrate side; only
    its component ratio is kept, so no scaling bookkeeping is needed.
    """
    _check_pol(pol)
    kap0 = np.asarray(kap0, float)
    kap = [kap0] + [np.sqrt(kap0 * kap0 + (e - 1.0) * q) for e in eps]
    eps = [1.0] + list(eps)
    n = len(kap) - 1
    x = -_fresnel_kappa(kap[n - 1], kap[n], eps[n - 1], eps[n], pol)
    for i in range(n - 2, -1, -1):
        x = x * np.exp(-2.0 * kap[i + 1] * thicknesses[i])
        r = _fresnel_kappa(kap[i], kap[i + 1], eps[i], eps[i + 1], pol)
        x = (x - r) / (1.0 - r * x)
    return -x


def stack_reflection(stack, k, xi, pol: str):
    """Total reflection amplitude ``rho = -T21/T22`` of a layer stack.

    Parameters
    ----------
    stack : LayerStack or PerfectMirror
    k, xi : float or ndarray
        In-plane wave number (1/m) and imaginary frequency (rad/s), broadcast
        against each other.
    pol : {"TE", "TM"}

    Returns
    -------
    float or ndarray
        Real amplitude, ``|rho| <= 1``.
    """
    _check_pol(pol)
    k, xi = np.broadcast_arrays(np.asarray(k, float), np.asarray(xi, float))
    if np.any(k < 0) or np.any(xi < 0):
        raise DomainError("k and xi must be non-negative")
    if np.any((k == 0) & (xi == 0)):
        raise DomainError("k = xi = 0 is degenerate")
    if isinstance(stack, PerfectMirror):
        rho = stack.reflection(k, xi, pol)
    else:
        kap0 = np.sqrt(k * k + (xi / C_LIGHT) ** 2)
        rho = stack.reflection_kappa(kap0, xi, pol)
    rho = np.asarray(rho)
    return rho if rho.ndim else float(rho)


def interface_matrix(r):
    """Interface matrix ``[[1, -r], [-r, 1]]`` (the common ``1/t`` factor dropped)."""
    r = np.asarray(r, float)
    m = np.empty(r.shape + (2, 2))
    m[..., 0, 0] = 1.0
    m[..., 1, 1] = 1.0
    m[..., 0, 1] = -r
    m[..., 1, 0] = -r
    return m


def propagation_matrix(kappa, d):
    """Layer matrix ``diag(exp(-kappa d), exp(kappa d))`` scaled by ``exp(-kappa d)``."""
    p = np.exp(-2.0 * np.asarray(kappa, float) * d)
    m = np.zeros(p.shape + (2, 2))
    m[..., 0, 0] = p
    m[..., 1, 1] = 1.0
    return m


def transfer_matrices(stack: LayerStack, k, xi, pol: str) -> list[np.ndarray]:
    """Factors of the stack transfer matrix, leftmost (substrate side) first.

    The product ``compose(mats)`` is ``I_N D_N ... D_1 I_0`` where ``I_0`` is
    the vacuum/top-layer interface.
    """
    _check_pol(pol)
    k, xi = np.broadcast_arrays(np.asarray(k, float), np.asarray(xi, float))
    q = (xi / C_LIGHT) ** 2
    eps = [np.ones_like(xi)] + [np.asarray(epsilon_imag(m, xi)) for m in stack.materials]
    kap = [np.sqrt(k * k + e * q) for e in eps]
    n = len(kap) - 1
    mats = []
    for i in range(n - 1, -1, -1):
        mats.append(interface_matrix(_fresnel_kappa(kap[i], kap[i + 1], eps[i], eps[i + 1], pol)))
        if i > 0:
            mats.append(propagation_matrix(kap[i], stack.layers[i - 1].thickness))
    return mats


def compose(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Ordered product of transfer matrices, rescaled after every step.

    Each partial product is divided by its largest entry; the overall scale
    never enters ``rho``.
    """
    out = None
    for m in mats:
        out = m.copy() if out is None else out @ m
        out /= np.max(np.abs(out), axis=(-2, -1), keepdims=True)
    if out is None:
        raise DomainError("empty matrix product")
    return out


def reflection_from_matrix(T: np.ndarray):
    return -T[..., 1, 0] / T[..., 1, 1]


def bragg_stack(
    low: MaterialModel,
    high: MaterialModel,
    pairs: int = 10,
    wavelength: float = 532e-9,
    substrate: MaterialModel | None = None,
    top: str = "low",
) -> LayerStack:
    """Quarter-wave stack of ``pairs`` low/high bilayers.

    ``top`` selects which material faces the vacuum.
    """
    if pairs < 0:
        raise ConfigError("pairs must be >= 0")
    dl = wavelength / (4 * refractive_index(low, wavelength))
    dh = wavelength / (4 * refractive_index(high, wavelength))
    pair = [Layer(low, dl), Layer(high, dh)]
    if top == "high":
        pair.reverse()
    elif top != "low":
        raise ConfigError("top must be 'low' or 'high'")
    return LayerStack(tuple(pair * pairs), substrate or low, name=f"bragg-{low.name}-{high.name}")


def _resolve(path_or_name, suffix=".json") -> Path:
    p = Path(path_or_name)
    if p.exists():
        return p
    q = DATA_DIR / (str(path_or_name) + ("" if str(path_or_name).endswith(suffix) else suffix))
    if q.exists():
        return q
    raise ConfigError(f"data file not found: {path_or_name}")


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_material(path_or_name) -> MaterialModel:
    """Read a material file (oscillator triples in SI units)."""
    path = _resolve(path_or_name)
    d = _read_json(path)
    try:
        osc = tuple(
            Oscillator(float(o["strength"]), float(o["resonance"]), float(o.get("damping", 0.0)))
            for o in d["oscillators"]
        )
        return MaterialModel(str(d["name"]), osc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed material file ({exc})") from None


def load_stack(path_or_name, material_dir: str | Path | None = None, materials: dict | None = None) -> LayerStack:
    """Read a stack file of ``(material, thickness_nm)`` layers plus a substrate name."""
    path = _resolve(path_or_name)
    d = _read_json(path)
    cache = dict(materials or {})
    search = [Path(material_dir)] if material_dir else []
    search += [path.parent, DATA_DIR]

    def mat(name: str) -> MaterialModel:
        if name not in cache:
            for base in search:
                f = base / f"{name}.json"
                if f.exists():
                    cache[name] = load_material(f)
                    break
            else:
                raise ConfigError(f"{path}: unknown material {name!r}")
        return cache[name]

    try:
        layers = tuple(Layer(mat(l["material"]), float(l["thickness_nm"]) * 1e-9) for l in d["layers"])
        return LayerStack(layers, mat(d["substrate"]), name=str(d.get("name", path.stem)))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: malformed stack file ({exc})") from None
