"""Run configuration: TOML parsing, validation, overrides and fingerprints.

A configuration file has the sections ``model``, ``cp``, ``solver``,
``raman``, ``scan`` and ``output``; every key is optional and unknown keys
are rejected.  Lengths carry their unit in the documentation below, not in
the key names, and are converted to SI when the model objects are built.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import tomli

from .errors import ConfigError, SmwssError

__all__ = ["DEFAULTS", "RunConfig", "parse_config", "parse_override", "SCHEMA"]

# section -> key -> (default, kind, unit/help)
SCHEMA = {
    "model": {
        "U": (3.0, "float", "lattice depth, E_r"),
        "z0": (2.3, "float", "Lennard-Jones equilibrium distance, angstrom"),
        "temperature": (300.0, "float", "K"),
        "c3": (None, "float?", "C3 override, a0^3 eV (default: extracted from the CP table)"),
        "variant": ("lj+cp", "str", "lj+cp | perfect | none"),
        "lj_exponent": (12, "int", "repulsive exponent of the Lennard-Jones form"),
        "z_m": (None, "float?", "matching distance override, nm"),
        "lambda_l": (532.0, "float", "lattice wavelength, nm"),
        "g": (9.81, "float", "m/s^2"),
        "atom": ("rb87", "str", "atom line file or shipped name"),
        "stack": ("bragg532", "str", "stack file or shipped name"),
        "materials_dir": (None, "str?", "extra directory searched for material files"),
        "gravity": (True, "bool", "include the gravity term"),
        "lattice": (True, "bool", "include the optical lattice"),
    },
    "cp": {
        "kernel": ("printed", "str", "printed | lifshitz"),
        "k_measure": ("fourier", "str", "fourier | physical | literal"),
        "matsubara_rel_tol": (1e-8, "float", "relative truncation tolerance"),
        "k_order": (64, "int", "Gauss-Laguerre order"),
        "z_min": (0.5, "float", "table start, nm"),
        "z_max": (10000.0, "float", "table end, nm"),
        "points_per_decade": (60, "int", "table density"),
    },
    "solver": {
        "window": ([-5.0, 5.0], "window", "reporting window, E_r"),
        "density": (6000.0, "float", "points per local wavelength near the surface"),
        "lattice_points": (1000, "int", "points per lattice period"),
        "z_max": (25.0, "float", "domain end, lattice units"),
    },
    "raman": {
        "wavelength": (780.0, "float", "k_eff = 4 pi / wavelength, nm"),
        "intensity_floor": (1e-6, "float", "smallest reported line intensity"),
        "include_bound": (False, "bool", "include surface-bound states in spectra"),
    },
    "scan": {
        "z0_start": (2.0, "float", "angstrom"),
        "z0_stop": (6.0, "float", "angstrom"),
        "z0_points": (10, "int", "number of z0 values"),
        "c3_factors": ([0.999, 1.0, 1.001], "floats", "C3 scale factors"),
        "rescale_D": (True, "bool", "scale D with C3 (else keep D and move z0)"),
        "transitions": (None, "pairs?", "list of [n, m]; default n = 6..11, |n-m| = 1, 3, 5"),
        "freq_uncertainty": (0.02, "float", "Hz"),
    },
    "output": {
        "dir": ("results", "str", "output directory"),
        "format": ("csv", "str", "csv | csv+json"),
        "states": (None, "ints?", "state numbers for wavefunction export (default: all reported)"),
        "potential_z_max": (20.0, "float", "end of the potential export, lattice units"),
        "potential_points": (4000, "int", "samples in the potential export"),
    },
}

DEFAULTS = {sec: {k: copy.deepcopy(v[0]) for k, v in keys.items()} for sec, keys in SCHEMA.items()}


def _coerce(value, kind: str, where: str, errors: list):
    optional = kind.endswith("?")
    base = kind.rstrip("?")
    if value is None:
        if optional:
            return None
        errors.append(f"{where}: value required")
        return None
    try:
        if base == "float":
            if isinstance(value, bool):
                raise TypeError
            v = float(value)
            if not math.isfinite(v):
                raise ValueError
            return v
        if base == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if base == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if base == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if base in ("floats", "window"):
            v = [float(x) for x in value]
            if base == "window" and len(v) != 2:
                raise ValueError
            return v
        if base == "ints":
            return [int(x) for x in value]
        if base == "pairs":
            v = [[int(a), int(b)] for a, b in value]
            return v
    except (TypeError, ValueError):
        errors.append(f"{where}: expected {base}, got {value!r}")
        return None
    raise AssertionError(kind)


def _check_ranges(c: dict, errors: list):
    m, cp, so, ra, sc, out = (c[k] for k in ("model", "cp", "solver", "raman", "scan", "output"))

    def need(cond, msg):
        if not cond:
            errors.append(msg)

    if m["U"] is not None:
        need(0 < m["U"] <= 20, f"model.U = {m['U']!r} outside (0, 20] E_r")
    if m["z0"] is not None:
        need(1 <= m["z0"] <= 20, f"model.z0 = {m['z0']!r} outside [1, 20] angstrom")
    if m["temperature"] is not None:
        need(0 < m["temperature"] <= 1000, f"model.temperature = {m['temperature']!r} outside (0, 1000] K")
    if m["c3"] is not None:
        need(m["c3"] > 0, "model.c3 must be positive")
    if m["variant"] is not None:
        need(m["variant"] in ("lj+cp", "perfect", "none"), f"model.variant = {m['variant']!r} not one of lj+cp, perfect, none")
    if m["lj_exponent"] is not None:
        need(m["lj_exponent"] > 3, "model.lj_exponent must exceed 3")
    if m["z_m"] is not None:
        need(m["z_m"] > 0, "model.z_m must be positive")
    for k in ("lambda_l", "g"):
        if m[k] is not None:
            need(m[k] > 0, f"model.{k} must be positive")
    if cp["kernel"] is not None:
        need(cp["kernel"] in ("printed", "lifshitz"), f"cp.kernel = {cp['kernel']!r} not one of printed, lifshitz")
    if cp["k_measure"] is not None:
        need(cp["k_measure"] in ("fourier", "physical", "literal"), f"cp.k_measure = {cp['k_measure']!r} unknown")
    if cp["matsubara_rel_tol"] is not None:
        need(0 < cp["matsubara_rel_tol"] <= 1e-4, "cp.matsubara_rel_tol outside (0, 1e-4]")
    if cp["k_order"] is not None:
        need(cp["k_order"] >= 20, "cp.k_order must be >= 20")
    if cp["z_min"] is not None and cp["z_max"] is not None:
        need(0 < cp["z_min"] < cp["z_max"], "cp.z_min must be positive and below cp.z_max")
    if cp["points_per_decade"] is not None:
        need(cp["points_per_decade"] >= 5, "cp.points_per_decade must be >= 5")
    if so["window"] is not None:
        need(so["window"][0] < so["window"][1], "solver.window must be increasing")
    if so["density"] is not None:
        need(so["density"] >= 12, "solver.density must be >= 12")
    if so["lattice_points"] is not None:
        need(so["lattice_points"] >= 40, "solver.lattice_points must be >= 40")
    if so["z_max"] is not None:
        need(so["z_max"] >= 20, "solver.z_max must be >= 20 lattice units")
    if ra["wavelength"] is not None:
        need(ra["wavelength"] > 0, "raman.wavelength must be positive")
    if ra["intensity_floor"] is not None:
        need(0 <= ra["intensity_floor"] < 1, "raman.intensity_floor outside [0, 1)")
    if sc["z0_start"] is not None and sc["z0_stop"] is not None:
        need(1 <= sc["z0_start"] < sc["z0_stop"] <= 20, "scan.z0_start < scan.z0_stop must lie in [1, 20] angstrom")
    if sc["z0_points"] is not None:
        need(sc["z0_points"] >= 2, "scan.z0_points must be >= 2")
    if sc["c3_factors"] is not None:
        f = sc["c3_factors"]
        need(all(x > 0 for x in f), "scan.c3_factors must be positive")
        need(any(x < 1 for x in f) and any(x > 1 for x in f) and 1.0 in f, "scan.c3_factors must contain 1 and bracket it")
    if sc["freq_uncertainty"] is not None:
        need(sc["freq_uncertainty"] > 0, "scan.freq_uncertainty must be positive")
    if out["format"] is not None:
        need(out["format"] in ("csv", "csv+json"), f"output.format = {out['format']!r} not one of csv, csv+json")
    if out["potential_points"] is not None:
        need(out["potential_points"] >= 2, "output.potential_points must be >= 2")


def _check_files(c: dict, errors: list):
    """Every referenced data file must exist and parse."""
    from .atom import load_atom
    from .optics import load_stack

    m = c["model"]
    try:
        load_atom(m["atom"])
    except SmwssError as exc:
        errors.append(f"model.atom: {exc}")
    if m["variant"] == "lj+cp":
        try:
            load_stack(m["stack"], m["materials_dir"])
        except SmwssError as exc:
            errors.append(f"model.stack: {exc}")


def _merge(raw: dict, base: dict, errors: list, origin: str) -> dict:
    c = copy.deepcopy(base)
    if not isinstance(raw, dict):
        errors.append(f"{origin}: top level must be a table")
        return c
    for sec, body in raw.items():
        if sec not in SCHEMA:
            errors.append(f"{origin}: unknown section {sec!r}")
            continue
        if not isinstance(body, dict):
            errors.append(f"{origin}: {sec!r} must be a table")
            continue
        for key, value in body.items():
            if key not in SCHEMA[sec]:
                errors.append(f"{origin}: unknown key {sec}.{key}")
                continue
            c[sec][key] = _coerce(value, SCHEMA[sec][key][1], f"{sec}.{key}", errors)
    return c


def parse_override(text: str) -> dict:
    """``section.key=value`` (value in TOML syntax, bare words taken as strings)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    path, value = text.split("=", 1)
    parts = path.strip().split(".")
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"override key {path!r} must be section.key")
    try:
        v = tomli.loads(f"v = {value.strip()}")["v"]
    except tomli.TOMLDecodeError:
        v = value.strip()
    return {parts[0]: {parts[1]: v}}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration (plain data, hashable by content)."""

    data: dict
    source: str = "<defaults>"

    def __getitem__(self, section: str) -> dict:
        return self.data[section]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def with_overrides(self, overrides) -> "RunConfig":
        errors: list[str] = []
        c = self.data
        for o in overrides:
            c = _merge(parse_override(o) if isinstance(o, str) else o, c, errors, "--set")
        if not errors:
            _check_ranges(c, errors)
            _check_files(c, errors)
        if errors:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
        return RunConfig(c, self.source)

    def data_files(self) -> list[Path]:
        """Every data file the configuration reads, in a fixed order."""
        from .optics import DATA_DIR, _resolve

        files = []
        m = self.data["model"]
        try:
            files.append(_resolve(m["atom"]))
        except ConfigError:
            pass
        if m["variant"] == "lj+cp":
            try:
                stack = _resolve(m["stack"])
            except ConfigError:
                return files
            files.append(stack)
            try:
                d = json.loads(stack.read_text())
                names = sorted({l["material"] for l in d.get("layers", [])} | {d.get("substrate", "")})
            except (ValueError, KeyError, TypeError, AttributeError):
                names = []
            search = ([Path(m["materials_dir"])] if m["materials_dir"] else []) + [stack.parent, DATA_DIR]
            for name in names:
                for base in search:
                    f = base / f"{name}.json"
                    if f.exists():
                        files.append(f)
                        break
        return files

    @property
    def fingerprint(self) -> str:
        """SHA-256 over the resolved values and the bytes of every data file."""
        h = hashlib.sha256(json.dumps(self.data, sort_keys=True).encode())
        for f in self.data_files():
            h.update(f.name.encode())
            h.update(f.read_bytes())
        return h.hexdigest()


def parse_config(path=None, overrides=()) -> RunConfig:
    """Read a TOML configuration, apply ``--set`` overrides, validate everything.

    ``None`` or an empty file gives the defaults.  All problems are collected
    and reported together in one :class:`ConfigError`.
    """
    raw = {}
    source = "<defaults>"
    if path is not None:
        p = Path(path)
        source = str(p)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
        try:
            raw = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: parse error: {exc}") from None
    errors: list[str] = []
    c = _merge(raw, DEFAULTS, errors, source)
    for o in overrides:
        try:
            c = _merge(parse_override(o) if isinstance(o, str) else o, c, errors, "--set")
        except ConfigError as exc:
            errors.append(str(exc))
    if not errors:
        _check_ranges(c, errors)
        _check_files(c, errors)
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return RunConfig(c, source)
