"""Command-line interface: ``smwss <subcommand> [--config PATH] [--set k=v] ...``.

Every subcommand writes CSV files (plus JSON mirrors with
``--format csv+json``) and a ``manifest_<subcommand>.json`` into the output
directory.  Failures print a JSON object on stderr and exit with 2
(configuration), 3 (numerical accuracy) or 4 (resources).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np
from scipy.constants import electron_volt

from . import __version__
from .atom import load_atom
from .casimir import A03_EV, CPConfig, default_grid, extract_C3, load_or_tabulate
from .config import RunConfig, parse_config
from .eigen import SolverSettings
from .errors import ConfigError, SmwssError, TrackingWarning
from .optics import load_stack
from .potential import TotalPotential, assemble, find_matching_distance
from .results import Manifest, write_table
from .spectrum import (
    DEFAULT_TRANSITIONS,
    RamanConfig,
    infer_c3_uncertainty,
    raman_matrix,
    scan_c3,
    scan_z0,
    stick_spectrum,
)
from .units import LatticeUnits

__all__ = ["main", "build_model", "COMMANDS"]

OUT_ENV = "SMWSS_OUT"
CACHE_ENV = "SMWSS_CACHE"
ANGSTROM = 1e-10


def _cache_dir(arg: str | None) -> Path | None:
    if arg == "none":
        return None
    if arg:
        return Path(arg)
    env = os.environ.get(CACHE_ENV)
    if env:
        return None if env == "none" else Path(env)
    return Path.home() / ".cache" / "smwss"


class Model:
    """Objects built from a resolved configuration, created lazily."""

    def __init__(self, cfg: RunConfig, threads: int = 1, cache: Path | None = None):
        self.cfg = cfg
        self.threads = threads
        self.cache = cache
        m = cfg["model"]
        self.atom = load_atom(m["atom"])
        self.units = LatticeUnits(lambda_l=m["lambda_l"] * 1e-9, atom_mass=self.atom.mass, g=m["g"])
        s = cfg["solver"]
        self.settings = SolverSettings(tuple(s["window"]), s["density"], s["lattice_points"], s["z_max"])
        self._table = None
        self._tp = None

    def cp_config(self) -> CPConfig:
        m, cp = self.cfg["model"], self.cfg["cp"]
        stack = load_stack(m["stack"], m["materials_dir"])
        return CPConfig(m["temperature"], self.atom, stack, cp["matsubara_rel_tol"], cp["k_order"],
                        cp["k_measure"], cp["kernel"])

    def grid(self) -> np.ndarray:
        cp = self.cfg["cp"]
        return default_grid(cp["z_min"] * 1e-9, cp["z_max"] * 1e-9, cp["points_per_decade"])

    @property
    def table(self):
        if self._table is None:
            self._table = load_or_tabulate(self.cp_config(), self.cache, self.grid(), self.threads)
        return self._table

    def potential(self, variant: str | None = None) -> TotalPotential:
        m = self.cfg["model"]
        variant = variant or m["variant"]
        if variant == m["variant"] and self._tp is not None:
            return self._tp
        common = dict(U=m["U"], variant=variant, units=self.units, include_gravity=m["gravity"],
                      include_lattice=m["lattice"])
        if variant != "lj+cp":
            return assemble(None, **common)
        C3 = None
        if m["c3"] is not None:
            C3 = m["c3"] * A03_EV
        z_m = None if m["z_m"] is None else m["z_m"] * 1e-9
        tp = assemble(self.table, z0=m["z0"] * ANGSTROM, C3=C3, z_m=z_m, **common)
        if m["lj_exponent"] != 12:
            from .potential import LennardJonesParams, SurfacePotential

            lj = LennardJonesParams.from_z0(m["z0"] * ANGSTROM, tp.surface.lj.C3, m["lj_exponent"])
            zm = find_matching_distance(lj, self.table) if z_m is None else z_m
            tp = tp.with_surface(SurfacePotential("lj+cp", lj, self.table, zm))
        if variant == m["variant"]:
            self._tp = tp
        return tp


def build_model(cfg: RunConfig, threads: int = 1, cache: Path | None = None) -> Model:
    return Model(cfg, threads, cache)


def _header(ctx, **extra) -> dict:
    h = {"tool": f"smwss {__version__}", "command": ctx.command, "fingerprint": ctx.fingerprint}
    h.update({k: v for k, v in extra.items()})
    return h


class Context:
    def __init__(self, command, model: Model, out: Path, json_mirror: bool, manifest: Manifest):
        self.command = command
        self.model = model
        self.out = out
        self.json_mirror = json_mirror
        self.manifest = manifest
        self.fingerprint = manifest.fingerprint

    def write(self, name, columns, units, rows, **header):
        paths = write_table(self.out / name, columns, units, rows, _header(self, **header), self.json_mirror)
        self.manifest.add(paths)
        return paths


def cmd_cp_table(ctx: Context):
    t = ctx.model.table
    fit = extract_C3(t, max_flatness=1.0)
    rows = [(z * 1e9, V, -(z**3) * V / A03_EV) for z, V in zip(t.z, t.V)]
    ctx.manifest.notes.update(C3_a03eV=fit.C3_a03eV, flatness=fit.flatness)
    ctx.write("cp_table.csv", ["z", "V", "minus_z3V"], ["nm", "J", "a0^3 eV"], rows,
              C3=f"{fit.C3_a03eV!r} a0^3 eV", plateau_flatness=repr(fit.flatness),
              plateau_window_nm=f"{fit.window[0] * 1e9!r}..{fit.window[1] * 1e9!r}",
              table=t.fingerprint)


def _potential_grid(tp: TotalPotential, z_max: float, n: int) -> np.ndarray:
    a = tp.units.length_unit
    if tp.surface.variant == "lj+cp":
        z_lo = 0.9 * tp.surface.lj.z0 / a
        half = n // 2
        return np.concatenate([np.geomspace(z_lo, 1.0, half, endpoint=False), np.linspace(1.0, z_max, n - half)])
    return np.linspace(z_max / n, z_max, n)


def cmd_potential(ctx: Context):
    tp = ctx.model.potential()
    o = ctx.model.cfg["output"]
    z = _potential_grid(tp, o["potential_z_max"], o["potential_points"])
    from .potential import optical_potential

    Vs = tp.surface_lat(z) if tp.surface.variant != "none" else np.zeros_like(z)
    Vg = -tp.F * z
    Vop = optical_potential(z, tp.U) if tp.include_lattice else np.zeros_like(z)
    rows = zip(z, z * tp.units.length_unit * 1e9, Vs, Vg, Vop, tp(z))
    extra = {}
    if tp.surface.variant == "lj+cp":
        lj = tp.surface.lj
        extra = dict(z0=f"{lj.z0 / ANGSTROM!r} angstrom", D=f"{lj.D / electron_volt * 1e3!r} meV",
                     C3=f"{lj.C3 / A03_EV!r} a0^3 eV", z_m=f"{tp.surface.z_m * 1e9!r} nm")
    ctx.write("potential.csv", ["z", "z_nm", "V_s", "V_g", "V_op", "V_total"],
              ["lattice", "nm", "E_r", "E_r", "E_r", "E_r"], rows, U=f"{tp.U!r} E_r", **extra)


def _eigen_rows(res):
    rows = []
    prev = None
    for s in res.reported:
        interval = math.nan if prev is None else s.energy - prev
        rows.append((s.n, s.label, s.v, s.energy, interval, s.mean_z, s.surface_fraction))
        prev = s.energy
    return rows


EIGEN_COLUMNS = (["n", "label", "v", "energy", "interval", "mean_z", "surface_fraction"],
                 ["", "", "", "E_r", "E_r", "lattice", ""])


def _solve(ctx: Context, variant=None):
    tp = ctx.model.potential(variant)
    return tp, ctx.model.settings.run(tp)


def cmd_eigen(ctx: Context, variant=None, name="eigen.csv"):
    tp, res = _solve(ctx, variant)
    excluded = [s for s in res.states if not s.reported]
    ctx.manifest.notes.update(nodes=res.mesh.size, bound=len(res.bound()), excluded=len(excluded))
    ctx.write(name, *EIGEN_COLUMNS, _eigen_rows(res), variant=tp.surface.variant, U=f"{tp.U!r} E_r",
              window=f"{res.window[0]!r}..{res.window[1]!r} E_r", mesh_nodes=res.mesh.size,
              bloch_frequency=f"{tp.units.bloch_frequency!r} Hz",
              excluded_states=_count_labels(excluded))
    return res


def _count_labels(states) -> str:
    counts: dict[str, int] = {}
    for s in states:
        counts[s.label] = counts.get(s.label, 0) + 1
    return ";".join(f"{k}={v}" for k, v in sorted(counts.items())) or "none"


def cmd_perfect_surface(ctx: Context):
    return cmd_eigen(ctx, "perfect", "perfect_surface.csv")


def cmd_wavefunctions(ctx: Context):
    tp, res = _solve(ctx)
    wanted = ctx.model.cfg["output"]["states"]
    states = [s for s in res.reported if wanted is None or s.n in wanted]
    mesh = res.mesh
    zmax = mesh.z_max
    if tp.surface.variant == "lj+cp":
        z = np.concatenate([np.geomspace(mesh.z_min, 1.0, 2000, endpoint=False), np.linspace(1.0, zmax, int(100 * (zmax - 1)) + 1)])
    else:
        z = np.linspace(mesh.z_min, zmax, int(100 * (zmax - mesh.z_min)) + 1)
    cols = [np.interp(z, mesh.nodes, s.psi) for s in states]
    rows = [(zz, *(c[i] for c in cols)) for i, zz in enumerate(z)]
    ctx.write("wavefunctions.csv", ["z"] + [f"psi_{s.n}" for s in states],
              ["lattice"] + ["lattice^-1/2"] * len(states), rows,
              energies=";".join(f"{s.n}:{s.energy!r}" for s in states),
              labels=";".join(f"{s.n}:{s.label}" for s in states))


def _raman(ctx: Context) -> RamanConfig:
    r = ctx.model.cfg["raman"]
    return RamanConfig(4 * math.pi / (r["wavelength"] * 1e-9), r["intensity_floor"], r["include_bound"])


def cmd_raman_map(ctx: Context):
    tp, res = _solve(ctx)
    rc = _raman(ctx)
    P = np.abs(raman_matrix(res, rc.k_eff)) ** 2
    rep = res.reported
    rows = [(a.n, b.n, P[i, j]) for i, a in enumerate(rep) for j, b in enumerate(rep)]
    ctx.write("raman_map.csv", ["n", "m", "probability"], ["", "", ""], rows, k_eff=f"{rc.k_eff!r} 1/m")


def cmd_spectrum(ctx: Context):
    tp, res = _solve(ctx)
    rc = _raman(ctx)
    lines = stick_spectrum(res, rc)
    rows = [(l.n, l.m, l.frequency_offset, l.intensity) for l in lines]
    ctx.write("spectrum.csv", ["n", "m", "offset", "intensity"], ["", "", "Hz", ""], rows,
              k_eff=f"{rc.k_eff!r} 1/m", intensity_floor=repr(rc.intensity_floor),
              include_bound=rc.include_bound, bloch_frequency=f"{tp.units.bloch_frequency!r} Hz")


def cmd_scan_z0(ctx: Context):
    sc_cfg = ctx.model.cfg["scan"]
    tp = ctx.model.potential()
    values = np.linspace(sc_cfg["z0_start"], sc_cfg["z0_stop"], sc_cfg["z0_points"]) * ANGSTROM
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TrackingWarning)
        sc = scan_z0(tp, values, ctx.model.settings, threads=ctx.model.threads)
    rows = []
    for t in range(sc.tracks.shape[0]):
        for s, i in enumerate(sc.tracks[t]):
            if i < 0:
                continue
            st = sc.steps[s]
            rows.append((values[s] / ANGSTROM, t, st.labels[i], st.n[i], st.v[i], st.energies[i], st.mean_z[i],
                         st.slopes[i], sc.overlaps[t, s]))
    ctx.write("scan_z0.csv", ["z0", "track", "label", "n", "v", "energy", "mean_z", "slope", "overlap"],
              ["angstrom", "", "", "", "", "E_r", "lattice", "E_r/angstrom", ""], rows,
              C3=f"{tp.surface.lj.C3 / A03_EV!r} a0^3 eV")
    crows = [(c.value / ANGSTROM, c.track_a, c.track_b, c.kind, c.gap) for c in sc.crossings]
    ctx.write("scan_z0_crossings.csv", ["z0", "track_a", "track_b", "kind", "gap"],
              ["angstrom", "", "", "", "E_r"], crows)
    ctx.manifest.notes["tracking_warnings"] = {str(k): v for k, v in sc.warnings.items()}


def cmd_scan_c3(ctx: Context):
    sc_cfg = ctx.model.cfg["scan"]
    tp = ctx.model.potential()
    trans = tuple(map(tuple, sc_cfg["transitions"])) if sc_cfg["transitions"] else DEFAULT_TRANSITIONS
    sc = scan_c3(tp, sc_cfg["c3_factors"], sc_cfg["rescale_D"], trans, ctx.model.settings, ctx.model.threads)
    d = sc.deltas
    rows = [(f, n, m, sc.frequencies[i, k], d[i, k])
            for i, f in enumerate(sc.factors) for k, (n, m) in enumerate(sc.transitions)]
    ctx.write("scan_c3.csv", ["factor", "n", "m", "frequency", "delta"], ["", "", "", "Hz", "Hz"], rows,
              rescale_D=sc.rescale_D, min_overlap=repr(sc.min_overlap))
    u = infer_c3_uncertainty(sc, sc_cfg["freq_uncertainty"])
    urows = [(n, m, sc_cfg["freq_uncertainty"] / x if math.isfinite(x) else 0.0, x)
             for (n, m), x in zip(sc.transitions, u)]
    ctx.write("c3_uncertainty.csv", ["n", "m", "sensitivity", "dC3_over_C3"], ["", "", "Hz", ""], urows,
              freq_uncertainty=f"{sc_cfg['freq_uncertainty']!r} Hz")


COMMANDS = {
    "cp-table": (cmd_cp_table, "tabulate the Casimir-Polder potential and extract C3"),
    "potential": (cmd_potential, "export the total potential and its parts"),
    "eigen": (cmd_eigen, "energies, intervals, <z> and labels of the window states"),
    "wavefunctions": (cmd_wavefunctions, "export wavefunction profiles"),
    "raman-map": (cmd_raman_map, "Raman transition probabilities between all window states"),
    "spectrum": (cmd_spectrum, "Raman stick spectrum (offsets from the hyperfine frequency)"),
    "scan-z0": (cmd_scan_z0, "spectra versus the Lennard-Jones distance at fixed C3"),
    "scan-c3": (cmd_scan_c3, "transition frequency changes versus C3 and inferred uncertainty"),
    "perfect-surface": (cmd_perfect_surface, "Wannier-Stark ladder above an impenetrable surface"),
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smwss", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"smwss {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        s = sub.add_parser(name, help=help_, description=help_)
        s.add_argument("--config", metavar="PATH", help="TOML configuration file")
        s.add_argument("--out", metavar="DIR", help=f"output directory (overrides ${OUT_ENV} and output.dir)")
        s.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                       help="override a configuration value, e.g. model.U=5")
        s.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads (default 1)")
        s.add_argument("--format", choices=("csv", "csv+json"), default=None, help="output format")
        s.add_argument("--cache", metavar="DIR", default=None,
                       help=f"CP table cache (default ${CACHE_ENV} or ~/.cache/smwss; 'none' disables)")
    return p


def _fail(exc: BaseException, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(doc), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = parse_config(args.config, args.overrides)
        fmt = args.format or cfg["output"]["format"]
        out = Path(args.out or os.environ.get(OUT_ENV) or cfg["output"]["dir"])
        model = build_model(cfg, args.threads, _cache_dir(args.cache))
        manifest = Manifest(args.command, cfg.fingerprint, __version__, cfg.to_dict())
        ctx = Context(args.command, model, out, fmt == "csv+json", manifest)
        COMMANDS[args.command][0](ctx)
        path = manifest.write(out)
        print(json.dumps({"status": "ok", "outputs": sorted(manifest.outputs), "manifest": str(path)}))
        return 0
    except SmwssError as exc:
        return _fail(exc, exc.exit_code)
    except MemoryError as exc:
        return _fail(exc, 4)
    except OSError as exc:
        return _fail(exc, 2)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
