"""Casimir-Polder attraction of Rb-87 above a dielectric Bragg mirror.

Run from the repository root::

    python demos/01_casimir_polder.py

The first run tabulates the potential (about a minute on one core) and
caches it under ``.smwss-cache``; later runs reuse the table.
"""

import numpy as np

from smwss import CPConfig, PerfectMirror, cp_potential, extract_C3, load_atom, load_or_tabulate, load_stack
from smwss.casimir import A03_EV

atom = load_atom("rb87")
mirror = load_stack("bragg532")
table = load_or_tabulate(CPConfig(300.0, atom, mirror), ".smwss-cache")

# z^3 |V| is flat where the van der Waals law holds and drops once retardation sets in
print("   z [nm]    z^3 |V| [a0^3 eV]")
for z in np.geomspace(1e-9, 5e-6, 12):
    print(f"{z * 1e9:9.2f}    {-z**3 * table(z) / A03_EV:8.4f}")

fit = extract_C3(table)
lo, hi = fit.window
print(f"\nC3 = {fit.C3_a03eV:.4f} a0^3 eV from {lo * 1e9:.2f}-{hi * 1e9:.2f} nm (spread {fit.flatness:.2%})")

# an ideal conductor attracts harder than the dielectric mirror
ideal = CPConfig(300.0, atom, PerfectMirror())
for z in (2e-9, 100e-9):
    print(f"V(ideal)/V(stack) at {z * 1e9:5.0f} nm: {cp_potential(z, ideal) / table(z):.2f}")
