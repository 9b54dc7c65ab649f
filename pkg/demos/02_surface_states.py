"""Energy levels of an atom in a vertical lattice just above the mirror.

The total potential is the optical lattice, gravity and the surface term
(Lennard-Jones core joined to the Casimir-Polder tail).  Near the surface
the Wannier-Stark ladder is distorted; far away it recovers the uniform
Bloch spacing.  Run from the repository root after ``01_casimir_polder.py``.
"""

from smwss import SolverSettings, assemble
from smwss.cli import build_model
from smwss.config import parse_config

model = build_model(parse_config(None), threads=1, cache=".smwss-cache")
tp = assemble(model.table)
print(f"well depth D = {tp.depth:.3g} E_r, matching at z_m = {tp.surface.z_m * 1e9:.2f} nm")

res = SolverSettings().run(tp)
print("\n  n  label           E [E_r]   E_n - E_(n-1)   <z> [lattice]")
for s, de in zip(res.reported, res.intervals):
    print(f"{s.n:3d}  {s.label:<14s} {s.energy:9.4f}   {de:10.4f}     {s.mean_z:8.3f}")

# far from the surface the spacing tends to the gravitational slope
print(f"\nuniform ladder spacing F = {tp.F:.5f} E_r")

perfect = SolverSettings().run(assemble(None, variant="perfect"))
print("hard-wall intervals:", " ".join(f"{x:.4f}" for x in perfect.intervals[1:8]))
