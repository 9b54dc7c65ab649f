import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.constants import e, epsilon_0, hbar, physical_constants

from smwss.atom import AtomModel, TransitionLine, load_atom, polarizability_a03, polarizability_imag
from smwss.errors import ConfigError, DomainError

A0 = physical_constants["Bohr radius"][0]
EA0 = e * A0

lines_st = st.lists(st.tuples(st.floats(1e14, 1e17), st.floats(0.1, 5.0)), min_size=1, max_size=5)


def atom_from(pairs):
    return AtomModel("x", 1e-25, tuple(TransitionLine(w, d * EA0) for w, d in pairs))


def test_single_line_static():
    w, d = 2.4e15, 2.0 * EA0
    a = AtomModel("x", 1e-25, (TransitionLine(w, d),))
    assert polarizability_imag(a, 0.0) == pytest.approx(2 * d**2 / (hbar * w), rel=1e-14, abs=0)


@given(lines_st)
def test_monotone_decreasing(pairs):
    a = polarizability_imag(atom_from(pairs), np.geomspace(1e10, 1e20, 100))
    assert np.all(a > 0) and np.all(np.diff(a) < 0)


@given(lines_st)
def test_high_frequency_asymptote(pairs):
    atom = atom_from(pairs)
    xi = 1e3 * max(w for w, _ in pairs)
    limit = 2 / hbar * sum(l.omega * l.dipole**2 for l in atom.lines)
    assert polarizability_imag(atom, xi) * xi**2 == pytest.approx(limit, rel=1e-2, abs=0)


@given(lines_st, lines_st, st.floats(0, 1e17))
def test_additivity(p, q, xi):
    a, b = atom_from(p), atom_from(q)
    total = polarizability_imag(a.merged(b), xi)
    assert total == pytest.approx(polarizability_imag(a, xi) + polarizability_imag(b, xi), rel=1e-13, abs=0)


def test_shipped_rb87_static_polarizability():
    atom = load_atom("rb87")
    assert {l.label for l in atom.lines} == {"D1", "D2"}
    vol = polarizability_imag(atom, 0.0) / (4 * math.pi * epsilon_0)
    assert vol == pytest.approx(47.4e-30, rel=0.10, abs=0)
    assert polarizability_a03(atom, 0.0) == pytest.approx(vol / A0**3, rel=1e-6, abs=0)


def test_extended_file_adds_strength():
    base, ext = load_atom("rb87"), load_atom("rb87_extended")
    assert len(ext.lines) > len(base.lines)
    assert polarizability_imag(ext, 0.0) > polarizability_imag(base, 0.0)


def test_scaled_atom_scales_polarizability():
    atom = load_atom("rb87")
    assert polarizability_imag(atom.scaled(1.7), 3e15) == pytest.approx(1.7 * polarizability_imag(atom, 3e15), rel=1e-6, abs=0)


def test_errors(tmp_path):
    with pytest.raises(ConfigError):
        polarizability_imag(AtomModel("empty", 1e-25, ()), 0.0)
    with pytest.raises(DomainError):
        polarizability_imag(load_atom("rb87"), -1.0)
    with pytest.raises(ConfigError):
        TransitionLine(-1.0, 1.0)
    with pytest.raises(ConfigError):
        AtomModel("x", 0.0, ())
    bad = tmp_path / "a.json"
    bad.write_text(json.dumps({"name": "x", "mass_kg": 1e-25, "lines": [{"wavelength_nm": 780}]}))
    with pytest.raises(ConfigError, match="dipole"):
        load_atom(bad)
    bad.write_text("{\n  \"name\": \"x\",\n  nope\n}")
    with pytest.raises(ConfigError, match="line 3"):
        load_atom(bad)
    with pytest.raises(ConfigError):
        load_atom("no-such-atom")


def test_units_in_file(tmp_path):
    f = tmp_path / "a.json"
    w = 2.4e15
    f.write_text(json.dumps({"name": "x", "mass_kg": 1e-25,
                             "lines": [{"omega_rad_s": w, "dipole_Cm": 2 * EA0}]}))
    g = tmp_path / "b.json"
    g.write_text(json.dumps({"name": "x", "mass_kg": 1e-25,
                             "lines": [{"wavelength_nm": 2 * math.pi * 299792458 / w * 1e9, "dipole_ea0": 2.0}]}))
    assert polarizability_imag(load_atom(f), 1e15) == pytest.approx(polarizability_imag(load_atom(g), 1e15), rel=1e-9, abs=0)
