import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.constants import c as C, epsilon_0, hbar, k as K_B

from smwss.atom import AtomModel, TransitionLine, load_atom, polarizability_imag
from smwss.casimir import (
    A03_EV,
    CPConfig,
    PotentialTable,
    cp_k_integral,
    cp_potential,
    extract_C3,
    load_or_tabulate,
    matsubara_frequencies,
    tabulate,
)
from smwss.errors import AccuracyError, DomainError, ExtrapolationError
from smwss.optics import VACUUM, LayerStack, PerfectMirror, load_stack

RB = load_atom("rb87")
MIRROR = PerfectMirror()


def ideal_mirror(z, xi, kernel):
    """Closed form of the k integral for rho_TE = -1, rho_TM = +1."""
    x = xi * z / C
    poly = 1 + 2 * x + (2 if kernel == "lifshitz" else 4) * x * x
    return -math.exp(-2 * x) * poly / (2 * z**3)


def test_matsubara_examples():
    assert matsubara_frequencies(300.0, 0) == 0.0
    assert matsubara_frequencies(300.0, 1) == pytest.approx(2.47e14, rel=5e-3, abs=0)
    assert matsubara_frequencies(600.0, 3) == pytest.approx(6 * matsubara_frequencies(300.0, 1), rel=1e-6, abs=0)
    with pytest.raises(DomainError):
        matsubara_frequencies(300.0, -1)


@given(st.floats(1e-10, 1e-5), st.floats(0, 1e17), st.sampled_from(["printed", "lifshitz"]))
def test_k_integral_ideal_mirror_closed_form(z, xi, kernel):
    expected = ideal_mirror(z, xi, kernel)
    assert cp_k_integral(z, xi, MIRROR, kernel=kernel) == pytest.approx(expected, rel=1e-9, abs=1e-300)


def test_transparent_mirror_gives_zero():
    s = LayerStack((), VACUUM)
    assert cp_k_integral(1e-8, 1e15, s) == 0.0


def test_exponential_suppression_at_large_xi_z():
    stack = load_stack("bragg532")
    xi, z = 1e16, 1e-6
    x = xi * z / C
    ratio = cp_k_integral(2 * z, xi, stack) / cp_k_integral(z, xi, stack)
    assert math.exp(-2 * x) / 100 < ratio < math.exp(-2 * x)


def test_k_integral_domain():
    with pytest.raises(DomainError):
        cp_k_integral(0.0, 1e15, MIRROR)
    with pytest.raises(DomainError):
        cp_k_integral(1e-9, -1.0, MIRROR)


def test_ideal_mirror_potential_matches_oracle():
    """Full Matsubara sum against an independent evaluation of the closed form."""
    cfg = CPConfig(300.0, RB, MIRROR, k_measure="physical", kernel="lifshitz")
    for z in (2e-9, 50e-9, 1e-6, 5e-6):
        n = np.arange(200000)
        xi = matsubara_frequencies(300.0, n)
        a = polarizability_imag(RB, xi) / (4 * math.pi * epsilon_0)
        x = xi * z / C
        terms = K_B * 300.0 * a * (-np.exp(-2 * x) * (1 + 2 * x + 2 * x * x) / (2 * z**3))
        terms[0] *= 0.5
        assert cp_potential(z, cfg) == pytest.approx(math.fsum(terms), rel=1e-3, abs=0)


@pytest.mark.parametrize("kernel", ["lifshitz", "printed"])
def test_ideal_mirror_non_retarded_C3(kernel):
    # C3 = sum_j d_j^2 / (16 pi eps0) for a perfect reflector (physical measure)
    cfg = CPConfig(300.0, RB, MIRROR, k_measure="physical", kernel=kernel)
    c3 = sum(l.dipole**2 for l in RB.lines) / (16 * math.pi * epsilon_0)
    # retardation is still 0.5% at 1 nm with the textbook kernel
    z = 1e-10
    assert -cp_potential(z, cfg) * z**3 == pytest.approx(c3, rel=1e-3, abs=0)


def test_measures_are_rescalings():
    z = 20e-9
    base = cp_potential(z, CPConfig(300.0, RB, MIRROR, k_measure="physical"))
    assert cp_potential(z, CPConfig(300.0, RB, MIRROR, k_measure="fourier")) == pytest.approx(base / (2 * math.pi), rel=1e-6, abs=0)
    assert cp_potential(z, CPConfig(300.0, RB, MIRROR, k_measure="literal")) == pytest.approx(base * 2 * math.pi, rel=1e-6, abs=0)


def test_linearity_in_polarizability():
    stack = load_stack("bragg532")
    z = np.array([1e-9, 1e-7, 3e-6])
    v1 = cp_potential(z, CPConfig(300.0, RB, stack))
    v2 = cp_potential(z, CPConfig(300.0, RB.scaled(2.0), stack))
    np.testing.assert_allclose(v2, 2 * v1, rtol=1e-8)


def test_self_convergence_at_100nm():
    stack = load_stack("bragg532")
    v = cp_potential(100e-9, CPConfig(300.0, RB, stack))
    v_half_tol = cp_potential(100e-9, CPConfig(300.0, RB, stack, matsubara_rel_tol=5e-9))
    assert abs(v_half_tol - v) < 1e-8 * abs(v)
    v_fine = cp_potential(100e-9, CPConfig(300.0, RB, stack, matsubara_rel_tol=5e-9, k_quadrature_order=128))
    assert abs(v_fine - v) < 1e-6 * abs(v)


def test_term_cap():
    with pytest.raises(AccuracyError):
        cp_potential(1e-9, CPConfig(300.0, RB, MIRROR, n_max=40))


def test_config_validation():
    with pytest.raises(DomainError):
        CPConfig(0.0, RB, MIRROR)
    with pytest.raises(DomainError):
        CPConfig(300.0, RB, MIRROR, matsubara_rel_tol=1e-3)
    with pytest.raises(DomainError):
        CPConfig(300.0, RB, MIRROR, k_quadrature_order=10)
    with pytest.raises(DomainError):
        CPConfig(300.0, RB, MIRROR, kernel="other")


# shipped mirror (session table)


def test_table_attractive_and_monotone(cp_table):
    assert np.all(cp_table.V < 0)
    assert np.all(np.diff(np.abs(cp_table.V)) < 0)
    assert cp_table.z_range == pytest.approx((0.5e-9, 1e-5), rel=1e-6, abs=0)


def test_shipped_C3(cp_table):
    fit = extract_C3(cp_table)
    assert 2.6 <= fit.C3_a03eV <= 4.0
    assert fit.flatness < 0.05
    z = np.geomspace(1e-9, 1e-8, 50)
    zv = -(z**3) * cp_table(z)
    assert (zv.max() - zv.min()) / np.median(zv) < 0.05


def test_retardation(cp_table):
    c3 = extract_C3(cp_table).C3
    z = np.geomspace(100e-9, 1e-5, 100)
    r = -(z**3) * cp_table(z) / c3
    assert np.all(r <= 1) and np.all(np.diff(r) < 0)
    assert -(3e-6) ** 3 * cp_table(3e-6) / c3 < 0.7


def test_spline_interpolation_error(cp_table):
    cfg = CPConfig(300.0, RB, load_stack("bragg532"))
    i = np.linspace(5, len(cp_table.z) - 6, 5).astype(int)
    z = np.sqrt(cp_table.z[i] * cp_table.z[i + 1])
    np.testing.assert_allclose(cp_table(z), cp_potential(z, cfg), rtol=1e-4)


def test_extract_C3_synthetic():
    z = np.geomspace(0.5e-9, 1e-6, 200)
    A = 2.5 * A03_EV
    assert extract_C3(PotentialTable(z, -A / z**3)).C3 == pytest.approx(A, rel=1e-12, abs=0)
    assert extract_C3(PotentialTable(z, -A / z**3)).flatness < 1e-12
    with pytest.raises(AccuracyError):
        extract_C3(PotentialTable(z, -A * 1e-9 / z**4))
    with pytest.raises(DomainError):
        extract_C3(PotentialTable(z, -A / z**3), z_range=(1e-10, 1e-9))


def test_table_validation_and_io(tmp_path):
    z = np.geomspace(1e-9, 1e-6, 30)
    t = PotentialTable(z, -1e-50 / z**3, {"note": "x"})
    with pytest.raises(ExtrapolationError):
        t(2e-6)
    with pytest.raises(DomainError):
        PotentialTable(z, 1e-50 / z**3)
    with pytest.raises(DomainError):
        PotentialTable(z[::-1], -1e-50 / z**3)
    p = tmp_path / "t.npz"
    t.save(p)
    u = PotentialTable.load(p)
    np.testing.assert_array_equal(u.V, t.V)
    assert u.metadata == t.metadata
    np.savez(p, z=z, V=t.V, version=99, metadata="{}")
    with pytest.raises(DomainError):
        PotentialTable.load(p)


def test_scaled_table():
    z = np.geomspace(1e-9, 1e-6, 30)
    t = PotentialTable(z, -1e-50 / z**3)
    s = t.scaled(1.5).scaled(2.0)
    assert s.metadata["scale"] == 3.0
    assert s(1e-8) == pytest.approx(3 * t(1e-8), rel=1e-6, abs=0)


def test_tabulation_deterministic_and_cached(tmp_path):
    cfg = CPConfig(300.0, RB, load_stack("bragg532"))
    z = np.geomspace(1e-9, 1e-6, 7)
    a = tabulate(cfg, z, threads=1)
    b = tabulate(cfg, z, threads=3)
    np.testing.assert_array_equal(a.V, b.V)
    c = load_or_tabulate(cfg, tmp_path, z)
    files = list(tmp_path.glob("cp_*.npz"))
    assert len(files) == 1
    d = load_or_tabulate(cfg, tmp_path, z)
    np.testing.assert_array_equal(c.V, d.V)
    load_or_tabulate(CPConfig(310.0, RB, load_stack("bragg532")), tmp_path, z)
    assert len(list(tmp_path.glob("cp_*.npz"))) == 2
