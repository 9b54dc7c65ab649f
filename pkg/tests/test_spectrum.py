import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smwss.eigen import SolverSettings, solve, uniform_mesh
from smwss.errors import DomainError, TrackingWarning
from smwss.potential import SurfacePotential, TotalPotential
from smwss.spectrum import (
    C3ScanResult,
    RamanConfig,
    ScanStep,
    find_crossings,
    infer_c3_uncertainty,
    raman_amplitude,
    raman_matrix,
    scan_c3,
    scan_z0,
    stick_spectrum,
    track_states,
    with_short_range,
)
from smwss.units import DEFAULT_UNITS, bloch_frequency

K = RamanConfig().k_eff
NU_B = bloch_frequency(DEFAULT_UNITS.lambda_l, DEFAULT_UNITS.atom_mass, DEFAULT_UNITS.g)
TOY = SolverSettings(density=600.0, lattice_points=200)


@pytest.fixture(scope="module")
def ladder():
    """Pure Wannier-Stark ladder (no surface) on a long domain."""
    tp = TotalPotential(3.0, SurfacePotential("none"))
    return solve(tp, uniform_mesh(0.0, 40.0, 200), (-5.0, 30.0))


def _interior(res, lo=12, hi=28):
    return [s for s in res.reported if lo < s.mean_z < hi]


def test_zero_k_is_identity(ladder, coarse_result):
    for r in (ladder, coarse_result):
        A = raman_matrix(r, 0.0)
        assert np.abs(A - np.eye(len(A))).max() < 1e-8


def test_conjugation_symmetry(ladder):
    s = ladder.reported
    for n, m in [(3, 4), (5, 9), (10, 10)]:
        a = raman_amplitude(s[n], s[m], ladder.mesh, K)
        b = raman_amplitude(s[m], s[n], ladder.mesh, -K)
        assert abs(a) == pytest.approx(abs(b), rel=1e-12, abs=0)
        assert a == pytest.approx(b.conjugate(), rel=1e-12, abs=0)


def test_amplitude_errors(ladder, coarse_result):
    with pytest.raises(DomainError):
        raman_amplitude(ladder.reported[0], coarse_result.reported[0], ladder.mesh, K)
    with pytest.raises(DomainError):
        RamanConfig(k_eff=0.0)


def test_sum_rule(ladder):
    tp = ladder.potential
    wide = solve(tp, ladder.mesh, (-5.0, 200.0))
    narrow_sum = np.sum(np.abs(raman_matrix(ladder, K, ladder.states)) ** 2, axis=1)
    wide_sum = np.sum(np.abs(raman_matrix(wide, K, wide.states)) ** 2, axis=1)
    assert np.all(narrow_sum <= 1 + 1e-12) and np.all(wide_sum <= 1 + 1e-12)
    for i, s in enumerate(ladder.states):
        if 15 < s.mean_z < 25 and s.reported:
            j = next(k for k, t in enumerate(wide.states) if abs(t.energy - s.energy) < 1e-9)
            assert wide_sum[j] >= narrow_sum[i] - 1e-12
            assert wide_sum[j] > 0.999


def test_far_ladder_depends_on_distance_only(ladder):
    st = _interior(ladder)
    I = np.abs(raman_matrix(ladder, K, st)) ** 2
    for d in range(0, 7):
        vals = np.diagonal(I, d)
        assert np.ptp(vals) <= 0.01 * vals.mean()
    # appreciable coupling reaches about six neighbours
    row = I[len(st) // 2]
    c = len(st) // 2
    reach = max(abs(j - c) for j in range(len(st)) if row[j] > 1e-3)
    assert 5 <= reach <= 7


def test_far_ladder_default_model(coarse_result):
    st = [s for s in coarse_result.reported if s.n >= 12 and s.edge_fraction < 1e-4]
    assert len(st) >= 5
    I = np.abs(raman_matrix(coarse_result, K, st)) ** 2
    for d in range(0, len(st) - 1):
        vals = np.diagonal(I, d)
        assert np.ptp(vals) <= 0.01 * vals.mean()


def test_pure_ladder_lines_at_bloch_multiples(ladder):
    keep = {s.n for s in _interior(ladder)}
    lines = [l for l in stick_spectrum(ladder) if l.n in keep and l.m in keep]
    assert lines
    for l in lines:
        k = round(l.frequency_offset / NU_B)
        assert abs(l.frequency_offset - k * NU_B) < 0.2
        assert 0.0 <= l.intensity <= 1.0


def test_default_lines_bundle(coarse_result):
    lines = [l for l in stick_spectrum(coarse_result) if l.n >= 9 and l.m >= 9]
    assert lines
    for l in lines:
        assert abs(l.frequency_offset - round(l.frequency_offset / NU_B) * NU_B) < 5.0


def test_offsets_antisymmetric(coarse_result):
    lines = {(l.n, l.m): l for l in stick_spectrum(coarse_result, include_bound=True)}
    assert any(coarse_result.reported[0].n in k for k in lines)
    for (n, m), l in lines.items():
        assert lines[(m, n)].frequency_offset == -l.frequency_offset
        assert lines[(m, n)].intensity == pytest.approx(l.intensity, rel=1e-10, abs=0)
    no_bound = stick_spectrum(coarse_result)
    bound = {s.n for s in coarse_result.bound()}
    assert not any(l.n in bound or l.m in bound for l in no_bound)


def test_intensity_floor(coarse_result):
    lines = stick_spectrum(coarse_result, RamanConfig(intensity_floor=1e-3))
    assert all(l.intensity >= 1e-3 for l in lines)
    assert len(lines) < len(stick_spectrum(coarse_result))


def test_empty_window(ladder):
    res = solve(ladder.potential, ladder.mesh, (-100.0, -90.0))
    assert res.reported == []
    assert stick_spectrum(res) == []


# tracking on synthetic steps

GRID = np.linspace(0.0, 10.0, 2001)


def _gauss(c):
    g = np.exp(-((GRID - c) ** 2))
    return g / np.sqrt(np.sum(g * g) * (GRID[1] - GRID[0]))


def _step(x, E, psi):
    return ScanStep(x, np.asarray(E, float), np.zeros(len(E)), ["smwss"] * len(E), list(range(1, len(E) + 1)),
                    [None] * len(E), np.asarray(psi, np.float32))


def _avoided(xs, g):
    """Two-level model: diabatic states at 3 and 7 with energies +-x, coupling g."""
    a, b = _gauss(3.0), _gauss(7.0)
    steps = []
    for x in xs:
        H = np.array([[x, g], [g, -x]])
        E, V = np.linalg.eigh(H)
        psi = [V[0, k] * a + V[1, k] * b for k in range(2)]
        steps.append(_step(x, E, psi))
    return steps


def test_avoided_crossing_detected():
    xs = np.linspace(-1, 1, 21)
    steps = _avoided(xs, 0.1)
    tracks, ov, warn = track_states(steps, GRID)
    assert not warn
    cross = find_crossings(xs, steps, tracks, threshold=0.5, overlaps=ov)
    assert len(cross) == 1
    c = cross[0]
    assert c.kind == "minimum" and c.value == pytest.approx(0.0, abs=1e-12)
    assert c.gap == pytest.approx(0.2, rel=1e-6, abs=0)


def test_diabatic_swap_detected():
    xs = np.linspace(-1, 1, 20)
    a, b = _gauss(3.0), _gauss(7.0)
    steps = [_step(x, [x, -x], [a, b]) for x in xs]
    tracks, ov, _ = track_states(steps, GRID)
    cross = find_crossings(xs, steps, tracks, threshold=0.05, overlaps=ov)
    assert [c.kind for c in cross] == ["swap"]


def test_abrupt_change_warns():
    steps = [_step(0.0, [0.0], [_gauss(3.0)]), _step(1.0, [0.0], [_gauss(7.0)])]
    with pytest.warns(TrackingWarning):
        _, _, warn = track_states(steps, GRID)
    assert 1 in warn


@settings(max_examples=30, deadline=None)
@given(st.permutations(range(5)), st.permutations(range(5)))
def test_tracking_forward_backward(p1, p2):
    centers = [1.5, 3.0, 4.5, 6.0, 7.5]
    base = [_gauss(c) for c in centers]
    order = [list(range(5)), list(p1), list(p2)]
    steps = [_step(i, np.arange(5) * 0.1, [base[k] for k in o]) for i, o in enumerate(order)]
    fwd, _, _ = track_states(steps, GRID)
    bwd, _, _ = track_states(steps[::-1], GRID)
    # follow each initial state forward, then back along the backward tracks
    for t in range(5):
        end = fwd[t, -1]
        tb = int(np.nonzero(bwd[:, 0] == end)[0][0])
        assert bwd[tb, -1] == fwd[t, 0]
        assert all(order[s][fwd[t, s]] == order[0][t] for s in range(3))


# scans at toy resolution


def test_c3_uncertainty_algebra():
    f = np.array([0.99, 1.0, 1.01])
    freqs = np.array([[10.0, 5.0, 1.0], [10.5, 5.0, 2.0], [11.0, 5.0, 3.0]])
    scan = C3ScanResult(f, True, ((6, 7), (7, 8), (8, 9)), freqs, np.zeros((3, 1)), np.zeros(1), 1.0)
    np.testing.assert_allclose(scan.deltas[1], 0.0)
    u1 = infer_c3_uncertainty(scan, 0.02)
    u2 = infer_c3_uncertainty(scan, 0.04)
    np.testing.assert_allclose(u2[np.isfinite(u2)], 2 * u1[np.isfinite(u1)])
    assert np.isinf(u1[1])
    sens = 1.0 / (np.log(1.01) - np.log(0.99))
    assert u1[0] == pytest.approx(0.02 / sens, rel=1e-6, abs=0)
    with pytest.raises(DomainError):
        infer_c3_uncertainty(C3ScanResult(f[1:], True, (), freqs[1:], freqs[1:], np.zeros(1), 1.0))


@pytest.fixture(scope="module")
def toy_c3(default_tp):
    return {flag: scan_c3(default_tp, rescale_D=flag, settings=TOY, threads=2) for flag in (True, False)}


def test_scan_c3_structure(toy_c3, default_tp):
    s = toy_c3[True]
    assert s.frequencies.shape == (3, len(s.transitions))
    np.testing.assert_array_equal(s.deltas[1], 0.0)
    assert s.min_overlap > 0.5
    u = infer_c3_uncertainty(s)
    assert np.all(u > 0)
    with pytest.raises(DomainError):
        scan_c3(default_tp, transitions=((6, 200),), settings=TOY)
    with pytest.raises(DomainError):
        scan_c3(default_tp, factors=(0.0, 1.0), settings=TOY)


def test_rescale_flag_semantics(default_tp):
    lj = default_tp.surface.lj
    a = with_short_range(default_tp, z0=lj.z0, cp_scale=1.01, z_m=default_tp.surface.z_m)
    b = with_short_range(default_tp, D=lj.D, cp_scale=1.01, z_m=default_tp.surface.z_m)
    assert a.surface.lj.z0 == lj.z0 and a.surface.lj.D == pytest.approx(1.01 * lj.D, rel=1e-6, abs=0)
    assert b.surface.lj.D == pytest.approx(lj.D, rel=1e-6, abs=0) and b.surface.lj.z0 == pytest.approx(lj.z0 * 1.01 ** (1 / 3), rel=1e-6, abs=0)
    assert a.surface.lj.C3 == pytest.approx(1.01 * lj.C3, rel=1e-6, abs=0)
    assert a.surface.cp_table(1e-8) == pytest.approx(1.01 * default_tp.surface.cp_table(1e-8), rel=1e-6, abs=0)


def test_scan_z0_toy(default_tp):
    z0 = np.array([2.29e-10, 2.30e-10, 2.31e-10])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TrackingWarning)
        scan = scan_z0(default_tp, z0, TOY, threads=3)
    assert len(scan.steps) == 3 and scan.parameter == "z0"
    for step in scan.steps:
        assert np.all(step.slopes > 0)
        assert step.labels.count("surface-bound") >= 1
    # the far ladder is untouched
    far = [t for t in range(len(scan.tracks)) if np.all(scan.tracks[t] >= 0) and scan.steps[0].mean_z[scan.tracks[t, 0]] > 9]
    assert far
    for t in far:
        assert np.ptp(scan.energy(t)) < 1e-6
        assert np.all(scan.overlaps[t, 1:] > 0.99)
    with pytest.raises(DomainError):
        scan_z0(default_tp, z0[::-1], TOY)
