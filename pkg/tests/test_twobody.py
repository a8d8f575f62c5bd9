import numpy as np
import pytest
from conftest import MU_STAR_ZERO_RANGE
from oracles import zero_range_bound_state

from lattice_efimov.greens import lattice_green
from lattice_efimov.kernel import count_below
from lattice_efimov.potential import nearest_neighbor, zero_range
from lattice_efimov.torus import TorusGrid, twobody_band
from lattice_efimov.twobody import (
    ConditioningError,
    ThresholdError,
    bound_state_energy,
    build_G,
    build_h,
    calibrate_resonance,
    count_two_body,
    difference_quotient,
    expansion_check_G,
    reduced_G,
    resonance_witness_w,
    two_body_counts,
)


def test_reduced_G_zero_range_is_scalar_green():
    k = np.array([0.2, 0.1, 0.0])
    assert reduced_G(zero_range(2.5), k, -0.3)[0, 0] == pytest.approx(2.5 * lattice_green([(0, 0, 0)], k, -0.3)[0])


def test_G_matrices_symmetric_psd(grid8):
    pot = nearest_neighbor(1.0, 0.3, mu=2.0)
    for inner in ("exact", "grid"):
        G = build_G(pot, np.array([0.5, 0.0, 0.25]), -0.4, grid8, inner=inner)
        assert G.is_symmetric()
        assert G.eigenvalues()[0] > -1e-12
        # finite rank: at most the size of the support
        assert np.count_nonzero(G.eigenvalues() > 1e-10) <= len(pot.sites)


def test_exact_G_spectrum_matches_reduced(grid8):
    pot = nearest_neighbor(1.0, 0.3, mu=2.0)
    k = np.array([0.5, 0.0, 0.25])
    top = np.sort(build_G(pot, k, -0.4, grid8).eigenvalues())[-7:]
    assert np.allclose(top, np.linalg.eigvalsh(reduced_G(pot, k, -0.4)), atol=1e-12)


def test_grid_resolvent_threshold(grid8):
    pot = zero_range(1.0)
    with pytest.raises(ThresholdError):
        build_G(pot, np.zeros(3), 0.0, grid8, inner="grid")
    with pytest.raises(ValueError):
        build_G(pot, np.zeros(3), -1.0, grid8, inner="bogus")


def test_birman_schwinger_counts_small_cases(grid8):
    assert two_body_counts(zero_range(0.0), np.zeros(3), -0.1, grid8) == (0, 0)
    pot = nearest_neighbor(1.0, 0.5, mu=8.0)
    d, b = two_body_counts(pot, np.array([0.3, 0.0, 0.0]), -0.5, grid8)
    assert d == b > 0
    assert count_two_body(pot, np.array([0.3, 0.0, 0.0]), -0.5, grid8) == d


def test_zero_range_calibration(zr_cal):
    assert zr_cal.mu_star == pytest.approx(MU_STAR_ZERO_RANGE, rel=1e-10)
    assert zr_cal.residual < 1e-12
    # rank one: phi(0)^2 = mu*
    assert zr_cal.phi0**2 == pytest.approx(zr_cal.mu_star, rel=1e-10)
    assert zr_cal.grid.weight * np.sum(zr_cal.psi**2) == pytest.approx(1.0)
    assert zr_cal.witness_limit == pytest.approx(8 * np.pi / zr_cal.mu_star)


def test_calibration_other_shapes(grid8):
    for pot in (nearest_neighbor(1.0, 0.3), nearest_neighbor(0.2, 1.0), zero_range(7.0)):
        cal = calibrate_resonance(pot, grid8)
        assert np.linalg.eigvalsh(reduced_G(cal.potential, np.zeros(3), 0.0))[-1] == pytest.approx(1.0, abs=1e-12)
    # the shape's own mu is ignored: only the shape matters
    assert calibrate_resonance(zero_range(7.0), grid8).mu_star == pytest.approx(MU_STAR_ZERO_RANGE)
    with pytest.raises(ValueError):
        calibrate_resonance(zero_range(0.0), grid8)


def test_bound_state_at_resonance(zr_cal):
    pot = zr_cal.potential
    assert bound_state_energy(pot, np.zeros(3)) == 0.0
    assert bound_state_energy(pot.with_mu(0.5 * zr_cal.mu_star), np.zeros(3)) is None
    assert bound_state_energy(pot.with_mu(0.5 * zr_cal.mu_star), np.array([0.4, 0, 0])) is None
    for k in ([0.5, 0, 0], [0.3, 0.2, -0.1], [1.5, 1.0, 0.2]):
        k = np.array(k)
        z = bound_state_energy(pot, k)
        assert 0 < z < twobody_band(k)[0]
        assert z == pytest.approx(zero_range_bound_state(MU_STAR_ZERO_RANGE, k), abs=1e-10)


def test_bound_state_monotone_in_coupling():
    k = np.array([0.7, 0.0, 0.3])
    z = [bound_state_energy(zero_range(m), k) for m in (4.0, 5.0, 8.0, 20.0)]
    assert all(a > b for a, b in zip(z, z[1:]))


def test_bound_state_against_dense_grid():
    # deeply bound state: the trapezoidal grid eigenvalue converges geometrically
    pot = nearest_neighbor(1.0, 0.3, mu=8.0)
    k = np.array([0.5, -0.25, 0.0])
    z = bound_state_energy(pot, k)
    lowest = np.linalg.eigvalsh(build_h(pot, k, TorusGrid(16)).matrix)[0]
    assert lowest == pytest.approx(z, abs=1e-6)


def test_dense_grid_count_below_band(zr_cal, grid8):
    h = build_h(zr_cal.potential.with_mu(3 * zr_cal.mu_star), np.array([0.5, 0, 0]), grid8)
    assert count_below(h.matrix, twobody_band([0.5, 0, 0])[0]) == 1


def test_expansion_k_route(zr_cal, grid8):
    rep = expansion_check_G(zr_cal, grid8, [0.02, 0.01, 0.005])
    assert np.all((rep.ratios > 0.45) & (rep.ratios < 0.55))
    assert rep.route == "k"


def test_expansion_z_route(zr_cal, grid8):
    rep = expansion_check_G(zr_cal, grid8, [0.02, 0.01, 0.005], route="z")
    assert np.all((rep.ratios > 0.4) & (rep.ratios < 0.6))
    with pytest.raises(ValueError):
        expansion_check_G(zr_cal, grid8, [0.1], route="x")
    with pytest.raises(ValueError):
        difference_quotient(zr_cal, grid8)


def test_expansion_nearest_neighbor(grid8):
    cal = calibrate_resonance(nearest_neighbor(1.0, 0.3), grid8)
    rep = expansion_check_G(cal, grid8, [0.02, 0.01, 0.005], direction=(1, 1, 0))
    assert np.all((rep.ratios > 0.45) & (rep.ratios < 0.55))


def test_witness_tends_to_limit(zr_cal, grid8):
    vals = [resonance_witness_w(zr_cal, grid8, [h, 0, 0]) for h in (0.04, 0.02, 0.01)]
    gaps = np.abs(np.array(vals) - zr_cal.witness_limit)
    assert gaps[2] < gaps[1] < gaps[0]
    assert gaps[2] / zr_cal.witness_limit < 5e-3


def test_witness_vanishes_below_resonance(zr_cal, grid8):
    weak = zr_cal.potential.with_mu(0.5 * zr_cal.mu_star)
    vals = [resonance_witness_w(zr_cal, grid8, [h, 0, 0], pot=weak) for h in (0.04, 0.02, 0.01)]
    assert vals[2] < vals[1] < vals[0] < 0.1


def test_witness_singular_at_zero(zr_cal, grid8):
    with pytest.raises(ConditioningError):
        resonance_witness_w(zr_cal, grid8, np.zeros(3))
