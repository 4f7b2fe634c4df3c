# flake8: noqa: E501
"""
Tests for the loss semigroup and the truncated Duhamel series.
"""

import logging

import numpy as np
import pytest

from core.collision_operators import GainOperator, rate_cache_for
from core.convergence_harness import VelocityHistogram, estimate_tv
from core.duhamel_solver import duhamel_solve, semigroup_T
from core.jump_process import jump_ensemble
from core.kinetic_density import DensityMode, KineticDensity, SpatialGrid, VelocityGrid
from core.laws import InitialLaw, Maxwellian, UniformSpatial


# odd bin count puts a cell centre exactly on v = 0
REST_GRID = VelocityGrid(4.2, 21)
REST_SMALL = VelocityGrid(2.8, 7)
SMALL_GRID = VelocityGrid(4.5, 16)


def _tv(a: KineticDensity, b: KineticDensity) -> float:
    return 0.5 * float(np.abs(a.cell_masses() - b.cell_masses()).sum())


def test_semigroup_identity_at_zero(g0):
    f = KineticDensity.from_velocity_law(g0, SMALL_GRID)
    out = semigroup_T(f, 0.0, g0)
    assert out is not f
    np.testing.assert_array_equal(out.values, f.values)


def test_semigroup_rejects_negative_time(g0):
    f = KineticDensity.from_point_mass(np.zeros(3), REST_GRID)
    with pytest.raises(ValueError):
        semigroup_T(f, -0.1, g0)


def test_semigroup_point_mass_at_rest(g0):
    """Mass left at t=1 from v0=0 is exp(-sqrt(8 pi)), about 6.66e-3."""
    f = KineticDensity.from_point_mass(np.zeros(3), REST_GRID)
    out = semigroup_T(f, 1.0, g0)
    assert out.mass() == pytest.approx(np.exp(-np.sqrt(8.0 * np.pi)), rel=1e-4)
    assert out.mass() == pytest.approx(6.66e-3, abs=1e-5)


def test_semigroup_is_substochastic(g0):
    f = KineticDensity.from_velocity_law(Maxwellian(0.7), SMALL_GRID)
    masses = [semigroup_T(f, t, g0).mass() for t in (0.0, 0.1, 0.5, 1.0)]
    assert masses[0] == pytest.approx(f.mass())
    assert all(b < a for a, b in zip(masses, masses[1:]))


def test_semigroup_keeps_uniform_phase_space_uniform(g0):
    f = KineticDensity.from_velocity_law(g0, VelocityGrid(3.0, 6))
    phase = f.to_phase_space(SpatialGrid(4))
    assert phase.mode == DensityMode.PHASE_SPACE
    out = semigroup_T(phase, 0.3, g0)
    flat = semigroup_T(f, 0.3, g0)
    np.testing.assert_allclose(out.values, np.broadcast_to(flat.values, out.values.shape), rtol=1e-12, atol=1e-15)


def test_semigroup_transports_along_velocity(g0):
    """A bump moving at v=(1,0,0) advances one spatial cell in time hx."""
    grid = VelocityGrid(1.5, 3)
    spatial = SpatialGrid(4)
    values = np.zeros((4, 4, 4, 3, 3, 3))
    values[0, 2, 2, 2, 1, 1] = 1.0
    f = KineticDensity(grid, values, spatial)
    out = semigroup_T(f, spatial.hx, g0)
    damping = np.exp(-spatial.hx * float(rate_cache_for(g0)(np.array([[1.0, 0.0, 0.0]]))[0]))
    assert out.values[1, 2, 2, 2, 1, 1] == pytest.approx(damping, rel=1e-9)
    assert out.values[0, 2, 2, 2, 1, 1] == pytest.approx(0.0, abs=1e-12)


def test_duhamel_at_time_zero(g0):
    f0 = KineticDensity.from_velocity_law(Maxwellian(0.6), SMALL_GRID)
    density, masses = duhamel_solve(f0, g0, 0.0, j_max=5)
    np.testing.assert_array_equal(density.values, f0.values)
    assert masses == [pytest.approx(f0.mass())] + [0.0] * 5


def test_duhamel_without_collisions_is_the_semigroup(g0):
    f0 = KineticDensity.from_velocity_law(Maxwellian(0.6), SMALL_GRID)
    density, masses = duhamel_solve(f0, g0, 0.8, j_max=0)
    expected = semigroup_T(f0, 0.8, g0)
    np.testing.assert_allclose(density.values, expected.values)
    assert masses == [pytest.approx(expected.mass())]


def test_duhamel_argument_checks(g0):
    f0 = KineticDensity.from_point_mass(np.zeros(3), REST_GRID)
    with pytest.raises(ValueError):
        duhamel_solve(f0, g0, -1.0)
    with pytest.raises(ValueError):
        duhamel_solve(f0, g0, 1.0, j_max=-1)
    other = GainOperator(VelocityGrid(3.0, 6), g0)
    with pytest.raises(ValueError, match="different velocity grid"):
        duhamel_solve(f0, g0, 1.0, j_max=2, gain=other)


def test_duhamel_mass_grows_with_levels(g0):
    f0 = KineticDensity.from_velocity_law(Maxwellian(0.6), SMALL_GRID)
    gain = GainOperator(SMALL_GRID, g0)
    totals = []
    for j_max in range(0, 5):
        density, masses = duhamel_solve(f0, g0, 0.5, j_max=j_max, n_time_steps=16, gain=gain)
        assert sum(masses) <= 1.0 + 1e-9
        assert density.mass() == pytest.approx(sum(masses), rel=1e-6)
        totals.append(sum(masses))
    assert all(b >= a for a, b in zip(totals, totals[1:]))


def test_duhamel_level_zero_is_exact(g0):
    f0 = KineticDensity.from_point_mass(np.zeros(3), REST_SMALL)
    _, masses = duhamel_solve(f0, g0, 0.5, j_max=3, n_time_steps=16, gain=GainOperator(REST_SMALL, g0))
    assert masses[0] == pytest.approx(np.exp(-0.5 * np.sqrt(8.0 * np.pi)), rel=1e-4)
    assert all(m >= 0.0 for m in masses)


class _DoubledGain:
    """Gain operator that creates twice the mass it should."""

    def __init__(self, gain: GainOperator):
        self.grid = gain.grid
        self.rates = gain.rates
        self._gain = gain

    def apply(self, values):
        return 2.0 * self._gain.apply(values)


def test_duhamel_warns_when_mass_overshoots(g0, caplog):
    gain = GainOperator(REST_SMALL, g0)
    f0 = KineticDensity.from_point_mass(np.zeros(3), REST_SMALL)
    with caplog.at_level(logging.WARNING):
        duhamel_solve(f0, g0, 0.05, j_max=2, n_time_steps=8, gain=gain)
    assert not any("exceeds unit mass" in r.getMessage() for r in caplog.records)

    caplog.clear()
    with caplog.at_level(logging.WARNING):
        density, masses = duhamel_solve(f0, g0, 0.05, j_max=2, n_time_steps=8, gain=_DoubledGain(gain))
    assert any("exceeds unit mass" in r.getMessage() for r in caplog.records)
    assert sum(masses) == pytest.approx(1.0)
    assert density.mass() == pytest.approx(1.0, rel=1e-6)


def test_duhamel_equilibrium_is_nearly_stationary(g0):
    f0 = KineticDensity.from_velocity_law(g0, SMALL_GRID)
    density, masses = duhamel_solve(f0, g0, 1.0, j_max=24, n_time_steps=32)
    assert sum(masses) >= 0.995
    assert _tv(density, f0) <= 0.05


def test_duhamel_phase_space_matches_velocity_marginal(g0):
    grid = VelocityGrid(3.0, 6)
    f0 = KineticDensity.from_velocity_law(Maxwellian(0.8), grid)
    gain = GainOperator(grid, g0)
    flat, flat_masses = duhamel_solve(f0, g0, 0.4, j_max=6, n_time_steps=16, gain=gain)
    phase, phase_masses = duhamel_solve(f0.to_phase_space(SpatialGrid(2)), g0, 0.4, j_max=6, n_time_steps=16, gain=gain)
    assert phase.mode == DensityMode.PHASE_SPACE
    # uniform data stays uniform; only the time rule differs
    np.testing.assert_allclose(phase_masses[0], flat_masses[0], rtol=1e-9)
    assert sum(phase_masses) == pytest.approx(sum(flat_masses), abs=2e-2)


@pytest.mark.slow
def test_duhamel_equilibrium_sup_norm(g0):
    grid = VelocityGrid(6.0, 20)
    f0 = KineticDensity.from_velocity_law(g0, grid)
    density, masses = duhamel_solve(f0, g0, 1.0, j_max=24)
    assert sum(masses) >= 0.999
    assert float(np.max(np.abs(density.values - f0.values))) <= 1e-2


@pytest.mark.slow
def test_duhamel_agrees_with_jump_process(g0):
    """Non-stationary start: the two solvers give the same velocity law at t=1."""
    grid = VelocityGrid(6.0, 20)
    start = Maxwellian(0.6)
    density, masses = duhamel_solve(KineticDensity.from_velocity_law(start, grid), g0, 1.0, j_max=24)
    assert 1.0 - sum(masses) <= 1e-2

    rng = np.random.Generator(np.random.Philox(2024))
    ensemble = jump_ensemble(InitialLaw(UniformSpatial(), start), g0, [1.0], 10 ** 6, rng)
    sampled = VelocityHistogram.from_samples(ensemble.velocities[0], grid)
    assert estimate_tv(VelocityHistogram.from_density(density), sampled) <= 0.03
