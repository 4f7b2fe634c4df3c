# flake8: noqa: E501
"""
Tests for velocity laws, admissibility, background sampling and overlap conditioning.
"""

import numpy as np
import pytest
from numpy.testing import assert_array_equal
from scipy import stats

from core.initial_sampling import (
    boltzmann_grad_n,
    check_admissibility,
    reject_overlap,
    require_admissible,
    sample_background,
    sample_initial_configuration,
    zeta,
)
from core.laws import InitialLaw, Maxwellian, TabulatedRadial, UniformBall, UniformSpatial, VelocityPointMass
from utils.errors import AdmissibilityError
from utils.rng import PARTICLE, stream


def test_law_moments():
    """Mass, second moment and mean speed by radial quadrature."""
    m = Maxwellian(1.0)
    assert m.moment(0.0) == pytest.approx(1.0, rel=1e-6)
    assert m.moment(2.0) == pytest.approx(3.0, rel=1e-6)
    assert m.mean_speed() == pytest.approx(np.sqrt(8.0 / np.pi), rel=1e-6)
    ball = UniformBall(2.0)
    assert ball.moment(0.0) == pytest.approx(1.0, rel=1e-6)
    assert ball.moment(2.0) == pytest.approx(0.6 * 4.0, rel=1e-6)


def test_tabulated_law_is_normalized():
    law = TabulatedRadial.from_function(lambda s: np.exp(-0.5 * s ** 2), 12.0, n_nodes=51, tail={"kind": "gaussian"})
    assert law.moment(0.0) == pytest.approx(1.0, rel=1e-6)


def test_admissibility_maxwellian():
    report = check_admissibility(InitialLaw(UniformSpatial(), VelocityPointMass((0.0, 0.0, 0.0))), Maxwellian(1.0))
    assert report.admissible
    assert report.second_moment_g0 == pytest.approx(4.0, rel=1e-6)
    assert report.sup_weighted_g0 > 0


def test_admissibility_uniform_ball():
    f0 = InitialLaw(UniformSpatial(), Maxwellian(0.5))
    assert check_admissibility(f0, UniformBall(1.0)).admissible


def test_admissibility_heavy_tail_fails():
    """(1+|v|)^-4 has a divergent second moment."""
    law = TabulatedRadial.from_function(lambda s: (1.0 + s) ** -4, 50.0, n_nodes=51, tail={"kind": "power", "exponent": 4.0})
    f0 = InitialLaw(UniformSpatial(), VelocityPointMass((0.0, 0.0, 0.0)))
    report = check_admissibility(f0, law)
    assert not report.admissible
    assert not np.isfinite(report.second_moment_g0)
    with pytest.raises(AdmissibilityError):
        require_admissible(f0, law)


def test_admissibility_needs_tail_metadata():
    law = TabulatedRadial.from_function(lambda s: np.exp(-0.5 * s ** 2), 8.0, n_nodes=51)
    f0 = InitialLaw(UniformSpatial(), VelocityPointMass((0.0, 0.0, 0.0)))
    with pytest.raises(AdmissibilityError, match="cannot certify moments"):
        check_admissibility(f0, law)


def test_sample_background_empty():
    backgrounds = sample_background(Maxwellian(1.0), 0, stream(1, PARTICLE, 0))
    assert len(backgrounds) == 0
    assert list(backgrounds) == []


def test_sample_background_statistics():
    """Velocity moments and spatial uniformity at N=1e5."""
    N = 100_000
    backgrounds = sample_background(Maxwellian(1.0), N, stream(3, PARTICLE, 0))
    v = backgrounds.velocities
    assert np.all(np.abs(v.mean(axis=0)) <= 4.0 / np.sqrt(N))
    assert np.all(np.abs(v.var(axis=0) - 1.0) <= 4.0 * np.sqrt(2.0 / N))
    cells = np.floor(backgrounds.positions * 10).astype(int)
    flat = np.ravel_multi_index(cells.T, (10, 10, 10))
    counts = np.bincount(flat, minlength=1000)
    assert stats.chisquare(counts).pvalue > 0.001


def test_reject_overlap_examples():
    x0 = np.array([0.0, 0.0, 0.0])
    assert not reject_overlap(x0, np.array([[0.0, 0.0, 0.0]]), 0.125)
    # strict inequality at exactly epsilon
    assert not reject_overlap(x0, np.array([[0.125, 0.0, 0.0]]), 0.125)
    assert reject_overlap(x0, np.array([[0.25, 0.0, 0.0], [0.5, 0.5, 0.5]]), 0.125)
    # the image across the boundary counts
    assert not reject_overlap(x0, np.array([[0.95, 0.0, 0.0]]), 0.1)
    assert reject_overlap(x0, np.empty((0, 3)), 0.1)


def test_reject_overlap_rejects_large_epsilon():
    with pytest.raises(ValueError):
        reject_overlap(np.zeros(3), np.empty((0, 3)), 0.5)


def test_zeta_values():
    assert zeta(0.1, 100) == pytest.approx(0.657, abs=1e-3)
    assert zeta(0.3, 0) == 1.0
    assert zeta(1e-6, 10) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        zeta(0.7, 1)


def test_zeta_tends_to_one_under_boltzmann_grad_scaling():
    values = [zeta(eps, boltzmann_grad_n(eps)) for eps in (0.2, 0.1, 0.05, 0.025)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert values[-1] > 0.89


def test_boltzmann_grad_n():
    assert boltzmann_grad_n(0.2) == 25
    assert boltzmann_grad_n(0.1) == 100
    assert boltzmann_grad_n(0.05) == 400


def test_overlap_acceptance_matches_zeta():
    """Acceptance rate of reject_overlap over 1e4 uniform configurations."""
    eps, N, trials = 0.1, 100, 10_000
    rng = stream(5, PARTICLE, 1)
    accepted = sum(reject_overlap(rng.random(3), rng.random((N, 3)), eps) for _ in range(trials))
    z = zeta(eps, N)
    sigma = np.sqrt(z * (1.0 - z) / trials)
    assert abs(accepted / trials - z) <= 4.0 * sigma


@pytest.mark.slow
def test_overlap_acceptance_matches_zeta_large():
    eps, N, trials = 0.1, 100, 100_000
    rng = stream(6, PARTICLE, 1)
    accepted = 0
    for _ in range(trials // 1000):
        x0 = rng.random((1000, 1, 3))
        d = rng.random((1000, N, 3)) - x0
        d -= np.ceil(d - 0.5)
        accepted += int(np.all(np.einsum("tnk,tnk->tn", d, d) > eps * eps, axis=1).sum())
    z = zeta(eps, N)
    assert abs(accepted / trials - z) <= 3.0 * np.sqrt(z * (1.0 - z) / trials)


def test_initial_configuration_is_reproducible():
    f0 = InitialLaw(UniformSpatial(), Maxwellian(1.0))
    a = sample_initial_configuration(f0, Maxwellian(1.0), 0.1, 100, stream(9, PARTICLE, 0, 3))
    b = sample_initial_configuration(f0, Maxwellian(1.0), 0.1, 100, stream(9, PARTICLE, 0, 3))
    assert_array_equal(a[0].x, b[0].x)
    assert_array_equal(a[0].v, b[0].v)
    assert_array_equal(a[1].positions, b[1].positions)
    assert_array_equal(a[1].velocities, b[1].velocities)
    assert a[2] == b[2] >= 1
    assert reject_overlap(a[0].x, a[1], 0.1)
