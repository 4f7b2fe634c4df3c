# flake8: noqa: E501
"""
Tests for law specs in configuration files.
"""

import pytest

from core.laws import Maxwellian, SpatialPointMass, TabulatedRadial, UniformBall, UniformSpatial, VelocityPointMass
from utils.errors import ConfigError
from utils.law_parser import (
    normalize_kind,
    parse_background_law,
    parse_initial_law,
    parse_spatial_law,
    parse_velocity_law,
)


@pytest.mark.parametrize("raw, canonical", [
    ("maxwellian", "maxwellian"),
    ("Gaussian", "maxwellian"),
    ("normal", "maxwellian"),
    ("Uniform-Ball", "uniform_ball"),
    ("uniformball", "uniform_ball"),
    ("table", "tabulated_radial"),
    ("Point Mass", "point_mass"),
    ("dirac", "point_mass"),
    ("flat", "uniform"),
    ("lorentzian", "lorentzian"),
])
def test_normalize_kind(raw, canonical):
    assert normalize_kind(raw) == canonical


@pytest.mark.parametrize("raw", ["", "   ", None, 3])
def test_normalize_kind_rejects_non_strings(raw):
    with pytest.raises(ConfigError):
        normalize_kind(raw)


def test_velocity_laws():
    assert parse_velocity_law({"kind": "gaussian", "sigma": 0.5}) == Maxwellian(0.5)
    assert parse_velocity_law("maxwellian") == Maxwellian(1.0)
    assert parse_velocity_law({"kind": "ball", "radius": 2}) == UniformBall(2.0)
    assert parse_velocity_law({"kind": "delta", "v0": [1, 0, 0]}) == VelocityPointMass((1.0, 0.0, 0.0))


def test_tabulated_law():
    law = parse_velocity_law({"kind": "tabulated", "speeds": [0, 1, 2], "values": [1, 0.5, 0], "tail": {"kind": "compact"}})
    assert isinstance(law, TabulatedRadial)
    assert law.moment(0.0) == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("spec, message", [
    ({"kind": "tabulated", "values": [1, 0]}, "missing 'speeds'"),
    ({"kind": "tabulated", "speeds": [0, 1], "values": [1, 0], "tail": {"kind": "cauchy"}}, "tail kind"),
    ({"kind": "maxwellian", "sigma": -1}, "sigma must be positive"),
    ({"kind": "lorentzian"}, "Unknown velocity law"),
    ({"kind": "point_mass", "v0": [1, 2]}, "three components"),
    ({"sigma": 1.0}, "'kind' key"),
])
def test_velocity_law_errors(spec, message):
    with pytest.raises(ConfigError, match=message):
        parse_velocity_law(spec)


def test_background_law_needs_a_density():
    with pytest.raises(ConfigError, match="needs a density"):
        parse_background_law({"kind": "point_mass"})


def test_spatial_laws():
    assert parse_spatial_law(None) == UniformSpatial()
    assert parse_spatial_law("uniform_torus") == UniformSpatial()
    assert parse_spatial_law({"kind": "dirac", "x0": [0.5, 0.5, 0.5]}) == SpatialPointMass((0.5, 0.5, 0.5))
    with pytest.raises(ConfigError):
        parse_spatial_law({"kind": "gaussian"})


def test_initial_law():
    default = parse_initial_law(None)
    assert default.velocity == VelocityPointMass()
    bare = parse_initial_law({"kind": "gaussian", "sigma": 0.5})
    assert bare.velocity == Maxwellian(0.5)
    assert bare.spatial == UniformSpatial()
    full = parse_initial_law({"spatial": {"kind": "point_mass", "x0": [0.1, 0.2, 0.3]}, "velocity": "maxwellian"})
    assert full.spatial == SpatialPointMass((0.1, 0.2, 0.3))
    with pytest.raises(ConfigError, match="Unknown f0 keys"):
        parse_initial_law({"velocity": "maxwellian", "weight": 2})
