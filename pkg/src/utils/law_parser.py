# flake8: noqa: E501
"""
Parsing of law specifications from configuration files.

A law spec is a JSON object with a "kind" key plus parameters. Common spellings
of the kind are normalized before validation, so "gaussian", "normal" and
"Maxwellian" all describe the same background law.
"""

from typing import Any, Dict, Optional, Union

from core.laws import (
    BackgroundLaw,
    InitialLaw,
    Maxwellian,
    SpatialPointMass,
    TabulatedRadial,
    UniformBall,
    UniformSpatial,
    VelocityPointMass,
)
from utils.errors import ConfigError

VELOCITY_KINDS = {"maxwellian", "uniform_ball", "tabulated_radial", "point_mass"}
SPATIAL_KINDS = {"uniform", "point_mass"}

KIND_ALIASES = {
    "gaussian": "maxwellian",
    "normal": "maxwellian",
    "maxwell": "maxwellian",
    "ball": "uniform_ball",
    "uniformball": "uniform_ball",
    "tabulated": "tabulated_radial",
    "radial": "tabulated_radial",
    "table": "tabulated_radial",
    "pointmass": "point_mass",
    "point": "point_mass",
    "dirac": "point_mass",
    "delta": "point_mass",
    "uniform_torus": "uniform",
    "flat": "uniform",
}

LawSpec = Union[str, Dict[str, Any]]


def normalize_kind(kind: Any) -> str:
    """
    Map a user-supplied kind onto its canonical name.

    Args:
        kind: Raw kind string from the configuration

    Returns:
        Canonical kind (unknown kinds are returned lower-cased for the caller to reject)
    """
    if not isinstance(kind, str) or not kind.strip():
        raise ConfigError(f"Law kind must be a non-empty string, got {kind!r}")
    key = kind.strip().lower().replace("-", "_").replace(" ", "_")
    return KIND_ALIASES.get(key, KIND_ALIASES.get(key.replace("_", ""), key))


def _as_spec(spec: LawSpec) -> Dict[str, Any]:
    if isinstance(spec, str):
        return {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"Law spec must be an object with a 'kind' key, got {spec!r}")
    return dict(spec)


def _vector(value: Any, name: str) -> tuple:
    try:
        vec = tuple(float(c) for c in value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name} must be a list of three numbers, got {value!r}") from e
    if len(vec) != 3:
        raise ConfigError(f"{name} must have three components, got {len(vec)}")
    return vec


def parse_velocity_law(spec: LawSpec, allow_point_mass: bool = True) -> Union[BackgroundLaw, VelocityPointMass]:
    """
    Build a velocity law from its spec.

    Args:
        spec: Law spec, e.g. {"kind": "maxwellian", "sigma": 1.0}
        allow_point_mass: False for background laws, which must have a density

    Returns:
        The law object

    Raises:
        ConfigError: for unknown kinds or invalid parameters
    """
    data = _as_spec(spec)
    kind = normalize_kind(data.pop("kind"))
    if kind not in VELOCITY_KINDS:
        raise ConfigError(f"Unknown velocity law kind {kind!r}; expected one of {sorted(VELOCITY_KINDS)}")
    try:
        if kind == "maxwellian":
            return Maxwellian(float(data.get("sigma", 1.0)))
        if kind == "uniform_ball":
            return UniformBall(float(data.get("radius", 1.0)))
        if kind == "tabulated_radial":
            return TabulatedRadial(tuple(data["speeds"]), tuple(data["values"]), data.get("tail"))
    except KeyError as e:
        raise ConfigError(f"Tabulated law is missing {e.args[0]!r}") from e
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if not allow_point_mass:
        raise ConfigError("A background law needs a density; point masses are only allowed for f0")
    return VelocityPointMass(_vector(data.get("v0", (0.0, 0.0, 0.0)), "v0"))


def parse_background_law(spec: LawSpec) -> BackgroundLaw:
    return parse_velocity_law(spec, allow_point_mass=False)


def parse_spatial_law(spec: Optional[LawSpec]):
    if spec is None:
        return UniformSpatial()
    data = _as_spec(spec)
    kind = normalize_kind(data.pop("kind"))
    if kind == "uniform":
        return UniformSpatial()
    if kind == "point_mass":
        return SpatialPointMass(_vector(data.get("x0", (0.0, 0.0, 0.0)), "x0"))
    raise ConfigError(f"Unknown spatial law kind {kind!r}; expected one of {sorted(SPATIAL_KINDS)}")


def parse_initial_law(spec: Optional[Dict[str, Any]]) -> InitialLaw:
    """
    Build f0 from {"spatial": ..., "velocity": ...}; both parts are optional.

    A bare velocity spec (an object with a "kind" key) is accepted as well and
    paired with the uniform spatial law.
    """
    if spec is None:
        return InitialLaw()
    if isinstance(spec, (str, dict)) and (isinstance(spec, str) or "kind" in spec):
        return InitialLaw(UniformSpatial(), parse_velocity_law(spec))
    if not isinstance(spec, dict):
        raise ConfigError(f"f0 must be an object, got {spec!r}")
    unknown = set(spec) - {"spatial", "velocity"}
    if unknown:
        raise ConfigError(f"Unknown f0 keys: {sorted(unknown)}")
    velocity = parse_velocity_law(spec["velocity"]) if "velocity" in spec else VelocityPointMass()
    return InitialLaw(parse_spatial_law(spec.get("spatial")), velocity)
