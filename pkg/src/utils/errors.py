# flake8: noqa: E501
"""
Error types raised by the simulation and solver modules.

All of them derive from ValueError so callers that already guard with
``except ValueError`` keep working.
"""


class GeometryError(ValueError):
    """Non-finite coordinates or an otherwise unusable geometric input."""


class OverlapError(ValueError):
    """Tagged and background spheres overlap where the dynamics forbid it."""


class ContactToleranceError(ValueError):
    """A contact was requested at a separation that is not epsilon."""


class NonUnitNormalError(ValueError):
    """Collision normal is not a unit vector."""


class AdmissibilityError(ValueError):
    """A law cannot be checked against the moment conditions."""


class QuadratureError(ValueError):
    """Adaptive quadrature did not reach the requested accuracy."""


class ThinningError(ValueError):
    """The dominating rate of the jump sampler is too loose to be usable."""


class GridMismatchError(ValueError):
    """Two histograms or densities live on different grids."""


class ConfigError(ValueError):
    """Experiment configuration is missing keys or holds invalid values."""


class TreeFormatError(ValueError):
    """A serialized collision tree could not be decoded."""
