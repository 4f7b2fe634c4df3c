# flake8: noqa: E501
"""
Initial data for the Rayleigh gas: admissibility of the input laws, background
sampling, and conditioning on the absence of initial overlap.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.laws import BackgroundLaw, InitialLaw
from core.torus_geometry import min_image, wrap
from utils.errors import AdmissibilityError

logger = logging.getLogger(__name__)

MOMENT_CAP = 1e12
MAX_OVERLAP_ATTEMPTS = 100_000


@dataclass(frozen=True, eq=False)
class ParticleState:
    """Position on the torus and velocity."""

    x: np.ndarray
    v: np.ndarray

    def to_dict(self):
        return {"x": [float(c) for c in self.x], "v": [float(c) for c in self.v]}


@dataclass(frozen=True, eq=False)
class BackgroundConfiguration:
    """N background particles at time zero, stored column-wise."""

    positions: np.ndarray
    velocities: np.ndarray

    def __len__(self) -> int:
        return int(self.positions.shape[0])


@dataclass(frozen=True)
class AdmissibilityReport:
    second_moment_f0: float
    second_moment_g0: float
    sup_weighted_g0: float
    admissible: bool

    def summary(self) -> str:
        verdict = "admissible" if self.admissible else "NOT admissible"
        return (f"{verdict}: int f0(1+|v|^2)={self.second_moment_f0:.6g}, "
                f"int g0(1+|v|^2)={self.second_moment_g0:.6g}, "
                f"sup g0(1+|v|^4)={self.sup_weighted_g0:.6g}")


def _finite(value: float) -> bool:
    return bool(np.isfinite(value) and value < MOMENT_CAP)


def check_admissibility(f0: InitialLaw, g0: BackgroundLaw) -> AdmissibilityReport:
    """
    Evaluate the moment conditions on f0 and g0 by radial quadrature.

    Args:
        f0: Tagged-particle initial law
        g0: Background velocity law

    Returns:
        AdmissibilityReport; admissible when all three quantities are finite and below MOMENT_CAP

    Raises:
        AdmissibilityError: for a tabulated law without tail metadata
    """
    velocity = f0.velocity
    if isinstance(velocity, BackgroundLaw):
        m_f0 = velocity.moment(0.0) + velocity.moment(2.0)
    else:
        m_f0 = 1.0 + velocity.moment(2.0)
    m_g0 = g0.moment(0.0) + g0.moment(2.0)
    sup_g0 = g0.sup_weighted()
    report = AdmissibilityReport(
        second_moment_f0=float(m_f0),
        second_moment_g0=float(m_g0),
        sup_weighted_g0=float(sup_g0),
        admissible=_finite(m_f0) and _finite(m_g0) and _finite(sup_g0),
    )
    logger.info("Admissibility: %s", report.summary())
    return report


def require_admissible(f0: InitialLaw, g0: BackgroundLaw) -> AdmissibilityReport:
    report = check_admissibility(f0, g0)
    if not report.admissible:
        raise AdmissibilityError(f"Input laws are not admissible ({report.summary()})")
    return report


def boltzmann_grad_n(epsilon: float) -> int:
    """Number of background particles with N * epsilon^2 = 1."""
    return int(round(epsilon ** -2))


def sample_background(g0: BackgroundLaw, N: int, rng: np.random.Generator) -> BackgroundConfiguration:
    """N i.i.d. backgrounds, uniform on the torus with velocities from g0."""
    if N < 0:
        raise ValueError(f"N must be non-negative, got {N}")
    positions = rng.random((N, 3))
    velocities = g0.sample(rng, N) if N else np.empty((0, 3))
    return BackgroundConfiguration(positions, velocities)


def reject_overlap(x0, backgrounds, epsilon: float) -> bool:
    """
    True iff every background centre is strictly farther than epsilon from x0.

    ``backgrounds`` is a BackgroundConfiguration or an (N, 3) position array.
    """
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    positions = backgrounds.positions if isinstance(backgrounds, BackgroundConfiguration) else np.asarray(backgrounds, dtype=float).reshape(-1, 3)
    if positions.shape[0] == 0:
        return True
    d = min_image(np.asarray(x0, dtype=float)[None, :], positions)
    return bool(np.all(np.einsum("ij,ij->i", d, d) > epsilon * epsilon))


def excluded_volume(epsilon: float) -> float:
    return 4.0 / 3.0 * np.pi * epsilon ** 3


def zeta(epsilon: float, N: int) -> float:
    """Probability that N uniform backgrounds all avoid the epsilon-ball around a point."""
    vol = excluded_volume(epsilon)
    if vol >= 1.0:
        raise ValueError(f"epsilon={epsilon} is too large: excluded volume {vol:.4f} >= 1")
    return float((1.0 - vol) ** N)


def sample_initial_configuration(
    f0: InitialLaw,
    g0: BackgroundLaw,
    epsilon: float,
    N: int,
    rng: np.random.Generator,
    max_attempts: int = MAX_OVERLAP_ATTEMPTS,
) -> Tuple[ParticleState, BackgroundConfiguration, int]:
    """
    Draw the tagged particle, then whole background configurations until none overlaps it.

    Returns:
        (tagged state, accepted backgrounds, number of configurations drawn)
    """
    x, v = f0.sample(rng, 1)
    tagged = ParticleState(wrap(x[0]), v[0])
    for attempt in range(1, max_attempts + 1):
        backgrounds = sample_background(g0, N, rng)
        if reject_overlap(tagged.x, backgrounds, epsilon):
            return tagged, backgrounds, attempt
    raise RuntimeError(f"No overlap-free configuration after {max_attempts} attempts (epsilon={epsilon}, N={N})")
