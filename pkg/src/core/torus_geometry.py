# flake8: noqa: E501
"""
Geometry on the unit 3-torus U = [0,1)^3.

Positions are arrays of shape (..., 3) with components in [0,1); velocities are
plain arrays. Relative quantities always follow the convention
``rel_pos = x_tagged - x_background`` and ``rel_vel = v_tagged - v_background``.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.errors import (
    ContactToleranceError,
    GeometryError,
    NonUnitNormalError,
    OverlapError,
)

logger = logging.getLogger(__name__)

TOL_CONTACT = 1e-9
TOL_UNIT = 1e-12


@dataclass(frozen=True)
class ContactEvent:
    """A realized contact of the tagged particle with background partner_index at time."""

    time: float
    normal: np.ndarray
    partner_index: int

    def __post_init__(self):
        if not (np.isfinite(self.time) and self.time >= 0.0):
            raise GeometryError(f"Contact time must be finite and non-negative, got {self.time}")
        if abs(float(np.linalg.norm(self.normal)) - 1.0) > TOL_UNIT:
            raise NonUnitNormalError(f"Contact normal is not unit: {self.normal}")


def _as_finite(p, name: str = "input") -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"Non-finite {name}: {arr}")
    return arr


def wrap(p) -> np.ndarray:
    """
    Map a point of R^3 onto the torus.

    Args:
        p: Array of shape (..., 3)

    Returns:
        Array of the same shape with every component in [0, 1)
    """
    arr = _as_finite(p, "position")
    out = np.mod(arr, 1.0)
    # mod of a tiny negative number rounds up to exactly 1.0
    out[out >= 1.0] = 0.0
    return out


def min_image(a, b) -> np.ndarray:
    """
    Minimal-image displacement d with a + d = b (mod 1).

    Each component lies in (-1/2, 1/2]; antipodal ties resolve to +1/2.
    Broadcasts over leading dimensions.
    """
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d - np.ceil(d - 0.5)


def _image_offsets(k: int) -> np.ndarray:
    rng = range(-k, k + 1)
    return np.array(list(itertools.product(rng, rng, rng)), dtype=float)


def image_range(rel_vel, horizon: float) -> int:
    """Number of lattice shells needed to cover a flight of length |rel_vel|*horizon."""
    speed = float(np.max(np.linalg.norm(np.atleast_2d(rel_vel), axis=-1))) if np.size(rel_vel) else 0.0
    return int(np.ceil(speed * horizon)) + 1


def predict_contacts(rel_pos, rel_vel, epsilon: float, horizon: float, k: Optional[int] = None) -> np.ndarray:
    """
    Earliest inward contact times for a batch of pairs.

    Args:
        rel_pos: (N, 3) tagged-minus-background positions
        rel_vel: (N, 3) tagged-minus-background velocities
        epsilon: Contact distance
        horizon: Largest admissible time
        k: Lattice shells to enumerate per axis, derived from speed * horizon when omitted

    Returns:
        (N,) array of contact times in (0, horizon], +inf where no contact occurs

    Raises:
        OverlapError: if a pair is already closer than epsilon - TOL_CONTACT
    """
    rel_pos = _as_finite(rel_pos, "relative position").reshape(-1, 3)
    rel_vel = _as_finite(rel_vel, "relative velocity").reshape(-1, 3)
    if horizon <= 0:
        raise ValueError(f"Horizon must be positive, got {horizon}")
    if rel_pos.shape[0] == 0:
        return np.empty(0)

    base = min_image(np.zeros(3), rel_pos)
    if k is None:
        k = image_range(rel_vel, horizon)
    offsets = _image_offsets(k)

    p = base[:, None, :] - offsets[None, :, :]
    a = np.einsum("ij,ij->i", rel_vel, rel_vel)[:, None]
    b = np.einsum("imj,ij->im", p, rel_vel)
    c = np.einsum("imj,imj->im", p, p) - epsilon * epsilon

    if np.any(c < -2.0 * epsilon * TOL_CONTACT):
        bad = np.argwhere(c < -2.0 * epsilon * TOL_CONTACT)[0]
        raise OverlapError(f"Pair {bad[0]} overlaps at t=0 (separation below {epsilon})")

    disc = b * b - a * c
    hit = (b < 0.0) & (disc > 0.0) & (a > 0.0)
    times = np.full(b.shape, np.inf)
    with np.errstate(invalid="ignore", divide="ignore"):
        roots = (-b - np.sqrt(np.where(hit, disc, 0.0))) / np.where(a > 0.0, a, 1.0)
    ok = hit & (roots > 0.0) & (roots <= horizon)
    times[ok] = roots[ok]
    return times.min(axis=1)


def predict_contact(rel_pos, rel_vel, epsilon: float, horizon: float) -> Optional[float]:
    """
    Smallest t in (0, horizon] at which some periodic image of the pair touches
    with inward radial velocity, or None. Tangency counts as no contact.
    """
    t = predict_contacts(np.atleast_2d(rel_pos), np.atleast_2d(rel_vel), epsilon, horizon)[0]
    return float(t) if np.isfinite(t) else None


def collision_normal(x_tagged, x_background, epsilon: float, tol_contact: float = TOL_CONTACT) -> np.ndarray:
    """
    Unit vector along the minimal-image displacement from the background to the tagged particle.

    Raises:
        ContactToleranceError: if the separation differs from epsilon by more than tol_contact
    """
    d = min_image(_as_finite(x_background), _as_finite(x_tagged))
    dist = float(np.linalg.norm(d))
    if abs(dist - epsilon) > tol_contact:
        raise ContactToleranceError(f"Separation {dist!r} is not within {tol_contact} of epsilon={epsilon}")
    return d / dist


def check_unit(nu) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    if abs(float(np.linalg.norm(nu)) - 1.0) > TOL_UNIT:
        raise NonUnitNormalError(f"Normal {nu} has norm {np.linalg.norm(nu)!r}")
    return nu


def scatter(v, v_j, nu) -> np.ndarray:
    """
    Tagged-particle velocity after a collision with normal nu.

    The background velocity v_j is left untouched.

    Args:
        v: Pre-collisional tagged velocity
        v_j: Background particle velocity
        nu: Unit collision parameter

    Returns:
        v - (nu . (v - v_j)) nu
    """
    nu = check_unit(nu)
    v = np.asarray(v, dtype=float)
    return v - np.dot(nu, v - np.asarray(v_j, dtype=float)) * nu


def impact_speed(v_pre, v_j, nu) -> float:
    """Normal approach speed nu . (v_j - v_pre); positive for an approaching pair."""
    return float(np.dot(np.asarray(nu, dtype=float), np.asarray(v_j, dtype=float) - np.asarray(v_pre, dtype=float)))
