# flake8: noqa: E501
"""
Collision trees: the tagged particle's initial datum plus the ordered list of
collision markers (time, normal, partner velocity).

Normals follow the dynamics convention: nu points from the background centre to
the tagged particle at contact, so the background centre sits at x(t_j) - eps*nu_j
and an approaching pair has nu_j . (v_j - v(t_j-)) > 0.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.torus_geometry import check_unit, impact_speed, min_image, scatter
from utils.errors import TreeFormatError

logger = logging.getLogger(__name__)

GRAZING_MARGIN = 1e-12
RECOLLISION_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class CollisionMarker:
    t: float
    nu: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        check_unit(self.nu)

    def to_dict(self) -> Dict[str, Any]:
        return {"t": float(self.t), "nu": [float(c) for c in self.nu], "v": [float(c) for c in self.v]}


@dataclass(frozen=True, eq=False)
class CollisionTree:
    """Root (x0, v0) and collision markers sorted by time."""

    x0: np.ndarray
    v0: np.ndarray
    collisions: Tuple[CollisionMarker, ...] = ()
    horizon: Optional[float] = None

    def __post_init__(self):
        times = [c.t for c in self.collisions]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise TreeFormatError(f"Collision times must increase strictly: {times}")
        if times and times[0] <= 0.0:
            raise TreeFormatError(f"Collision times must be positive: {times}")

    @property
    def n(self) -> int:
        return len(self.collisions)

    @property
    def tau(self) -> float:
        """Time of the final collision, 0 for the bare root."""
        return float(self.collisions[-1].t) if self.collisions else 0.0

    def append(self, marker: CollisionMarker) -> "CollisionTree":
        return CollisionTree(self.x0, self.v0, self.collisions + (marker,), self.horizon)

    def truncated(self, t: float) -> "CollisionTree":
        """Markers with t_j <= t, horizon set to t."""
        kept = tuple(c for c in self.collisions if c.t <= t)
        return CollisionTree(self.x0, self.v0, kept, t)

    def velocities(self) -> List[np.ndarray]:
        """Tagged velocity on each free flight: v0, v(t_1), ..., v(t_n)."""
        out = [np.asarray(self.v0, dtype=float)]
        for c in self.collisions:
            out.append(scatter(out[-1], c.v, c.nu))
        return out

    def knots(self) -> Tuple[np.ndarray, np.ndarray, List[np.ndarray]]:
        """
        Segment start times, unwrapped tagged positions at those times, and segment velocities.
        """
        vels = self.velocities()
        times = np.array([0.0] + [c.t for c in self.collisions])
        pos = np.empty((times.size, 3))
        pos[0] = np.asarray(self.x0, dtype=float)
        for k in range(1, times.size):
            pos[k] = pos[k - 1] + (times[k] - times[k - 1]) * vels[k - 1]
        return times, pos, vels

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "x0": [float(c) for c in self.x0],
            "v0": [float(c) for c in self.v0],
            "collisions": [c.to_dict() for c in self.collisions],
        }
        if self.horizon is not None:
            out["T"] = float(self.horizon)
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CollisionTree":
        try:
            markers = tuple(
                CollisionMarker(float(c["t"]), np.asarray(c["nu"], dtype=float), np.asarray(c["v"], dtype=float))
                for c in data.get("collisions", [])
            )
            return cls(
                np.asarray(data["x0"], dtype=float),
                np.asarray(data["v0"], dtype=float),
                markers,
                float(data["T"]) if data.get("T") is not None else None,
            )
        except (KeyError, TypeError, ValueError) as e:
            raise TreeFormatError(f"Malformed tree record: {e}") from e


def prune(tree: CollisionTree) -> CollisionTree:
    """Remove the final collision marker."""
    if tree.n == 0:
        raise ValueError("Cannot prune a tree without collisions")
    return CollisionTree(tree.x0, tree.v0, tree.collisions[:-1], tree.horizon)


def tree_distance(a: CollisionTree, b: CollisionTree) -> float:
    """
    Tree metric: 1 when the collision counts differ, otherwise the largest
    sup-norm difference over root and markers, capped at 1.

    Root positions are compared through the minimal image on the torus.
    """
    if a.n != b.n:
        return 1.0
    diffs = [
        np.max(np.abs(min_image(a.x0, b.x0))),
        np.max(np.abs(np.asarray(a.v0) - np.asarray(b.v0))),
    ]
    for ca, cb in zip(a.collisions, b.collisions):
        diffs.append(abs(ca.t - cb.t))
        diffs.append(np.max(np.abs(ca.nu - cb.nu)))
        diffs.append(np.max(np.abs(ca.v - cb.v)))
    return float(min(1.0, max(diffs)))


@dataclass(frozen=True)
class GoodTreeParams:
    epsilon: float
    V_eps: float
    M_eps: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.epsilon * self.V_eps ** 3 > 0.125 * (1 + 1e-12):
            logger.warning("V_eps=%.4g violates eps*V^3 <= 1/8 at eps=%.4g", self.V_eps, self.epsilon)
        if self.M_eps > self.epsilon ** -0.5 * (1 + 1e-12):
            logger.warning("M_eps=%.4g violates M <= eps^-1/2 at eps=%.4g", self.M_eps, self.epsilon)


def default_good_params(epsilon: float) -> GoodTreeParams:
    """Largest cut-offs allowed: eps * V^3 = 1/8 and M = eps^-1/2."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    return GoodTreeParams(epsilon, (1.0 / (8.0 * epsilon)) ** (1.0 / 3.0), epsilon ** -0.5)


@dataclass(frozen=True)
class GoodTreeReport:
    n: int
    tau: float
    max_speed: float
    recollision_free: bool
    non_grazing: bool
    overlap_free: bool
    n_ok: bool
    speed_ok: bool
    good: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "good",
            self.recollision_free and self.non_grazing and self.overlap_free and self.n_ok and self.speed_ok,
        )

    @property
    def geometric_good(self) -> bool:
        """Good apart from the collision-count and speed cut-offs."""
        return self.recollision_free and self.non_grazing and self.overlap_free

    def to_row(self, epsilon: float) -> Dict[str, Any]:
        return {
            "epsilon": epsilon,
            "n": self.n,
            "tau": self.tau,
            "max_speed": self.max_speed,
            "recollision_free": self.recollision_free,
            "non_grazing": self.non_grazing,
            "overlap_free": self.overlap_free,
            "n_ok": self.n_ok,
            "speed_ok": self.speed_ok,
            "good": self.good,
        }


def _lattice_box(p0: np.ndarray, p1: np.ndarray, reach: float) -> np.ndarray:
    """Integer offsets m whose ball of radius reach can meet the segment p0 -> p1."""
    lo = np.floor(np.minimum(p0, p1) - reach).astype(int)
    hi = np.ceil(np.maximum(p0, p1) + reach).astype(int)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1).astype(float)


def _touch_mask(p0: np.ndarray, u: np.ndarray, length: float, offsets: np.ndarray, radius: float) -> np.ndarray:
    """For each offset m, whether |p0 - m + s u| <= radius for some s in [0, length]."""
    p = p0[None, :] - offsets
    a = float(np.dot(u, u))
    c = np.einsum("ij,ij->i", p, p) - radius * radius
    if a == 0.0:
        return c <= 0.0
    b = p @ u
    disc = b * b - a * c
    sq = np.sqrt(np.where(disc >= 0.0, disc, 0.0))
    s1 = (-b - sq) / a
    s2 = (-b + sq) / a
    return (disc >= 0.0) & (s1 <= length) & (s2 >= 0.0)


def _touches_before(times, pos, vels, j: int, line_start: np.ndarray, v_j: np.ndarray, epsilon: float) -> bool:
    """
    Whether the tagged path touches the background line of marker j (1-based)
    at some time before t_j, the contact at t_j itself excluded.
    """
    radius = epsilon * (1.0 + RECOLLISION_SLACK)
    for k in range(j):
        t_a, t_b = times[k], times[k + 1]
        length = t_b - t_a
        u = vels[k] - v_j
        d0 = pos[k] - (line_start + t_a * v_j)
        p0 = min_image(np.zeros(3), d0)
        p1 = p0 + length * u
        offsets = _lattice_box(p0, p1, radius)
        if k < j - 1:
            if np.any(_touch_mask(p0, u, length, offsets, radius)):
                return True
            continue
        # final segment: the image realizing the contact at t_j is entered only once,
        # so it counts only if already touched at the segment start
        end = p1[None, :] - offsets
        contact = int(np.argmin(np.abs(np.linalg.norm(end, axis=1) - epsilon)))
        touching = _touch_mask(p0, u, length, offsets, radius)
        touching[contact] = length > 0.0 and float(np.linalg.norm(p0 - offsets[contact])) <= radius
        if np.any(touching):
            return True
    return False


def classify(tree: CollisionTree, params: GoodTreeParams) -> GoodTreeReport:
    """
    Good-tree classification at diameter params.epsilon.

    Background trajectories are rebuilt from the markers: the centre of partner j
    is x(t_j) - eps*nu_j at t_j and moves with constant velocity v_j.

    Args:
        tree: Collision tree
        params: Diameter and the n / speed cut-offs

    Returns:
        GoodTreeReport carrying every flag
    """
    eps = params.epsilon
    times, pos, vels = tree.knots()
    speeds = [float(np.linalg.norm(v)) for v in vels] + [float(np.linalg.norm(c.v)) for c in tree.collisions]
    max_speed = max(speeds)

    non_grazing = True
    overlap_free = True
    recollision_free = True
    for j, marker in enumerate(tree.collisions, start=1):
        if impact_speed(vels[j - 1], marker.v, marker.nu) <= GRAZING_MARGIN:
            non_grazing = False
        centre_at_tj = pos[j] - eps * marker.nu
        line_start = centre_at_tj - marker.t * marker.v
        if float(np.linalg.norm(min_image(tree.x0, line_start))) <= eps:
            overlap_free = False
        if recollision_free and j >= 2 and _touches_before(times, pos, vels, j, line_start, marker.v, eps):
            recollision_free = False

    return GoodTreeReport(
        n=tree.n,
        tau=tree.tau,
        max_speed=max_speed,
        recollision_free=recollision_free,
        non_grazing=non_grazing,
        overlap_free=overlap_free,
        n_ok=tree.n <= params.M_eps,
        speed_ok=max_speed <= params.V_eps,
    )
