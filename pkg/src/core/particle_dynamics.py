# flake8: noqa: E501
"""
Event-driven Rayleigh gas: one tagged hard sphere of diameter epsilon among N
background spheres that move freely and never change velocity.

Only tagged-background pairs interact, so every collision invalidates all N
predictions. Predictions are made window by window: inside a window no pair
moves by more than one torus side, which keeps the periodic image search to
the 5^3 nearest images. Predicted contacts go into a lazy priority queue;
entries from an earlier prediction round are skipped when they surface.
"""

import heapq
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from core.collision_trees import CollisionMarker, CollisionTree
from core.initial_sampling import (
    BackgroundConfiguration,
    ParticleState,
    boltzmann_grad_n,
    sample_initial_configuration,
)
from core.laws import BackgroundLaw, InitialLaw, Maxwellian
from core.torus_geometry import (
    TOL_CONTACT,
    ContactEvent,
    collision_normal,
    min_image,
    predict_contacts,
    scatter,
    wrap,
)

logger = logging.getLogger(__name__)

TOL_SIMULTANEOUS = 1e-10
EVENT_CAP = 10_000
WINDOW_SHELLS = 2


class SimStatus(str, Enum):
    COMPLETED = "Completed"
    ABORTED_SIMULTANEOUS = "AbortedSimultaneous"
    ABORTED_EVENT_CAP = "AbortedEventCap"


@dataclass(frozen=True)
class SimConfig:
    """
    Parameters of one particle run.

    N defaults to round(epsilon^-2). With gain disabled the tagged particle is
    absorbed at its first collision.
    """

    epsilon: float
    T: float
    seed: int = 0
    N: Optional[int] = None
    gain_enabled: bool = True
    tol_simultaneous: float = TOL_SIMULTANEOUS
    event_cap: int = EVENT_CAP

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.25:
            raise ValueError(f"epsilon must lie in (0, 0.25), got {self.epsilon}")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T must be finite and positive, got {self.T}")
        if self.N is None:
            object.__setattr__(self, "N", boltzmann_grad_n(self.epsilon))
        if self.N < 0:
            raise ValueError(f"N must be non-negative, got {self.N}")
        packing = 4.0 / 3.0 * np.pi * self.epsilon ** 3 * self.N
        if packing >= 0.5:
            raise ValueError(f"Configuration is not dilute: (4/3) pi eps^3 N = {packing:.3f} >= 1/2")


@dataclass(frozen=True, eq=False)
class SimOutcome:
    tree: CollisionTree
    final_state: ParticleState
    status: SimStatus
    events: Tuple[ContactEvent, ...] = ()
    backgrounds: Optional[BackgroundConfiguration] = None
    attempts: int = 1
    absorbed_at: Optional[float] = None
    final_time: float = 0.0

    @property
    def completed(self) -> bool:
        return self.status == SimStatus.COMPLETED

    @property
    def partners(self) -> Tuple[int, ...]:
        return tuple(e.partner_index for e in self.events)


class PendingContact(NamedTuple):
    time: float
    generation: int
    partner: int
    dt: float


class ContactQueue:
    """
    Min-heap of predicted contacts keyed by absolute time.

    A new prediction round invalidates everything pushed before it. Stale
    entries stay in the heap and are dropped when they reach the top.
    """

    def __init__(self):
        self._heap: List[PendingContact] = []
        self.generation = 0

    def __len__(self) -> int:
        return sum(1 for c in self._heap if c.generation == self.generation)

    def repredict(self, t_now: float, times: np.ndarray) -> None:
        """Start a new round holding the finite entries of times, offsets from t_now."""
        self.generation += 1
        for j in np.flatnonzero(np.isfinite(times)):
            dt = float(times[j])
            heapq.heappush(self._heap, PendingContact(t_now + dt, self.generation, int(j), dt))

    def _drop_stale(self) -> None:
        while self._heap and self._heap[0].generation != self.generation:
            heapq.heappop(self._heap)

    def peek(self) -> Optional[PendingContact]:
        self._drop_stale()
        return self._heap[0] if self._heap else None

    def pop(self) -> Optional[PendingContact]:
        self._drop_stale()
        return heapq.heappop(self._heap) if self._heap else None


def _window(v: np.ndarray, velocities: np.ndarray, remaining: float) -> float:
    if velocities.shape[0] == 0:
        return remaining
    fastest = float(np.max(np.abs(velocities - v[None, :])))
    if fastest == 0.0:
        return remaining
    return min(remaining, 1.0 / fastest)


class RayleighGasSimulator:
    """Runs the exact event-driven dynamics for a given configuration."""

    def __init__(self, config: SimConfig):
        self.config = config

    def run_from(self, tagged: ParticleState, backgrounds: BackgroundConfiguration, attempts: int = 1) -> SimOutcome:
        """
        Evolve a prescribed overlap-free configuration up to time T.

        Each window predicts slightly past its end, so two contacts closer than
        tol_simultaneous abort the run even when a window boundary separates them.

        Args:
            tagged: Tagged particle at time zero
            backgrounds: Background particles at time zero
            attempts: Configurations drawn before this one was accepted

        Returns:
            SimOutcome with the realized tree and contact events
        """
        cfg = self.config
        eps = cfg.epsilon
        x = wrap(tagged.x)
        v = np.asarray(tagged.v, dtype=float).copy()
        bx = backgrounds.positions
        bv = backgrounds.velocities
        t = 0.0
        tree = CollisionTree(x.copy(), v.copy(), (), cfg.T)
        events: List[ContactEvent] = []
        queue = ContactQueue()
        last_partner = -1
        status = SimStatus.COMPLETED
        absorbed_at = None

        while t < cfg.T:
            remaining = cfg.T - t
            w = _window(v, bv, remaining)
            lookahead = cfg.tol_simultaneous if w < remaining else 0.0
            if len(bv):
                rel_pos = min_image(wrap(bx + t * bv), x[None, :])
                times = predict_contacts(rel_pos, v[None, :] - bv, eps, w + lookahead, k=WINDOW_SHELLS)
                if last_partner >= 0 and times[last_partner] <= TOL_CONTACT:
                    times[last_partner] = np.inf
            else:
                times = np.empty(0)
            queue.repredict(t, times)

            first = queue.pop()
            if first is None or first.dt > w:
                x = wrap(x + w * v)
                t = t + w if w < remaining else cfg.T
                continue

            second = queue.peek()
            if second is not None and second.time - first.time < cfg.tol_simultaneous:
                logger.debug("Simultaneous contacts at t=%.12g with %d and %d", first.time, first.partner, second.partner)
                status = SimStatus.ABORTED_SIMULTANEOUS
                break

            j = first.partner
            t += first.dt
            x = wrap(x + first.dt * v)
            nu = collision_normal(x, wrap(bx[j] + t * bv[j]), eps)
            events.append(ContactEvent(t, nu, j))
            tree = tree.append(CollisionMarker(t, nu, bv[j].copy()))
            logger.debug("Collision %d at t=%.9g with background %d", tree.n, t, j)
            if not cfg.gain_enabled:
                absorbed_at = t
                break
            v = scatter(v, bv[j], nu)
            last_partner = j
            if tree.n >= cfg.event_cap:
                status = SimStatus.ABORTED_EVENT_CAP
                break

        return SimOutcome(
            tree=tree,
            final_state=ParticleState(x, v),
            status=status,
            events=tuple(events),
            backgrounds=backgrounds,
            attempts=attempts,
            absorbed_at=absorbed_at,
            final_time=min(t, cfg.T),
        )


    def run(self, rng: np.random.Generator, f0: InitialLaw, g0: BackgroundLaw) -> SimOutcome:
        tagged, backgrounds, attempts = sample_initial_configuration(f0, g0, self.config.epsilon, self.config.N, rng)
        return self.run_from(tagged, backgrounds, attempts)


def run(config: SimConfig, rng: np.random.Generator, f0: Optional[InitialLaw] = None, g0: Optional[BackgroundLaw] = None) -> SimOutcome:
    """Sample an overlap-free initial configuration and simulate it to time T."""
    return RayleighGasSimulator(config).run(rng, f0 or InitialLaw(), g0 or Maxwellian(1.0))


def tagged_trajectory(tree: CollisionTree, t: float, x0v0: Optional[ParticleState] = None) -> ParticleState:
    """
    Tagged state at time t rebuilt from the tree by free flight between markers.

    Velocities are right-continuous: at t = t_j the post-collisional velocity is returned.

    Raises:
        ValueError: if t is negative or beyond the tree's horizon
    """
    horizon = tree.horizon if tree.horizon is not None else np.inf
    if t < 0.0 or t > horizon + 1e-12:
        raise ValueError(f"t={t} outside the tree's valid range [0, {horizon}]")
    x = np.asarray(tree.x0 if x0v0 is None else x0v0.x, dtype=float)
    v = np.asarray(tree.v0 if x0v0 is None else x0v0.v, dtype=float)
    t_prev = 0.0
    for marker in tree.collisions:
        if marker.t > t:
            break
        x = x + (marker.t - t_prev) * v
        v = scatter(v, marker.v, marker.nu)
        t_prev = marker.t
    return ParticleState(wrap(x + (t - t_prev) * v), v)
