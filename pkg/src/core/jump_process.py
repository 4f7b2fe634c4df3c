# flake8: noqa: E501
"""
Velocity-jump process of the linear Boltzmann equation.

Free flight at velocity v; jumps at rate lambda(v), realized by thinning a
Poisson clock of rate 1.05 pi (|v| + beta). At a jump the partner velocity w
and the collision parameter nu are drawn with density proportional to
g0(w)[(v - w).nu]_+ and v becomes v - nu (nu.(v - w)).
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.collision_operators import RateCache, rate_cache_for
from core.initial_sampling import ParticleState
from core.laws import BackgroundLaw, InitialLaw
from core.torus_geometry import wrap
from utils.errors import ThinningError

logger = logging.getLogger(__name__)

THINNING_MARGIN = 1.05
MIN_ACCEPTANCE = 1e-4
MIN_PROPOSALS_FOR_CHECK = 1000


@dataclass(frozen=True, eq=False)
class JumpTrajectory:
    """Jump instants (t, x, v) with the post-jump velocity, plus the state at T."""

    states: List[Tuple[float, np.ndarray, np.ndarray]]
    final: ParticleState
    absorbed: bool = False

    @property
    def n_jumps(self) -> int:
        return len(self.states)

    def to_dict(self) -> Dict:
        return {
            "jumps": [{"t": float(t), "x": [float(c) for c in x], "v": [float(c) for c in v]} for t, x, v in self.states],
            "final": self.final.to_dict(),
            "absorbed": self.absorbed,
        }


@dataclass(frozen=True, eq=False)
class JumpEnsemble:
    """
    Many independent particles observed at a list of times.

    velocities[k] and positions[k] hold the states at times[k]; alive[k] is False
    for particles absorbed before times[k] (loss-only runs).
    """

    times: Tuple[float, ...]
    velocities: List[np.ndarray]
    positions: List[np.ndarray]
    alive: List[np.ndarray]
    jumps: List[np.ndarray]
    proposals: int = 0
    accepted: int = 0

    def at(self, t: float) -> int:
        return self.times.index(t)


def sample_partner(v: np.ndarray, g0: BackgroundLaw, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw (w, nu) with density proportional to g0(w)[(v - w).nu]_+ for each row of v.

    w is proposed from g0(w)(|v| + |w|), a mixture of g0 and its size-biased law,
    and accepted with probability |v - w| / (|v| + |w|). Given w, nu is
    cosine-weighted around v - w.
    """
    n = v.shape[0]
    speed = np.linalg.norm(v, axis=1)
    mean_speed = g0.mean_speed()
    w = np.empty_like(v)
    pending = np.arange(n)
    while pending.size:
        m = pending.size
        p_plain = speed[pending] / (speed[pending] + mean_speed)
        plain = rng.random(m) < p_plain
        cand = np.empty((m, 3))
        if plain.any():
            cand[plain] = g0.sample(rng, int(plain.sum()))
        if (~plain).any():
            cand[~plain] = g0.sample(rng, int((~plain).sum()), size_biased=True)
        rel = np.linalg.norm(v[pending] - cand, axis=1)
        bound = speed[pending] + np.linalg.norm(cand, axis=1)
        ok = rng.random(m) * bound < rel
        w[pending[ok]] = cand[ok]
        pending = pending[~ok]

    rel = v - w
    axis = rel / np.linalg.norm(rel, axis=1)[:, None]
    cos_t = np.sqrt(rng.random(n))
    sin_t = np.sqrt(1.0 - cos_t ** 2)
    phi = 2.0 * np.pi * rng.random(n)
    helper = np.where(np.abs(axis[:, :1]) < 0.9, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(axis, e1)
    nu = cos_t[:, None] * axis + sin_t[:, None] * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    return w, nu


def jump_update(v: np.ndarray, w: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Row-wise v - nu (nu.(v - w)), the scatter rule of the particle model."""
    return v - nu * np.einsum("ij,ij->i", nu, v - w)[:, None]


class JumpProcessSampler:
    """Thinning sampler for the velocity-jump process against a background law."""

    def __init__(self, g0: BackgroundLaw, rates: Optional[RateCache] = None, margin: float = THINNING_MARGIN, gain_enabled: bool = True):
        self.g0 = g0
        self.rates = rates or rate_cache_for(g0)
        self.margin = margin
        self.gain_enabled = gain_enabled

    def dominating_rate(self, speed: np.ndarray) -> np.ndarray:
        return self.margin * self.rates.upper_bound(speed)

    def _check_acceptance(self, proposals: int, accepted: int) -> None:
        if proposals >= MIN_PROPOSALS_FOR_CHECK and accepted < MIN_ACCEPTANCE * proposals:
            raise ThinningError(f"Thinning acceptance {accepted}/{proposals} is below {MIN_ACCEPTANCE}")

    @staticmethod
    def _record(k, idx, t_obs, x, v, clock, alive, jumps, rec_v, rec_x, rec_alive, rec_jumps, frozen: bool = False) -> None:
        rec_v[k][idx] = v[idx]
        rec_x[k][idx] = x[idx] if frozen else wrap(x[idx] + (t_obs - clock[idx])[:, None] * v[idx])
        rec_alive[k][idx] = alive[idx]
        rec_jumps[k][idx] = jumps[idx]

    def ensemble(self, f0: InitialLaw, times: Sequence[float], n: int, rng: np.random.Generator) -> JumpEnsemble:
        """
        Simulate n independent particles and record them at the given times.

        Args:
            f0: Initial law of each particle
            times: Observation times (any order, non-negative)
            n: Number of particles
            rng: Random stream

        Returns:
            JumpEnsemble with one entry per requested time
        """
        obs = sorted(float(t) for t in times)
        if obs and obs[0] < 0:
            raise ValueError("Observation times must be non-negative")
        x, v = f0.sample(rng, n)
        x = wrap(x)
        clock = np.zeros(n)
        alive = np.ones(n, dtype=bool)
        jumps = np.zeros(n, dtype=np.int64)
        rec_v = [np.empty((n, 3)) for _ in obs]
        rec_x = [np.empty((n, 3)) for _ in obs]
        rec_alive = [np.empty(n, dtype=bool) for _ in obs]
        rec_jumps = [np.empty(n, dtype=np.int64) for _ in obs]
        recorded = np.zeros(n, dtype=np.int64)
        horizon = obs[-1] if obs else 0.0
        proposals = accepted = 0

        active = np.arange(n)
        while active.size:
            speed = np.linalg.norm(v[active], axis=1)
            nxt = clock[active] + rng.exponential(1.0 / self.dominating_rate(speed))

            # observation times passed before the next proposal see the current free flight
            for k, t_obs in enumerate(obs):
                hit = (recorded[active] == k) & (nxt > t_obs)
                if hit.any():
                    idx = active[hit]
                    self._record(k, idx, t_obs, x, v, clock, alive, jumps, rec_v, rec_x, rec_alive, rec_jumps)
                    recorded[idx] += 1

            moving = nxt <= horizon
            active, nxt = active[moving], nxt[moving]
            if not active.size:
                break
            x[active] = wrap(x[active] + (nxt - clock[active])[:, None] * v[active])
            clock[active] = nxt

            speed = np.linalg.norm(v[active], axis=1)
            accept = rng.random(active.size) * self.dominating_rate(speed) < self.rates.rates(speed)
            proposals += active.size
            accepted += int(accept.sum())
            self._check_acceptance(proposals, accepted)
            jumpers = active[accept]
            if not jumpers.size:
                continue
            jumps[jumpers] += 1
            if self.gain_enabled:
                w, nu = sample_partner(v[jumpers], self.g0, rng)
                v[jumpers] = jump_update(v[jumpers], w, nu)
                continue
            alive[jumpers] = False
            for k, t_obs in enumerate(obs):
                late = jumpers[recorded[jumpers] <= k]
                self._record(k, late, t_obs, x, v, clock, alive, jumps, rec_v, rec_x, rec_alive, rec_jumps, frozen=True)
            recorded[jumpers] = len(obs)
            active = active[~accept]

        logger.debug("Jump ensemble: %d particles, %d proposals, %d accepted", n, proposals, accepted)
        return JumpEnsemble(tuple(obs), rec_v, rec_x, rec_alive, rec_jumps, proposals, accepted)

    def trajectory(self, f0: InitialLaw, T: float, rng: np.random.Generator) -> JumpTrajectory:
        """Single trajectory with every jump recorded."""
        x, v = f0.sample(rng, 1)
        x, v = wrap(x[0]), v[0].copy()
        t = 0.0
        states: List[Tuple[float, np.ndarray, np.ndarray]] = []
        proposals = accepted = 0
        while True:
            speed = float(np.linalg.norm(v))
            bound = float(self.dominating_rate(speed))
            dt = rng.exponential(1.0 / bound)
            if t + dt > T:
                return JumpTrajectory(states, ParticleState(wrap(x + (T - t) * v), v), absorbed=False)
            t += dt
            x = wrap(x + dt * v)
            proposals += 1
            if rng.random() * bound < float(self.rates.rates(speed)):
                accepted += 1
                if not self.gain_enabled:
                    return JumpTrajectory(states, ParticleState(x, v), absorbed=True)
                w, nu = sample_partner(v[None, :], self.g0, rng)
                v = jump_update(v[None, :], w, nu)[0]
                states.append((t, x.copy(), v.copy()))
            self._check_acceptance(proposals, accepted)


def jump_sample(f0: InitialLaw, g0: BackgroundLaw, T: float, rng: np.random.Generator, gain_enabled: bool = True) -> JumpTrajectory:
    """One velocity-jump trajectory on [0, T]."""
    return JumpProcessSampler(g0, gain_enabled=gain_enabled).trajectory(f0, T, rng)


def jump_ensemble(f0: InitialLaw, g0: BackgroundLaw, times: Sequence[float], n: int, rng: np.random.Generator, gain_enabled: bool = True) -> JumpEnsemble:
    """Vectorized counterpart of jump_sample for n particles."""
    return JumpProcessSampler(g0, gain_enabled=gain_enabled).ensemble(f0, times, n, rng)
