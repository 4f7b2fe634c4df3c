# flake8: noqa: E501
"""
Loss semigroup T(t) and the Duhamel series of the linear Boltzmann equation.

P^(0)_t = T(t) f0 and P^(j)_t = integral_0^t T(t - s) Q+[P^(j-1)_s] ds. All levels
live on one shared grid of time nodes, so level j reuses the stored values of
level j - 1. Velocity-only densities integrate the loss factor exactly over each
step (exponential trapezoid); phase-space densities use the trapezoid rule with
the transport shift.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from core.collision_operators import GainOperator, RateCache, rate_cache_for
from core.kinetic_density import DensityMode, KineticDensity
from core.laws import BackgroundLaw

logger = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-2
DEFAULT_J_MAX = 24
DEFAULT_TIME_STEPS = 64


def _cell_rates(f: KineticDensity, rates: RateCache) -> np.ndarray:
    return rates(f.grid.points()).reshape(f.grid.shape)


def _shift_space(values: np.ndarray, f: KineticDensity, t: float) -> np.ndarray:
    """values(x - t v) for every velocity cell, periodic linear interpolation in x."""
    out = np.empty_like(values)
    nx = f.spatial.bins_per_axis
    c = f.grid.centers
    for a, va in enumerate(c):
        for b, vb in enumerate(c):
            for g, vg in enumerate(c):
                shift = t * np.array([va, vb, vg]) * nx
                out[..., a, b, g] = ndimage.shift(values[..., a, b, g], shift, order=1, mode="grid-wrap")
    return out


def semigroup_T(f: KineticDensity, t: float, g0: BackgroundLaw, rates: Optional[RateCache] = None) -> KineticDensity:
    """
    Apply T(t): multiply by exp(-t lambda(v)) and, in phase-space mode, transport by -t v.

    Args:
        f: Density on the grid
        t: Elapsed time, non-negative
        g0: Background law
        rates: Optional prebuilt rate cache

    Returns:
        New density on the same grid
    """
    if t < 0:
        raise ValueError(f"Semigroup time must be non-negative, got {t}")
    if t == 0:
        return f.with_values(f.values.copy())
    rates = rates or rate_cache_for(g0)
    damping = np.exp(-t * _cell_rates(f, rates))
    if f.mode == DensityMode.VELOCITY_ONLY:
        return f.with_values(f.values * damping)
    return f.with_values(_shift_space(f.values, f, t) * damping)


def _exponential_weights(lam: np.ndarray, step: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Weights for integral_0^step exp(-r lam) g(r) dr with g linear between its end values.

    Returns (decay, weight of the earlier node, weight of the later node).
    """
    x = lam * step
    decay = np.exp(-x)
    small = x < 1e-4
    safe_lam = np.where(small, 1.0, lam)
    i0 = np.where(small, step * (1.0 - x / 2.0 + x * x / 6.0), (1.0 - decay) / safe_lam)
    i1 = np.where(small, step * step * (0.5 - x / 3.0 + x * x / 8.0), (1.0 - decay * (1.0 + x)) / safe_lam ** 2)
    w_early = i1 / step
    w_late = i0 - i1 / step
    return decay, w_early, w_late


def duhamel_solve(
    f0: KineticDensity,
    g0: BackgroundLaw,
    t: float,
    j_max: int = DEFAULT_J_MAX,
    n_time_steps: int = DEFAULT_TIME_STEPS,
    gain: Optional[GainOperator] = None,
    tail_tolerance: float = TAIL_TOLERANCE,
) -> Tuple[KineticDensity, List[float]]:
    """
    Partial sum of the Duhamel series up to level j_max at time t.

    Args:
        f0: Initial density
        g0: Background law
        t: Final time
        j_max: Highest collision level kept
        n_time_steps: Time steps of the shared node grid on [0, t]
        gain: Prebuilt gain operator on f0's velocity grid
        tail_tolerance: Mass deficit or overshoot above which a warning is logged

    Returns:
        (partial-sum density, mass of each level P^(j)_t for j = 0..j_max)
    """
    if j_max < 0:
        raise ValueError(f"j_max must be non-negative, got {j_max}")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if t == 0 or j_max == 0:
        p0 = semigroup_T(f0, t, g0)
        masses = [p0.mass()] + [0.0] * j_max
        return p0, masses

    rates = gain.rates if gain is not None else rate_cache_for(g0)
    gain = gain or GainOperator(f0.grid, g0, rates)
    if gain.grid != f0.grid:
        raise ValueError("Gain operator was built for a different velocity grid")

    grid = f0.grid
    n_v = grid.n_cells
    step = t / n_time_steps
    nodes = np.linspace(0.0, t, n_time_steps + 1)
    lam = rates(grid.points())
    h3 = grid.cell_volume
    phase = f0.mode == DensityMode.PHASE_SPACE

    # level values at every node: (n_nodes, n_space, n_v)
    base = f0.values.reshape(-1, n_v) if phase else f0.values.reshape(1, n_v)
    level = np.exp(-np.outer(nodes, lam))[:, None, :] * base[None, :, :]
    if phase:
        for m, s in enumerate(nodes):
            level[m] = _shift_space(base.reshape(f0.values.shape), f0, s).reshape(-1, n_v) * np.exp(-s * lam)[None, :]

    total = level[-1].copy()
    masses = [float(level[-1].mean(axis=0).sum() * h3)]
    decay, w_early, w_late = _exponential_weights(lam, step)

    for j in range(1, j_max + 1):
        gained = gain.apply(level.reshape(-1, n_v).T).T.reshape(level.shape)
        nxt = np.zeros_like(level)
        for m in range(1, nodes.size):
            if phase:
                carried = nxt[m - 1] + 0.5 * step * gained[m - 1]
                carried = _transport_flat(carried, f0, step) * np.exp(-step * lam)[None, :]
                nxt[m] = carried + 0.5 * step * gained[m]
            else:
                nxt[m] = decay * nxt[m - 1] + w_early * gained[m - 1] + w_late * gained[m]
        np.maximum(nxt, 0.0, out=nxt)
        level = nxt
        total += level[-1]
        masses.append(float(level[-1].mean(axis=0).sum() * h3))
        logger.debug("Duhamel level %d: mass %.6g", j, masses[-1])

    overshoot = sum(masses) - 1.0
    if overshoot > 0.0:
        # time discretization overshoots unit mass by O(step^2)
        if overshoot > tail_tolerance:
            logger.warning("Duhamel partial sum exceeds unit mass by %.4g with n_time_steps=%d; rescaling", overshoot, n_time_steps)
        else:
            logger.debug("Duhamel partial sum exceeds unit mass by %.3g; rescaling", overshoot)
        scale = 1.0 / sum(masses)
        total *= scale
        masses = [m * scale for m in masses]
    deficit = 1.0 - sum(masses)
    if deficit > tail_tolerance:
        logger.warning("Duhamel series truncated at j_max=%d leaves mass deficit %.4g (tolerance %.1e)", j_max, deficit, tail_tolerance)
    density = f0.with_values(total.reshape(f0.values.shape))
    return density, masses


def _transport_flat(flat: np.ndarray, f0: KineticDensity, s: float) -> np.ndarray:
    shaped = flat.reshape(f0.values.shape)
    return _shift_space(shaped, f0, s).reshape(flat.shape)
