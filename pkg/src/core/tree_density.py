# flake8: noqa: E501
"""
Density of the idealized process on collision trees.

P_t(tree) is the weight of the linear Boltzmann dynamics on histories that
followed exactly this tree up to time t: survival on every free flight,
times the gain factor g0(v_j)[impact]_+ at every collision, times f0 at the root.
"""

import logging
from typing import Callable, Optional

import numpy as np

from core.collision_operators import loss_rate
from core.collision_trees import CollisionTree, prune
from core.laws import BackgroundLaw, InitialLaw
from core.torus_geometry import impact_speed

logger = logging.getLogger(__name__)

RateFn = Callable[[np.ndarray], float]


def _rate_fn(g0: BackgroundLaw, rates: Optional[RateFn]) -> RateFn:
    if rates is not None:
        return lambda v: float(np.asarray(rates(np.asarray(v, dtype=float))).reshape(-1)[0])
    return lambda v: loss_rate(v, g0)


def tree_density_P(tree: CollisionTree, t: float, f0: InitialLaw, g0: BackgroundLaw, rates: Optional[RateFn] = None) -> float:
    """
    Evaluate P_t(tree) recursively over the pruned trees.

    Args:
        tree: Collision tree
        t: Evaluation time
        f0: Initial law of the tagged particle
        g0: Background law
        rates: Optional lambda(v) evaluator, e.g. a RateCache; exact quadrature otherwise

    Returns:
        Density value, 0 when t precedes the final collision or that collision is grazing
    """
    rate = _rate_fn(g0, rates)
    return _evaluate(tree, float(t), f0, g0, rate)


def _evaluate(tree: CollisionTree, t: float, f0: InitialLaw, g0: BackgroundLaw, rate: RateFn) -> float:
    if t < tree.tau:
        return 0.0
    if tree.n == 0:
        v0 = np.asarray(tree.v0, dtype=float)
        root = float(f0.density(np.asarray(tree.x0, dtype=float), v0))
        return float(np.exp(-t * rate(v0)) * root)

    vels = tree.velocities()
    last = tree.collisions[-1]
    impact = impact_speed(vels[-2], last.v, last.nu)
    if impact <= 0.0:
        return 0.0
    gain = float(g0.pdf(np.asarray(last.v, dtype=float))) * impact
    if gain == 0.0:
        return 0.0
    survival = np.exp(-(t - tree.tau) * rate(vels[-1]))
    earlier = _evaluate(prune(tree), tree.tau, f0, g0, rate)
    logger.debug("Tree density level %d: gain %.6g survival %.6g", tree.n, gain, survival)
    return float(survival * earlier * gain)
