# flake8: noqa: E501
"""
Counter-based random streams.

Every realization gets its own Philox generator keyed by (seed, purpose, indices),
so results never depend on how work is spread over processes.
"""

from typing import Tuple

import numpy as np

PARTICLE = 0
JUMP = 1
BOOTSTRAP = 2
LOSS_PARTICLE = 3
LOSS_JUMP = 4
ADHOC = 5


def stream_key(purpose: int, *indices: int) -> Tuple[int, ...]:
    """Spawn key for a stream; negative indices are rejected."""
    key = (int(purpose),) + tuple(int(i) for i in indices)
    if any(k < 0 for k in key):
        raise ValueError(f"Stream key components must be non-negative: {key}")
    return key


def stream(seed: int, purpose: int, *indices: int) -> np.random.Generator:
    """
    Create an independent generator.

    Args:
        seed: Experiment seed
        purpose: One of the module-level purpose constants
        *indices: Realization coordinates (epsilon index, realization index, retry...)

    Returns:
        numpy Generator backed by Philox
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=stream_key(purpose, *indices))
    return np.random.Generator(np.random.Philox(seq))
