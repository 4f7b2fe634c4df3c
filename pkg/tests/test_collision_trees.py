# flake8: noqa: E501
"""
Tests for collision trees: pruning, the tree metric, serialization and the good-tree classifier.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.collision_trees import (
    CollisionMarker,
    CollisionTree,
    GoodTreeParams,
    classify,
    default_good_params,
    prune,
    tree_distance,
)
from core.laws import InitialLaw, Maxwellian, UniformSpatial
from core.particle_dynamics import SimConfig, run
from utils.errors import NonUnitNormalError, TreeFormatError
from utils.rng import PARTICLE, stream


def _head_on_tree() -> CollisionTree:
    """Tagged at unit speed meets a resting background at t=0.4."""
    marker = CollisionMarker(0.4, np.array([-1.0, 0.0, 0.0]), np.array([0.0, 0.0, 0.0]))
    return CollisionTree(np.array([0.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]), (marker,), 1.0)


def _random_tree(rng: np.random.Generator, n: int) -> CollisionTree:
    times = np.sort(rng.uniform(0.01, 1.0, n))
    markers = []
    for t in times:
        nu = rng.normal(size=3)
        markers.append(CollisionMarker(float(t), nu / np.linalg.norm(nu), rng.normal(size=3)))
    return CollisionTree(rng.random(3), rng.normal(size=3), tuple(markers), 1.0)


def _recollision_tree() -> CollisionTree:
    """
    Tagged at rest is struck by background A, then runs into a periodic image of A.

    After the first scatter the relative velocity is tangential, pointing at the
    image of A one cell up in y.
    """
    eps = 0.1
    s, c = 0.1, np.sqrt(1.0 - 0.01)
    nu1 = np.array([c, s, 0.0])
    tangent = np.array([-s, c, 0.0])
    v_a = nu1 - tangent
    x0 = np.array([0.5, 0.5, 0.5])
    v1 = np.dot(nu1, v_a) * nu1
    # relative position to the image one cell up, and the tangential relative velocity
    q = eps * nu1 - np.array([0.0, 1.0, 0.0])
    u = v1 - v_a
    b, a, cc = np.dot(q, u), np.dot(u, u), np.dot(q, q) - eps * eps
    dt = (-b - np.sqrt(b * b - a * cc)) / a
    nu2 = q + dt * u
    t1 = 0.2
    markers = (CollisionMarker(t1, nu1, v_a), CollisionMarker(t1 + dt, nu2 / np.linalg.norm(nu2), v_a))
    return CollisionTree(x0, np.zeros(3), markers, 2.0)


def test_tree_basics():
    tree = _head_on_tree()
    assert tree.n == 1
    assert tree.tau == pytest.approx(0.4)
    vels = tree.velocities()
    np.testing.assert_allclose(vels[1], [0.0, 0.0, 0.0])
    assert CollisionTree(np.zeros(3), np.zeros(3)).tau == 0.0


def test_tree_rejects_unsorted_markers():
    m1 = CollisionMarker(0.5, np.array([1.0, 0.0, 0.0]), np.zeros(3))
    m2 = CollisionMarker(0.3, np.array([1.0, 0.0, 0.0]), np.zeros(3))
    with pytest.raises(TreeFormatError):
        CollisionTree(np.zeros(3), np.zeros(3), (m1, m2))
    with pytest.raises(NonUnitNormalError):
        CollisionMarker(0.3, np.array([1.0, 1.0, 0.0]), np.zeros(3))


def test_prune():
    tree = _random_tree(np.random.default_rng(1), 3)
    pruned = prune(tree)
    assert pruned.n == 2
    assert pruned.collisions == tree.collisions[:2]
    with pytest.raises(ValueError):
        prune(CollisionTree(np.zeros(3), np.zeros(3)))


def test_tree_dict_round_trip():
    tree = _random_tree(np.random.default_rng(2), 4)
    again = CollisionTree.from_dict(tree.to_dict())
    assert tree_distance(tree, again) == 0.0
    assert again.horizon == 1.0
    with pytest.raises(TreeFormatError):
        CollisionTree.from_dict({"v0": [0, 0, 0], "collisions": []})


def test_tree_distance_examples():
    a = _head_on_tree()
    assert tree_distance(a, a) == 0.0
    assert tree_distance(a, prune(a)) == 1.0
    shifted = CollisionTree(a.x0, a.v0, (CollisionMarker(0.45, a.collisions[0].nu, a.collisions[0].v),), 1.0)
    assert tree_distance(a, shifted) == pytest.approx(0.05)
    # roots compared on the torus
    wrapped = CollisionTree(np.array([0.99, 0.0, 0.0]), a.v0, a.collisions, 1.0)
    assert tree_distance(a, wrapped) == pytest.approx(0.01)


@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=0, max_value=3))
@settings(max_examples=50, deadline=None)
def test_tree_distance_is_a_metric(seed, n):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_tree(rng, n) for _ in range(3))
    assert tree_distance(a, b) == tree_distance(b, a)
    assert 0.0 <= tree_distance(a, b) <= 1.0
    assert tree_distance(a, c) <= tree_distance(a, b) + tree_distance(b, c) + 1e-12


def test_default_good_params():
    params = default_good_params(1.0 / 8.0)
    assert params.V_eps == pytest.approx(1.0)
    assert params.M_eps == pytest.approx(np.sqrt(8.0))
    with pytest.raises(ValueError):
        default_good_params(0.0)


def test_classify_head_on_tree_is_good():
    report = classify(_head_on_tree(), default_good_params(0.1))
    assert report.non_grazing and report.overlap_free and report.recollision_free
    assert report.n_ok and report.speed_ok
    assert report.good and report.geometric_good
    assert report.to_row(0.1)["good"] is True


def test_classify_grazing_marker():
    marker = CollisionMarker(0.3, np.array([0.0, 1.0, 0.0]), np.zeros(3))
    tree = CollisionTree(np.zeros(3), np.array([1.0, 0.0, 0.0]), (marker,), 1.0)
    report = classify(tree, default_good_params(0.1))
    assert not report.non_grazing
    assert not report.good


def test_classify_initial_overlap_through_the_boundary():
    """The partner line started 0.05 away from the root, one lap earlier."""
    x0 = np.array([0.5, 0.5, 0.5])
    marker = CollisionMarker(1.0, np.array([1.0, 0.0, 0.0]), np.array([0.95, 0.0, 0.0]))
    report = classify(CollisionTree(x0, np.zeros(3), (marker,), 2.0), default_good_params(0.1))
    assert report.non_grazing
    assert not report.overlap_free
    assert not report.geometric_good


def test_classify_cut_offs():
    tree = _random_tree(np.random.default_rng(3), 5)
    report = classify(tree, GoodTreeParams(0.1, 100.0, 3.0))
    assert not report.n_ok
    slow = CollisionTree(np.zeros(3), np.array([2.0, 0.0, 0.0]), (), 1.0)
    assert not classify(slow, default_good_params(0.1)).speed_ok


def test_classify_detects_recollision():
    tree = _recollision_tree()
    assert not classify(tree, default_good_params(0.1)).recollision_free
    assert classify(prune(tree), default_good_params(0.1)).recollision_free


def test_recollision_flag_matches_simulated_partners():
    """Repeated partner indices in simulated runs are exactly the flagged re-collisions."""
    config = SimConfig(epsilon=0.2, T=2.0)
    f0 = InitialLaw(UniformSpatial(), Maxwellian(1.0))
    params = default_good_params(0.2)
    for i in range(60):
        outcome = run(config, stream(17, PARTICLE, 0, i), f0, Maxwellian(1.0))
        if not outcome.completed:
            continue
        repeated = len(set(outcome.partners)) < len(outcome.partners)
        report = classify(outcome.tree, params)
        assert report.recollision_free == (not repeated)
        assert report.overlap_free
