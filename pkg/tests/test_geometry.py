import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lazydash.geometry import (Path, RobotModel, capsule, collides, disc, grasp_config, interpolate,
                               sample_stable_pose, segment_segment_distance, shape_distance, stable_pose_valid)
from conftest import make_world, one_robot_world


def test_disjoint_discs():
    assert not collides(disc((0, 0), 1), disc((3, 0), 1))


def test_capsule_hits_disc():
    assert collides(capsule((0, 0), (2, 0), 0.1), disc((1, 0.05), 0.1))


def test_tangency_is_clear():
    assert not collides(disc((0, 0), 1), disc((2, 0), 1))
    assert collides(disc((0, 0), 1), disc((2 - 1e-6, 0), 1))


def _sampled_distance(a, b, n=10_000):
    """Dense point-sampling estimate of the core distance between two shapes."""
    t = np.linspace(0.0, 1.0, n)[:, None]
    pa = np.asarray(a.a) + t * (np.asarray(a.b) - np.asarray(a.a))
    # distance from every axis sample to the other shape's segment, closed form per point
    ba, bb = np.asarray(b.a), np.asarray(b.b)
    d = bb - ba
    L2 = float(d @ d)
    if L2 == 0:
        return float(np.min(np.linalg.norm(pa - ba, axis=1)))
    s = np.clip(((pa - ba) @ d) / L2, 0, 1)
    return float(np.min(np.linalg.norm(pa - (ba + s[:, None] * d), axis=1)))


def _random_shape(rng, kind):
    c = rng.uniform(-1, 1, 2)
    r = rng.uniform(0.01, 0.3)
    if kind == "disc":
        return disc(c, r)
    return capsule(c, c + rng.uniform(-1, 1, 2), r)


def test_collides_matches_sampling_oracle():
    rng = np.random.default_rng(0)
    trials, agree = 10_000, 0
    for k in range(trials):
        a = _random_shape(rng, "capsule")
        b = _random_shape(rng, ["disc", "capsule"][k % 2])
        oracle = _sampled_distance(a, b, 2000) < a.radius + b.radius
        got = collides(a, b)
        # the oracle overestimates distance by at most half a sample step
        step = np.hypot(*np.subtract(a.b, a.a)) / 1999
        near = abs(_sampled_distance(a, b, 2000) - (a.radius + b.radius)) <= step
        agree += (oracle == got) or near
    assert agree / trials >= 0.999


def test_capsule_disc_oracle_thousand_trials():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        a = _random_shape(rng, "capsule")
        b = _random_shape(rng, "disc")
        d = _sampled_distance(a, b)
        core = float(segment_segment_distance(a.a, a.b, b.a, b.b))
        step = np.hypot(*np.subtract(a.b, a.a)) / 9999
        assert core <= d + 1e-12
        assert d - core <= step + 1e-9


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8), st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_collides_symmetric(xs, r1, r2):
    a = capsule(xs[0:2], xs[2:4], r1)
    b = capsule(xs[4:6], xs[6:8], r2)
    assert collides(a, b) == collides(b, a)
    assert shape_distance(a, b) == pytest.approx(shape_distance(b, a), abs=1e-12)


def test_stable_pose_examples():
    w = one_robot_world()
    assert stable_pose_valid(w, 0, (0.5, 0.0))
    assert not stable_pose_valid(w, 0, (0.5, 0.0), [disc((0.5, 0.09), 0.05)])
    assert not stable_pose_valid(w, 0, (0.0, 0.0))


def test_stable_pose_rejects_wall_overlap():
    w = make_world([((0, 0), 1.0, 0.04, 1.0)], [(0.05, (0.5, 0.0), (0.5, 0.2))],
                   [(0.3, -0.4, 0.7, 0.4)], walls=[((0.5, -0.1), (0.5, 0.1))])
    assert not stable_pose_valid(w, 0, (0.5, 0.0))
    assert stable_pose_valid(w, 0, (0.5, 0.25))


def test_sample_stable_pose_empty_surface_and_determinism():
    w = one_robot_world()
    p = sample_stable_pose(w, 0, [], np.random.default_rng(3))
    assert p is not None and stable_pose_valid(w, 0, p)
    q = sample_stable_pose(w, 0, [], np.random.default_rng(3))
    assert p == q


def test_sample_stable_pose_fully_tiled_surface():
    w = make_world([((0, 0), 1.0, 0.04, 1.0)], [(0.05, (0.15, 0.15), (0.15, 0.15))], [(0.0, 0.0, 0.3, 0.3)])
    # discs of radius 0.05 on a 0.05 grid leave no room for another radius-0.05 disc
    grid = np.arange(0.0, 0.31, 0.05)
    blocked = [disc((x, y), 0.05) for x in grid for y in grid]
    # grid oracle at 1 cm: no admissible centre exists
    pts = np.arange(0.05, 0.2501, 0.01)
    assert not any(stable_pose_valid(w, 0, (x, y), blocked) for x in pts for y in pts)
    assert sample_stable_pose(w, 0, blocked, np.random.default_rng(0), attempts=500) is None


def test_grasp_config_examples():
    r = RobotModel(0, (0.0, 0.0), 2.0, 0.1)
    assert grasp_config(r, (1, 1)) == (1.0, 1.0)
    assert grasp_config(r, (3, 0)) is None
    assert grasp_config(r, (2.0, 0.0)) == (2.0, 0.0)


def test_interpolate_examples():
    p = Path(np.array([[0.0, 0.0], [2.0, 0.0]]))
    assert np.allclose(interpolate(p, 0.5), (1.0, 0.0))
    assert np.array_equal(interpolate(p, 0.0), [0.0, 0.0])
    assert np.array_equal(interpolate(p, 1.0), [2.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 1), st.floats(0, 1e-3))
def test_interpolate_within_reach_and_continuous(seed, s, eps):
    rng = np.random.default_rng(seed)
    robot = RobotModel(0, (0.0, 0.0), 1.0, 0.05)
    # admissible path: waypoints inside the (convex) reach disc
    n = int(rng.integers(2, 6))
    ang = rng.uniform(0, 2 * np.pi, n)
    rad = np.sqrt(rng.uniform(0, 1, n))
    path = Path(np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]))
    q = interpolate(path, s)
    assert robot.reaches(q)
    s2 = min(1.0, s + eps)
    assert np.linalg.norm(interpolate(path, s2) - q) <= path.total_length * (s2 - s) + 1e-9
