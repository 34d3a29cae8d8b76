import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrcp.datagen import formation_preset
from mrcp.graph import (
    CameraIntrinsics,
    CommGraph,
    GeometryError,
    RobotPose,
    build_graph,
    complete_graph,
    fov_overlap_ratio,
    fov_shared_fraction,
    ground_footprint,
    is_rotation,
    look_at,
    path_graph,
    project_to_rotation,
    relative_pose,
)

INTR = CameraIntrinsics(np.radians(60), np.radians(60), 64, 64)


def _rand_rotation(rng):
    return project_to_rotation(rng.normal(size=(3, 3)))


def _rand_pose(rng):
    return RobotPose(rng.normal(size=3) * 5, _rand_rotation(rng))


def _line(xs):
    return [RobotPose([x, 0.0, 0.0], np.eye(3)) for x in xs]


def test_build_graph_examples():
    poses = _line([0.0, 1.0, 2.5])
    assert build_graph(poses, 1e6).edges == complete_graph(3).edges
    assert build_graph(poses, 0.5).edges == frozenset()
    assert build_graph(poses, 1.5).edges == {(0, 1), (1, 2)}


def test_build_graph_rejects_bad_threshold():
    with pytest.raises(ValueError):
        build_graph(_line([0.0, 1.0]), 0.0)


def test_comm_graph_rejects_self_loop_and_range():
    with pytest.raises(ValueError):
        CommGraph(2, frozenset({(1, 1)}))
    with pytest.raises(ValueError):
        CommGraph(2, frozenset({(0, 2)}))


def test_directed_edges_sorted_by_destination():
    g = complete_graph(3)
    assert g.directed_edges() == [(1, 0), (2, 0), (0, 1), (2, 1), (0, 2), (1, 2)]


def test_hop_distances_on_path():
    np.testing.assert_array_equal(path_graph(4).hop_distances(0), [0, 1, 2, 3])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.floats(0.1, 10), st.integers(0, 2 ** 31))
def test_build_graph_symmetric_and_threshold_monotone(n, thr, seed):
    rng = np.random.default_rng(seed)
    poses = [RobotPose(rng.uniform(-5, 5, size=3), np.eye(3)) for _ in range(n)]
    small, big = build_graph(poses, thr), build_graph(poses, thr * 2)
    assert small.edges <= big.edges
    for i in range(n):
        for j in small.neighbors[i]:
            assert i in small.neighbors[j]


def test_relative_pose_examples():
    p = RobotPose([1.0, 2.0, 3.0], np.eye(3))
    r, t = relative_pose(p, p)
    np.testing.assert_array_equal(r, np.eye(3))
    np.testing.assert_array_equal(t, np.zeros(3))
    _, t = relative_pose(RobotPose([0.0, 0, 0], np.eye(3)), RobotPose([1.0, 0, 0], np.eye(3)))
    np.testing.assert_array_equal(t, [1, 0, 0])


def test_relative_pose_composition():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b, c = (_rand_pose(rng) for _ in range(3))
        r_ab, t_ab = relative_pose(a, b)
        r_bc, t_bc = relative_pose(b, c)
        r_ac, t_ac = relative_pose(a, c)
        np.testing.assert_allclose(r_ab @ r_bc, r_ac, atol=1e-12)
        np.testing.assert_allclose(r_ab @ t_bc + t_ab, t_ac, atol=1e-12)


def test_relative_pose_is_rotation():
    rng = np.random.default_rng(1)
    r, _ = relative_pose(_rand_pose(rng), _rand_pose(rng))
    assert is_rotation(r)


def test_pose_rejects_non_rotation():
    with pytest.raises(ValueError):
        RobotPose(np.zeros(3), np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        RobotPose([np.nan, 0, 0], np.eye(3))


def test_from_stored_reprojects_float32():
    rng = np.random.default_rng(2)
    r = _rand_rotation(rng)
    pose = RobotPose.from_stored(r.astype(np.float32), np.zeros(3, np.float32))
    assert is_rotation(pose.rotation)
    np.testing.assert_allclose(pose.rotation, r, atol=1e-6)


def test_overlap_identical_cameras_is_half():
    pose = look_at([0.0, 0.0, 8.0], [1.0, 0.0, 0.0])
    ratio = fov_overlap_ratio([pose, pose], INTR, grid_resolution=0.05)
    assert abs(ratio - 0.5) < 1e-9


def test_overlap_disjoint_is_one():
    a = look_at([0.0, 0.0, 5.0], [0.1, 0.0, 0.0])
    b = look_at([100.0, 0.0, 5.0], [100.1, 0.0, 0.0])
    assert fov_overlap_ratio([a, b], INTR) == 1.0


def test_overlap_in_unit_interval():
    for name in ("circle_inward", "circle_outward", "pose_varied"):
        r = fov_overlap_ratio(formation_preset(name), INTR, grid_resolution=0.1)
        assert 0 < r <= 1


def test_inward_circle_shares_more_ground_than_outward():
    inward = formation_preset("circle_inward")
    outward = formation_preset("circle_outward")
    assert fov_overlap_ratio(inward, INTR, grid_resolution=0.1) < fov_overlap_ratio(outward, INTR, grid_resolution=0.1)
    assert fov_shared_fraction(inward, INTR, grid_resolution=0.1) > fov_shared_fraction(outward, INTR, grid_resolution=0.1)


def test_footprint_requires_ground_hit():
    up = look_at([0.0, 0.0, 5.0], [1.0, 0.0, 10.0])
    with pytest.raises(GeometryError):
        ground_footprint(up, INTR, 0.0)


def test_pixel_rays_unit_and_centered():
    rays = CameraIntrinsics(np.radians(60), np.radians(60), 3, 3).pixel_rays()
    np.testing.assert_allclose(np.linalg.norm(rays, axis=-1), 1.0, atol=1e-15)
    np.testing.assert_allclose(rays[1, 1], [0, 0, 1], atol=1e-15)
