import json
import math

import numpy as np
import pytest

from simkernel import scene as sc
from simkernel.errors import (
    GoalInCollisionError,
    LimitViolationError,
    NoPathFoundError,
    StartInCollisionError,
)
from simkernel.kinematics import ArmDescriptor
from simkernel.planning import (
    CollisionWorld,
    PlanningParams,
    collision_world_from_scene,
    densify,
    in_collision,
    in_collision_batch,
    path_length,
    plan_rrt_connect,
    shortcut_path,
)
from simkernel.transforms import Pose

L1 = 0.5
LINK1_CENTERS = (0.1, 0.2, 0.3, 0.4)
LINK2_CENTERS = (0.1, 0.2, 0.3, 0.4, 0.5)
SPHERE_R = 0.06
WALL = [((r, 0.0, 0.0), 0.06) for r in (0.60, 0.72, 0.84, 0.96)]
Q_START = np.array([-math.pi / 2, 0.0])
Q_GOAL = np.array([math.pi / 2, 0.0])


def planar_arm(limits1=(-math.pi, math.pi), limits2=(-2.9, 2.9)):
    return ArmDescriptor(
        joint_types=["revolute", "revolute"],
        axes=[(0, 0, 1), (0, 0, 1)],
        limits=[limits1, limits2],
        link_offsets=[Pose.identity(), Pose.from_translation(L1, 0, 0)],
        tip_offset=Pose.from_translation(L1, 0, 0),
    )


def gap_world():
    link1 = [((c, 0, 0), SPHERE_R) for c in LINK1_CENTERS]
    link2 = [((c, 0, 0), SPHERE_R) for c in LINK2_CENTERS]
    return CollisionWorld(WALL, [link1, link2])


def oracle_any_hit(path, wall=WALL):
    """Closed-form planar collision check, independent of the kinematics code.

    Link-1 sphere at local x=c sits at c*(cos q1, sin q1); link-2's at
    l1*(cos q1, sin q1) + c*(cos(q1+q2), sin(q1+q2)).
    """
    path = np.asarray(path, dtype=float)
    q1, q2 = path[:, 0], path[:, 1]
    c1, s1 = np.cos(q1), np.sin(q1)
    c12, s12 = np.cos(q1 + q2), np.sin(q1 + q2)
    xs, ys = [], []
    for c in LINK1_CENTERS:
        xs.append(c * c1)
        ys.append(c * s1)
    for c in LINK2_CENTERS:
        xs.append(L1 * c1 + c * c12)
        ys.append(L1 * s1 + c * s12)
    xs = np.stack(xs, axis=1)  # (n, spheres)
    ys = np.stack(ys, axis=1)
    for (wx, wy, _), wr in wall:
        d = np.hypot(xs - wx, ys - wy)
        if np.any(d < SPHERE_R + wr):
            return True
    return False


def assert_path_contract(path, resolution=0.01):
    path = np.asarray(path)
    assert np.array_equal(path[0], Q_START)
    assert np.array_equal(path[-1], Q_GOAL)
    gaps = np.max(np.abs(np.diff(path, axis=0)), axis=1)
    assert np.all(gaps <= resolution + 1e-12)
    assert not oracle_any_hit(path)


# --- collision checks --------------------------------------------------


def test_empty_world_is_collision_free_everywhere():
    arm = planar_arm()
    world = CollisionWorld([], [[((0.25, 0, 0), 0.1)], []])
    rng = np.random.default_rng(0)
    qs = rng.uniform(-math.pi, math.pi, size=(100, 2))
    assert not in_collision_batch(arm, qs, world).any()


def test_obstacle_on_link_sphere_center_collides():
    arm = planar_arm()
    # at q = (0, 0) the link-1 sphere at local x=0.4 sits at world (0.4, 0, 0)
    world = CollisionWorld(
        [((0.4, 0.0, 0.0), 0.01)], [[((0.4, 0, 0), SPHERE_R)], []]
    )
    assert in_collision(arm, (0.0, 0.0), world)


def test_touching_spheres_are_free():
    arm = planar_arm()
    # exact binary-float values: distance 0.125 equals the sum of radii
    make = lambda y: CollisionWorld(
        [((0.4, y, 0.0), 0.0625)], [[((0.4, 0, 0), 0.0625)], []]
    )
    assert not in_collision(arm, (0.0, 0.0), make(0.125))
    assert in_collision(arm, (0.0, 0.0), make(0.124))


def test_collision_input_validation():
    arm = planar_arm(limits1=(-1.0, 1.0))
    world = gap_world()
    with pytest.raises(ValueError):
        in_collision(arm, (0.0,), world)
    with pytest.raises(LimitViolationError):
        plan_rrt_connect(arm, (1.5, 0.0), (0.0, 0.0), world)
    with pytest.raises(ValueError):
        CollisionWorld([((0, 0, 0), -0.1)], [])
    with pytest.raises(ValueError):
        PlanningParams(step_size=0.1, validation_resolution=0.2)


# --- planning -----------------------------------------------------------


def test_empty_world_returns_straight_segment():
    arm = planar_arm()
    world = CollisionWorld([], [[((c, 0, 0), SPHERE_R) for c in LINK1_CENTERS], []])
    path = plan_rrt_connect(arm, Q_START, Q_GOAL, world)
    assert np.array_equal(path[0], Q_START)
    assert np.array_equal(path[-1], Q_GOAL)
    # every waypoint lies on the straight segment
    direction = Q_GOAL - Q_START
    ts = (path - Q_START) @ direction / (direction @ direction)
    recon = Q_START + ts[:, None] * direction
    assert np.allclose(path, recon, atol=1e-12)
    assert np.all(np.diff(ts) > 0)


def test_start_or_goal_in_collision_raises_before_sampling():
    arm = planar_arm()
    world = gap_world()
    q_blocked = np.array([0.0, 0.0])  # straight along +x, inside the wall
    assert oracle_any_hit(q_blocked[None, :])
    with pytest.raises(StartInCollisionError):
        plan_rrt_connect(arm, q_blocked, Q_GOAL, world)
    with pytest.raises(GoalInCollisionError):
        plan_rrt_connect(arm, Q_START, q_blocked, world)


def test_gap_in_wall_20_seeds():
    arm = planar_arm()
    world = gap_world()
    # sanity: the straight joint-space segment is blocked by the wall
    assert oracle_any_hit(densify([Q_START, Q_GOAL], 0.01))
    successes = 0
    for seed in range(20):
        try:
            path = plan_rrt_connect(arm, Q_START, Q_GOAL, world, PlanningParams(seed=seed))
        except NoPathFoundError:
            continue
        assert_path_contract(path)
        successes += 1
    assert successes >= 19


def test_seeded_determinism():
    arm = planar_arm()
    world = gap_world()
    p1 = plan_rrt_connect(arm, Q_START, Q_GOAL, world, PlanningParams(seed=7))
    p2 = plan_rrt_connect(arm, Q_START, Q_GOAL, world, PlanningParams(seed=7))
    assert np.array_equal(p1, p2)


def test_no_path_when_wall_has_no_gap():
    arm = planar_arm()
    link1 = [((c, 0, 0), SPHERE_R) for c in LINK1_CENTERS]
    link2 = [((c, 0, 0), SPHERE_R) for c in LINK2_CENTERS]
    solid = [((r, 0.0, 0.0), 0.06) for r in np.arange(0.1, 1.1, 0.1)]
    # the same radial wall mirrored at theta = pi blocks the long way round
    solid += [((-r, 0.0, 0.0), 0.06) for r in np.arange(0.1, 1.1, 0.1)]
    world = CollisionWorld(solid, [link1, link2])
    with pytest.raises(NoPathFoundError):
        plan_rrt_connect(
            arm, Q_START, Q_GOAL, world, PlanningParams(seed=0, max_nodes=2000)
        )


def test_completeness_smoke_100_seeds():
    arm = planar_arm()
    world = gap_world()
    failures = 0
    for seed in range(100):
        try:
            plan_rrt_connect(
                arm, Q_START, Q_GOAL, world,
                PlanningParams(seed=seed, max_nodes=100_000),
            )
        except NoPathFoundError:
            failures += 1
    assert failures <= 5


# --- shortcutting -------------------------------------------------------


def test_shortcut_reduces_zigzag_in_empty_world():
    arm = planar_arm()
    world = CollisionWorld([], [[((0.25, 0, 0), 0.05)], [((0.25, 0, 0), 0.05)]])
    zigzag = densify(
        [(0.0, 0.0), (0.5, 1.0), (1.0, -1.0), (1.5, 1.0), (2.0, 0.0)], 0.01
    )
    short = shortcut_path(zigzag, world, arm, PlanningParams(seed=3), attempts=100)
    assert path_length(short) < path_length(zigzag)
    assert np.array_equal(short[0], zigzag[0])
    assert np.array_equal(short[-1], zigzag[-1])
    # empty world: 100 attempts collapse the zig-zag to (nearly) the straight line
    straight = path_length(densify([(0.0, 0.0), (2.0, 0.0)], 0.01))
    assert path_length(short) < straight * 1.05


def test_shortcut_keeps_straight_path_straight():
    arm = planar_arm()
    world = CollisionWorld([], [[], []])
    straight = densify([Q_START, Q_GOAL], 0.01)
    out = shortcut_path(straight, world, arm, PlanningParams(seed=1), attempts=50)
    assert np.array_equal(out[0], straight[0])
    assert np.array_equal(out[-1], straight[-1])
    assert path_length(out) <= path_length(straight) + 1e-12


def test_shortcut_output_still_validates_near_obstacles():
    arm = planar_arm()
    world = gap_world()
    for seed in range(5):
        path = plan_rrt_connect(arm, Q_START, Q_GOAL, world, PlanningParams(seed=seed))
        short = shortcut_path(path, world, arm, PlanningParams(seed=seed), attempts=200)
        assert path_length(short) <= path_length(path) + 1e-12
        assert_path_contract(short)


# --- scene-derived collision worlds ------------------------------------


def test_collision_world_from_scene_splits_arm_and_obstacles():
    doc = {
        "objects": [
            {"name": "j1", "type": "joint", "parent": None, "joint_type": "revolute",
             "axis": [0, 0, 1], "limits": [-3.14, 3.14], "joint_position": 0.7},
            {"name": "link1", "type": "shape", "parent": "j1", "primitive": "box",
             "size": [0.5, 0.1, 0.1], "position": [0.25, 0, 0],
             "collision_spheres": [{"center": [0.0, 0.0, 0.0], "radius": 0.08}]},
            {"name": "j2", "type": "joint", "parent": "j1", "joint_type": "revolute",
             "axis": [0, 0, 1], "limits": [-3.14, 3.14], "position": [0.5, 0, 0]},
            {"name": "link2", "type": "shape", "parent": "j2", "primitive": "box",
             "size": [0.5, 0.1, 0.1], "position": [0.25, 0, 0],
             "collision_spheres": [{"center": [0.1, 0.0, 0.0], "radius": 0.07}]},
            {"name": "tip", "type": "dummy", "parent": "j2", "position": [0.5, 0, 0]},
            {"name": "rock", "type": "shape", "parent": None, "primitive": "sphere",
             "size": [0.2, 0.2, 0.2], "position": [1.0, 2.0, 0.0],
             "collision_spheres": [{"center": [0, 0, 0], "radius": 0.2}]},
        ]
    }
    scene = sc.load_scene(json.dumps(doc))
    arm = ArmDescriptor.from_scene(scene, "tip")
    world = collision_world_from_scene(scene, arm)

    assert world.n_links == 2
    assert world.obstacle_centers.shape == (1, 3)
    assert np.allclose(world.obstacle_centers[0], (1.0, 2.0, 0.0))
    assert world.obstacle_radii[0] == 0.2
    # link spheres are expressed in the joint frames regardless of current q
    assert np.allclose(world.link_centers[0][0], (0.25, 0, 0), atol=1e-12)
    assert world.link_radii[0][0] == 0.08
    assert np.allclose(world.link_centers[1][0], (0.35, 0, 0), atol=1e-12)

    # and a straight-line reach toward the rock must register a hit
    hit_world = CollisionWorld(
        [((1.0, 0.45, 0.0), 0.2)],
        [[((0.25, 0, 0), 0.08)], [((0.35, 0, 0), 0.07)]],
    )
    assert in_collision(arm, (0.46, 0.0), hit_world)
