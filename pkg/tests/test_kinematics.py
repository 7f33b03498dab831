import json
import math

import numpy as np
import pytest

from simkernel import scene as sc
from simkernel.errors import ArmNotBoundError, IkNotConvergedError, LimitViolationError
from simkernel.kinematics import (
    ArmDescriptor,
    IkParams,
    compute_jacobian,
    forward_kinematics,
    forward_kinematics_batch,
    get_tip_pose,
    link_frames,
    link_frames_batch,
    solve_ik,
)
from simkernel.transforms import Pose, Quaternion

from oracles import finite_difference_jacobian, matrix_of, planar_2r_tip

WIDE = (-2 * math.pi, 2 * math.pi)


def planar_2r(l1=0.5, l2=0.5, limits=WIDE):
    """Two revolute joints about +z in the xy-plane."""
    return ArmDescriptor(
        joint_types=["revolute", "revolute"],
        axes=[(0, 0, 1), (0, 0, 1)],
        limits=[limits, limits],
        link_offsets=[Pose.identity(), Pose.from_translation(l1, 0, 0)],
        tip_offset=Pose.from_translation(l2, 0, 0),
    )


def six_dof_arm():
    """Anthropomorphic 6R chain used across the IK tests."""
    lim = (-2.9, 2.9)
    return ArmDescriptor(
        joint_types=["revolute"] * 6,
        axes=[(0, 0, 1), (0, 1, 0), (0, 1, 0), (0, 0, 1), (0, 1, 0), (0, 0, 1)],
        limits=[lim] * 6,
        link_offsets=[
            Pose.from_translation(0, 0, 0.1),
            Pose.from_translation(0, 0, 0.1),
            Pose.from_translation(0, 0, 0.3),
            Pose.from_translation(0, 0, 0.25),
            Pose.from_translation(0, 0, 0.1),
            Pose.from_translation(0, 0, 0.1),
        ],
        tip_offset=Pose.from_translation(0, 0, 0.08),
    )


def random_chain(rng, dof):
    """Random serial chain with mixed joint types and arbitrary offsets."""
    types = [("revolute", "prismatic")[rng.integers(2)] for _ in range(dof)]
    axes = []
    offsets = []
    for _ in range(dof):
        a = rng.normal(size=3)
        a /= np.linalg.norm(a)
        axes.append(tuple(a))
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        offsets.append(
            Pose(rng.uniform(-0.3, 0.3, 3), Quaternion.from_axis_angle(axis, rng.uniform(-2, 2)))
        )
    return ArmDescriptor(
        joint_types=types,
        axes=axes,
        limits=[(-math.pi, math.pi)] * dof,
        link_offsets=offsets,
        tip_offset=Pose.from_translation(0.1, 0, 0.05),
    )


# --- forward kinematics -----------------------------------------------------


def test_straight_arm():
    tip = forward_kinematics(planar_2r(), (0.0, 0.0))
    assert np.allclose(tip.position, (1.0, 0.0, 0.0), atol=1e-12)


def test_rigid_rotation_of_straight_arm():
    tip = forward_kinematics(planar_2r(), (math.pi / 2, 0.0))
    assert np.allclose(tip.position, (0.0, 1.0, 0.0), atol=1e-12)


def test_bent_arm_matches_closed_form():
    tip = forward_kinematics(planar_2r(), (math.pi / 4, -math.pi / 4))
    assert np.allclose(tip.position, planar_2r_tip(0.5, 0.5, math.pi / 4, -math.pi / 4), atol=1e-9)
    assert np.allclose(tip.position[:2], (0.85355, 0.35355), atol=1e-5)


def test_fk_matches_closed_form_on_many_random_configs():
    arm = planar_2r()
    rng = np.random.default_rng(1)
    qs = rng.uniform(-math.pi, math.pi, size=(2000, 2))
    for q1, q2 in qs:
        tip = forward_kinematics(arm, (q1, q2))
        assert np.allclose(tip.position, planar_2r_tip(0.5, 0.5, q1, q2), atol=1e-9)


def test_fk_dimension_and_limit_checks():
    arm = planar_2r(limits=(-1.0, 1.0))
    with pytest.raises(ValueError):
        forward_kinematics(arm, (0.0,))
    with pytest.raises(LimitViolationError):
        forward_kinematics(arm, (1.5, 0.0))


def test_fk_batch_agrees_with_scalar_path():
    rng = np.random.default_rng(2)
    for dof in (2, 4, 6):
        arm = random_chain(rng, dof)
        qs = rng.uniform(-math.pi, math.pi, size=(50, dof))
        pos, rot = forward_kinematics_batch(arm, qs)
        for i in range(50):
            pose = forward_kinematics(arm, qs[i])
            assert np.allclose(pos[i], pose.position, atol=1e-10)
            assert np.allclose(rot[i], pose.orientation.to_matrix(), atol=1e-10)


def test_link_frames_batch_agrees_with_scalar_path():
    rng = np.random.default_rng(3)
    arm = random_chain(rng, 5)
    qs = rng.uniform(-math.pi, math.pi, size=(20, 5))
    fr, ft = link_frames_batch(arm, qs)
    for i in range(20):
        frames = link_frames(arm, qs[i])
        for j, frame in enumerate(frames):
            assert np.allclose(ft[i, j], frame.position, atol=1e-10)
            assert np.allclose(fr[i, j], frame.orientation.to_matrix(), atol=1e-10)


def test_frame_invariance_under_base_transform():
    rng = np.random.default_rng(4)
    arm = six_dof_arm()
    for _ in range(20):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        base = Pose(rng.uniform(-1, 1, 3), Quaternion.from_axis_angle(axis, rng.uniform(-3, 3)))
        moved = ArmDescriptor(
            joint_types=arm.joint_types,
            axes=arm.axes,
            limits=list(zip(arm.limits_lo, arm.limits_hi)),
            link_offsets=[base.compose(arm.link_offsets[0])] + list(arm.link_offsets[1:]),
            tip_offset=arm.tip_offset,
        )
        q = rng.uniform(-2.9, 2.9, size=6)
        expected = base.compose(forward_kinematics(arm, q))
        actual = forward_kinematics(moved, q)
        assert np.allclose(matrix_of(actual), matrix_of(expected), atol=1e-9)


# --- jacobian ----------------------------------------------------------------


def test_2r_jacobian_first_column():
    jac = compute_jacobian(planar_2r(), (0.0, 0.0))
    assert np.allclose(jac[:3, 0], (0.0, 1.0, 0.0), atol=1e-12)
    fd = finite_difference_jacobian(lambda q: forward_kinematics(planar_2r(), q), (0.0, 0.0))
    assert np.allclose(jac, fd, atol=1e-6)


def test_prismatic_column_is_axis_and_zero_angular():
    arm = ArmDescriptor(
        joint_types=["prismatic"],
        axes=[(0, 0, 1)],
        limits=[(-1, 1)],
        link_offsets=[Pose.identity()],
        tip_offset=Pose.identity(),
    )
    jac = compute_jacobian(arm, (0.25,))
    assert np.allclose(jac[:, 0], (0, 0, 1, 0, 0, 0), atol=1e-12)


def test_jacobian_matches_finite_differences_on_random_chains():
    rng = np.random.default_rng(5)
    for _ in range(100):
        dof = int(rng.integers(2, 8))
        arm = random_chain(rng, dof)
        q = rng.uniform(-math.pi + 0.01, math.pi - 0.01, size=dof)
        jac = compute_jacobian(arm, q)
        fd = finite_difference_jacobian(lambda qq: forward_kinematics(arm, qq), q)
        assert np.allclose(jac, fd, atol=1e-5)


# --- inverse kinematics ---------------------------------------------------------


def test_ik_already_solved_returns_q0_with_zero_iterations():
    arm = planar_2r()
    q0 = np.array([0.3, -0.7])
    result = solve_ik(arm, forward_kinematics(arm, q0), q0)
    assert result.iterations == 0
    assert np.array_equal(result.q, q0)


def test_ik_reaches_reachable_planar_target():
    arm = planar_2r()
    target = Pose.from_translation(0.7, 0.3, 0.0)
    result = solve_ik(arm, target, (0.1, 0.1), position_only=True)
    tip = forward_kinematics(arm, result.q)
    assert np.linalg.norm(np.array(tip.position) - (0.7, 0.3, 0.0)) < 1e-4


def test_ik_unreachable_target_raises_with_residual():
    arm = planar_2r()  # total reach 1.0
    with pytest.raises(IkNotConvergedError) as err:
        solve_ik(arm, Pose.from_translation(2.5, 0, 0), (0.0, 0.1), position_only=True)
    assert err.value.pos_err >= 1.5
    assert err.value.q is not None


def test_ik_round_trip_on_6dof_arm():
    arm = six_dof_arm()
    rng = np.random.default_rng(6)
    params = IkParams(max_iters=200)
    failures = 0
    for _ in range(100):
        q_true = rng.uniform(-2.0, 2.0, size=6)
        target = forward_kinematics(arm, q_true)
        try:
            result = solve_ik(arm, target, np.zeros(6), params, position_only=True)
        except IkNotConvergedError:
            failures += 1
            continue
        tip = forward_kinematics(arm, result.q)
        assert np.linalg.norm(np.subtract(tip.position, target.position)) < 1e-4
        assert result.iterations <= 200
    assert failures <= 1


def test_ik_never_leaves_limits():
    lim = (-1.2, 1.2)
    arm = planar_2r(limits=lim)
    rng = np.random.default_rng(7)
    for _ in range(50):
        target = Pose.from_translation(*rng.uniform(-1, 1, 2), 0)
        try:
            result = solve_ik(arm, target, (0.0, 0.0), position_only=True)
            q = result.q
        except IkNotConvergedError as err:
            q = err.q
        assert np.all(q >= lim[0]) and np.all(q <= lim[1])


def test_full_pose_ik_on_6dof():
    arm = six_dof_arm()
    rng = np.random.default_rng(8)
    solved = 0
    for _ in range(25):
        q_true = rng.uniform(-1.5, 1.5, size=6)
        target = forward_kinematics(arm, q_true)
        try:
            result = solve_ik(arm, target, q_true + rng.uniform(-0.4, 0.4, 6).clip(-2.8, 2.8))
        except IkNotConvergedError:
            continue
        assert result.pos_err <= 1e-4 and result.ori_err <= 1e-3
        solved += 1
    assert solved >= 20


# --- scene binding ----------------------------------------------------------------


def scene_with_arm():
    return sc.load_scene(
        json.dumps(
            {
                "objects": [
                    {"name": "mount", "type": "dummy", "parent": None,
                     "position": [0.2, 0.0, 0.1]},
                    {"name": "j1", "type": "joint", "parent": "mount",
                     "joint_type": "revolute", "axis": [0, 0, 1],
                     "limits": [-3.1, 3.1], "position": [0, 0, 0]},
                    {"name": "j2", "type": "joint", "parent": "j1",
                     "joint_type": "revolute", "axis": [0, 0, 1],
                     "limits": [-3.1, 3.1], "position": [0.5, 0, 0]},
                    {"name": "tip", "type": "dummy", "parent": "j2",
                     "position": [0.5, 0, 0]},
                ]
            }
        )
    )


def test_arm_discovery_from_scene():
    s = scene_with_arm()
    arm = ArmDescriptor.from_scene(s, "tip")
    assert arm.dof == 2
    assert arm.joint_handles == (2, 3)
    assert arm.tip_handle == 4
    # base mount pose is baked into the first link offset
    tip = forward_kinematics(arm, (0.0, 0.0))
    assert np.allclose(tip.position, (1.2, 0.0, 0.1), atol=1e-12)


def test_get_tip_pose_tracks_live_joint_state():
    s = scene_with_arm()
    arm = ArmDescriptor.from_scene(s, "tip")
    s.objects[2].payload.position = math.pi / 2
    live = get_tip_pose(arm)
    fk = forward_kinematics(arm, arm.current_q())
    assert np.allclose(matrix_of(live), matrix_of(fk), atol=1e-9)
    assert np.allclose(live.position, (0.2, 1.0, 0.1), atol=1e-9)


def test_unbound_arm_raises():
    arm = planar_2r()
    with pytest.raises(ArmNotBoundError):
        get_tip_pose(arm)
    with pytest.raises(ArmNotBoundError):
        arm.current_q()
