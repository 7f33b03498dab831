import threading

import numpy as np
import pytest

from simkernel import simulation
from simkernel.kinematics import ArmDescriptor, forward_kinematics

from simclient import PyRep
from simclient.arms import Arm, Franka
from simclient.errors import (
    LaunchError,
    ObjectNotFound,
    SessionClosedError,
    SessionThreadError,
    SimulationNotRunning,
    WrongJointMode,
)
from simclient.objects import Shape, VisionSensor

from clienthelpers import (
    MY_SCENE,
    attached_session,
    plane_depth_doc,
    position_mode_arm_doc,
    write_scene,
)


def fk_oracle_tip(q):
    """World tip position of the example arm at ``q``, from the kernel's FK."""
    sim = simulation.launch(MY_SCENE, headless=True)
    arm = ArmDescriptor.from_scene(sim.scene, sim.scene.handle_of("Franka_tip"))
    tip = forward_kinematics(arm, q)
    sim.shutdown()
    return np.array(tip.position)


# --- lifecycle ---------------------------------------------------------------


def test_launch_start_step_stop_with_spawned_server():
    """The real deployment path: the session brings up its own server process."""
    pr = PyRep()
    pr.launch(MY_SCENE, headless=True)
    try:
        franka = Franka()
        before = franka.get_tip().get_position()
        pr.start()
        franka.set_target_joint_velocities([0.0, 0.2, 0.0])
        for _ in range(10):
            pr.step()
        after = franka.get_tip().get_position()
        # 10 steps at dt 0.05: the second joint has swung 0.2 * 0.5 = 0.1 rad
        assert np.allclose(after, fk_oracle_tip((0.0, 0.1, 0.0)), atol=1e-9)
        assert not np.allclose(after, before, atol=1e-3)
        pr.stop()
        # stop leaves the integrated state readable ...
        assert np.array_equal(franka.get_tip().get_position(), after)
        # ... and the next start re-initializes the joints from the scene
        pr.start()
        assert np.allclose(franka.get_tip().get_position(), before, atol=1e-12)
        pr.stop()
    finally:
        pr.shutdown()


def test_step_before_start_raises():
    with attached_session(MY_SCENE) as (pr, _sim):
        with pytest.raises(SimulationNotRunning):
            pr.step()


def test_windowed_mode_is_refused():
    pr = PyRep()
    with pytest.raises(ValueError):
        pr.launch(MY_SCENE, headless=False)


def test_launch_failure_when_server_command_is_bogus():
    pr = PyRep(server_command=["/nonexistent/simulation-server"])
    with pytest.raises(LaunchError):
        pr.launch(MY_SCENE)


def test_launch_failure_when_scene_is_missing(tmp_path):
    pr = PyRep(timeout=15.0)
    with pytest.raises(LaunchError):
        pr.launch(str(tmp_path / "no_such_scene.json"))


# --- proxy operations --------------------------------------------------------


def test_set_get_position_round_trip():
    with attached_session(MY_SCENE) as (pr, _sim):
        target = Shape('target')
        want = [0.1234567890123, -0.42, 0.777]
        target.set_position(want)
        got = target.get_position()
        assert np.abs(got - np.array(want)).max() <= 1e-9


def test_relative_frame_position():
    with attached_session(MY_SCENE) as (pr, _sim):
        target = Shape('target')
        franka = Franka()
        tip = franka.get_tip()
        rel = target.get_position(relative_to=tip)
        expected = target.get_position() - tip.get_position()
        # both frames are axis-aligned at q=0, so the delta is a plain subtraction
        assert np.allclose(rel, expected, atol=1e-12)


def test_unknown_object_name_raises():
    with attached_session(MY_SCENE) as (pr, _sim):
        with pytest.raises(ObjectNotFound):
            Shape('no_such_thing')


def test_capture_depth_of_wall_at_2m(tmp_path):
    scene = write_scene(tmp_path, plane_depth_doc(distance=2.0))
    with attached_session(scene) as (pr, _sim):
        cam = VisionSensor('cam')
        depth = cam.capture_depth()
        assert depth.shape == (32, 32)
        covered = depth < 10.0
        assert covered.any()
        assert np.all(np.abs(depth[covered] - 2.0) <= 1e-3)


def test_capture_rgb_shape_and_dtype():
    with attached_session(MY_SCENE) as (pr, _sim):
        cam = VisionSensor('my_camera')
        rgb = cam.capture_rgb()
        assert rgb.shape == (64, 64, 3)
        assert rgb.dtype == np.uint8


def test_velocity_integration_matches_fk_oracle():
    """0.3 rad/s for 20 steps at dt 0.05 advances the joint exactly 0.3 rad."""
    with attached_session(MY_SCENE) as (pr, _sim):
        franka = Franka()
        pr.start()
        franka.set_target_joint_velocities([0.0, 0.3, 0.0])
        for _ in range(20):
            pr.step()
        got = franka.get_tip().get_position()
    assert np.allclose(got, fk_oracle_tip((0.0, 0.3, 0.0)), atol=1e-9)


def test_wrong_joint_mode_maps_to_typed_exception(tmp_path):
    scene = write_scene(tmp_path, position_mode_arm_doc())
    with attached_session(scene) as (pr, _sim):
        arm = Arm('Posi')
        pr.start()
        with pytest.raises(WrongJointMode):
            arm.set_target_joint_velocities([0.5])


# --- session discipline --------------------------------------------------------


def test_use_after_shutdown_raises():
    with attached_session(MY_SCENE) as (pr, _sim):
        target = Shape('target')
    with pytest.raises(SessionClosedError):
        target.get_position()
    with pytest.raises(SessionClosedError):
        pr.step()


def test_sessions_are_not_shareable_across_threads():
    with attached_session(MY_SCENE) as (pr, _sim):
        target = Shape('target')
        caught = []

        def misuse():
            try:
                target.get_position()
            except Exception as exc:  # noqa: BLE001 - recording for the main thread
                caught.append(exc)

        worker = threading.Thread(target=misuse)
        worker.start()
        worker.join()
        assert len(caught) == 1
        assert isinstance(caught[0], SessionThreadError)
        # and the owning thread still works afterwards
        assert target.get_position().shape == (3,)


def test_two_sessions_coexist_in_one_process(tmp_path):
    wall_near = write_scene(tmp_path, plane_depth_doc(distance=2.0), "near.json")
    wall_far = write_scene(tmp_path, plane_depth_doc(distance=3.0), "far.json")
    with attached_session(wall_near) as (pr_a, _a):
        with attached_session(wall_far) as (pr_b, _b):
            cam_a = VisionSensor('cam', session=pr_a)
            cam_b = VisionSensor('cam', session=pr_b)
            da = cam_a.capture_depth()
            db = cam_b.capture_depth()
            assert np.abs(da[da < 10.0] - 2.0).max() <= 1e-3
            assert np.abs(db[db < 10.0] - 3.0).max() <= 1e-3
            # the newest launch is the default session for bare constructors
            assert VisionSensor('cam')._session is pr_b
