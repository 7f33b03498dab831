"""Stepped simulation engine: launch/start/step/stop lifecycle.

Commands issued through the direct API run synchronously on the caller's
thread.  The only cross-thread structure is the mailbox, a deque that remote
server threads append to and that step() drains on the stepping thread.
"""

import collections
import os

from . import scene as _scene
from .errors import (
    AlreadyRunningError,
    LimitViolationError,
    NotFoundError,
    NotRunningError,
    SceneIOError,
    WrongModeError,
)
from .scene import KIND_JOINT, MODE_PASSIVE, MODE_POSITION, MODE_VELOCITY

PHASE_LAUNCHED = "launched"
PHASE_RUNNING = "running"
PHASE_STOPPED = "stopped"

DEFAULT_DT = 0.05


class JointState:
    """Mutable per-joint integration state.

    Positions are written through to the scene payload so that pose queries
    and rendering always observe the integrated value.
    """

    __slots__ = ("handle", "payload", "lo", "hi", "target_velocity", "target_position")

    def __init__(self, handle, payload):
        self.handle = handle
        self.payload = payload
        self.lo, self.hi = payload.limits
        self.target_velocity = 0.0
        self.target_position = payload.position


class Simulator:
    """Owns one scene and advances it in discrete dt increments.

    Exactly one thread (the control context) may call the public operations;
    remote threads only ever touch ``mailbox``.
    """

    def __init__(self, scene, dt=None, headless=False, seed=0):
        if dt is None:
            dt = getattr(scene, "dt", None) or DEFAULT_DT
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.scene = scene
        self.dt = dt
        self.headless = headless
        self.seed = seed
        self.step_count = 0
        self.phase = PHASE_LAUNCHED
        self.mailbox = collections.deque()
        self.joint_states = {}
        self._joint_list = []
        self._initial_q = {
            h: obj.payload.position
            for h, obj in scene.objects.items()
            if obj.kind == KIND_JOINT
        }
        # In fixed-interval remote servicing the service tick owns command
        # execution, so step() must not drain the mailbox itself.
        self.drain_in_step = True
        self._server = None

    # -- lifecycle -----------------------------------------------------

    @property
    def sim_time(self):
        # Product, not accumulation: exact for any step count.
        return self.step_count * self.dt

    def start(self):
        if self.phase == PHASE_RUNNING:
            raise AlreadyRunningError("simulation already running")
        self.joint_states = {}
        self._joint_list = []
        for handle, q0 in self._initial_q.items():
            obj = self.scene.objects[handle]
            obj.payload.position = q0
            js = JointState(handle, obj.payload)
            self.joint_states[handle] = js
            self._joint_list.append(js)
        self.step_count = 0
        self.phase = PHASE_RUNNING

    def step(self):
        if self.phase != PHASE_RUNNING:
            raise NotRunningError("step() requires a running simulation")
        claimed = None
        mailbox = self.mailbox
        if self.drain_in_step and mailbox:
            while mailbox:
                cmd = mailbox.popleft()
                if cmd.is_step:
                    claimed = cmd
                    break
                cmd.run(self)
            if self.phase != PHASE_RUNNING:
                # A drained command stopped the simulation; the claimed step
                # must observe the stop instead of integrating.
                if claimed is not None:
                    claimed.run(self)
                return
        dt = self.dt
        for js in self._joint_list:
            payload = js.payload
            mode = payload.mode
            if mode == MODE_VELOCITY:
                v = js.target_velocity
                if v == 0.0:
                    continue
                vmax = payload.max_velocity
                if v > vmax:
                    v = vmax
                elif v < -vmax:
                    v = -vmax
                q = payload.position + v * dt
                if q < js.lo:
                    q = js.lo
                elif q > js.hi:
                    q = js.hi
                payload.position = q
            elif mode == MODE_POSITION:
                q = payload.position
                delta = js.target_position - q
                if delta == 0.0:
                    continue
                max_move = payload.max_velocity * dt
                if delta > max_move:
                    delta = max_move
                elif delta < -max_move:
                    delta = -max_move
                payload.position = q + delta
            # passive joints hold their position
        self.step_count += 1
        if claimed is not None:
            claimed.run(self)

    def stop(self):
        # Idempotent; integrated state stays readable after stopping.
        self.phase = PHASE_STOPPED

    def load_scene_file(self, path):
        """Replace the current scene from a file; only while not running."""
        if self.phase == PHASE_RUNNING:
            raise AlreadyRunningError("stop the simulation before loading a scene")
        self.scene = _scene.load_scene(_read_scene_file(path))
        if getattr(self.scene, "dt", None):
            self.dt = self.scene.dt
        self.step_count = 0
        self.phase = PHASE_LAUNCHED
        self.joint_states = {}
        self._joint_list = []
        self._initial_q = {
            h: obj.payload.position
            for h, obj in self.scene.objects.items()
            if obj.kind == KIND_JOINT
        }

    def shutdown(self):
        self.stop()
        server, self._server = self._server, None
        if server is not None:
            server.close()

    def attach_server(self, server):
        self._server = server

    # -- joint commands --------------------------------------------------

    def _joint_state(self, handle):
        try:
            return self.joint_states[handle]
        except KeyError:
            obj = self.scene.objects.get(handle)
            if obj is None or obj.kind != KIND_JOINT:
                raise NotFoundError(f"no joint with handle {handle}") from None
            raise NotRunningError(
                "joint commands require a running simulation"
            ) from None

    def set_joint_target_velocity(self, handle, velocity):
        js = self._joint_state(handle)
        if js.payload.mode != MODE_VELOCITY:
            raise WrongModeError(
                f"joint {handle} is in {js.payload.mode!r} mode, not velocity"
            )
        js.target_velocity = float(velocity)

    def set_joint_target_position(self, handle, q_target):
        js = self._joint_state(handle)
        if js.payload.mode != MODE_POSITION:
            raise WrongModeError(
                f"joint {handle} is in {js.payload.mode!r} mode, not position"
            )
        q_target = float(q_target)
        if not js.lo <= q_target <= js.hi:
            raise LimitViolationError(
                f"target {q_target} outside limits [{js.lo}, {js.hi}]"
            )
        js.target_position = q_target

    def get_joint_position(self, handle):
        obj = self.scene.objects.get(handle)
        if obj is None or obj.kind != KIND_JOINT:
            raise NotFoundError(f"no joint with handle {handle}")
        return obj.payload.position


def _read_scene_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise SceneIOError(f"cannot read scene file {os.fspath(path)!r}: {exc}") from exc


def launch(scene_path, headless=False, dt=None, seed=0):
    """Load a scene file and return a launched (not yet running) simulator."""
    scene = _scene.load_scene(_read_scene_file(scene_path))
    return Simulator(scene, dt=dt, headless=headless, seed=seed)
