"""Serial-chain kinematics: forward kinematics, geometric Jacobian, and
damped-least-squares inverse kinematics.

An arm is an ordered chain of revolute/prismatic joints plus a fixed tip
transform.  Forward kinematics composes, per joint, the fixed mounting
offset and the joint's own motion (rotation about its axis, or translation
along it), and finally the tip offset.  Descriptors built from a scene bake
the world pose of the chain's base into the first link offset, so FK is
world-frame for bound arms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArmNotBoundError, IkNotConvergedError, LimitViolationError, NotFoundError
from .scene import (
    JOINT_PRISMATIC,
    JOINT_REVOLUTE,
    KIND_DUMMY,
    KIND_JOINT,
    Scene,
    world_pose,
)
from .transforms import Pose, Quaternion


class ArmDescriptor:
    """Kinematic description of one serial arm (joints ordered base to tip)."""

    def __init__(self, joint_types, axes, limits, link_offsets, tip_offset,
                 joint_handles=None, tip_handle=None, scene=None):
        n = len(joint_types)
        if not (len(axes) == len(limits) == len(link_offsets) == n):
            raise ValueError("joint_types, axes, limits and link_offsets must have equal length")
        for jt in joint_types:
            if jt not in (JOINT_REVOLUTE, JOINT_PRISMATIC):
                raise ValueError(f"unknown joint type {jt!r}")
        self.joint_types = tuple(joint_types)
        self.axes = tuple(
            tuple(np.asarray(a, dtype=float) / np.linalg.norm(a)) for a in axes
        )
        self.limits_lo = np.array([lo for lo, _ in limits], dtype=float)
        self.limits_hi = np.array([hi for _, hi in limits], dtype=float)
        self.link_offsets = tuple(link_offsets)
        self.tip_offset = tip_offset
        self.joint_handles = tuple(joint_handles) if joint_handles is not None else None
        self.tip_handle = tip_handle
        self.scene = scene

    @property
    def dof(self) -> int:
        return len(self.joint_types)

    @classmethod
    def from_scene(cls, scene: Scene, tip) -> "ArmDescriptor":
        """Discover the chain ending at a tip dummy.

        ``tip`` is the dummy's handle or name.  The dummy's parent chain is
        walked upward through consecutive joints; the world pose of whatever
        the base joint is mounted on becomes part of the first link offset.
        """
        tip_handle = scene.handle_of(tip) if isinstance(tip, str) else tip
        tip_obj = scene.object(tip_handle)
        if tip_obj.kind != KIND_DUMMY:
            raise NotFoundError(f"tip {tip_obj.name!r} is not a dummy")
        joints = []
        node = tip_obj
        while node.parent is not None and scene.objects[node.parent].kind == KIND_JOINT:
            node = scene.objects[node.parent]
            joints.append(node)
        if not joints:
            raise NotFoundError(f"tip {tip_obj.name!r} has no joint chain above it")
        joints.reverse()

        link_offsets = [j.local_pose for j in joints]
        base = joints[0]
        if base.parent is not None:
            link_offsets[0] = world_pose(scene, base.parent).compose(link_offsets[0])
        return cls(
            joint_types=[j.payload.joint_type for j in joints],
            axes=[j.payload.axis for j in joints],
            limits=[j.payload.limits for j in joints],
            link_offsets=link_offsets,
            tip_offset=tip_obj.local_pose,
            joint_handles=[j.handle for j in joints],
            tip_handle=tip_handle,
            scene=scene,
        )

    def current_q(self) -> np.ndarray:
        if self.scene is None or self.joint_handles is None:
            raise ArmNotBoundError("arm is not bound to a scene")
        return np.array(
            [self.scene.objects[h].payload.position for h in self.joint_handles]
        )


@dataclass
class IkParams:
    damping: float = 0.1  # lambda in the DLS update
    pos_tol: float = 1e-4  # metres
    ori_tol: float = 1e-3  # radians
    max_iters: int = 200
    step_clamp: float = 0.2  # max per-joint change per iteration

    def __post_init__(self):
        if self.damping <= 0 or self.pos_tol <= 0 or self.ori_tol <= 0:
            raise ValueError("damping and tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class IkResult:
    q: np.ndarray
    iterations: int
    pos_err: float
    ori_err: float


def _check_q(arm: ArmDescriptor, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (arm.dof,):
        raise ValueError(f"expected joint vector of length {arm.dof}, got shape {q.shape}")
    if np.any(q < arm.limits_lo) or np.any(q > arm.limits_hi):
        raise LimitViolationError("joint vector outside limits")
    return q


def _motion(joint_type: str, axis, qi: float) -> Pose:
    ax, ay, az = axis
    if joint_type == JOINT_REVOLUTE:
        half = 0.5 * qi
        s = math.sin(half)
        return Pose((0.0, 0.0, 0.0), Quaternion(math.cos(half), ax * s, ay * s, az * s))
    return Pose((ax * qi, ay * qi, az * qi))


def link_frames(arm: ArmDescriptor, q) -> list[Pose]:
    """Pose of each joint frame after its motion, base to tip."""
    q = _check_q(arm, q)
    frames = []
    pose = Pose.identity()
    for i in range(arm.dof):
        pose = pose.compose(arm.link_offsets[i]).compose(
            _motion(arm.joint_types[i], arm.axes[i], q[i])
        )
        frames.append(pose)
    return frames


def forward_kinematics(arm: ArmDescriptor, q) -> Pose:
    """Tip pose for the given joint vector."""
    frames = link_frames(arm, q)
    return frames[-1].compose(arm.tip_offset)


def get_tip_pose(arm: ArmDescriptor) -> Pose:
    """Live tip pose of a scene-bound arm; equals FK at the current q."""
    if arm.scene is None or arm.tip_handle is None:
        raise ArmNotBoundError("arm is not bound to a scene")
    return world_pose(arm.scene, arm.tip_handle)


def compute_jacobian(arm: ArmDescriptor, q) -> np.ndarray:
    """Geometric Jacobian of the tip, 6 x n.

    Rows are tip linear velocity then angular velocity; column i is
    ``(z_i x (p_tip - p_i), z_i)`` for a revolute joint and ``(z_i, 0)``
    for a prismatic one, with ``z_i`` the joint axis and ``p_i`` the joint
    origin, both in the FK base frame.
    """
    frames = link_frames(arm, q)
    p_tip = np.array(frames[-1].compose(arm.tip_offset).position)
    jac = np.zeros((6, arm.dof))
    for i, frame in enumerate(frames):
        z = np.array(frame.orientation.rotate(arm.axes[i]))
        if arm.joint_types[i] == JOINT_REVOLUTE:
            p = np.array(frame.position)
            jac[:3, i] = np.cross(z, p_tip - p)
            jac[3:, i] = z
        else:
            jac[:3, i] = z
    return jac


def pose_error(current: Pose, target: Pose) -> np.ndarray:
    """6-vector error: position difference and rotation-vector of the
    orientation mismatch (R_target * R_current^T)."""
    e = np.empty(6)
    e[:3] = np.subtract(target.position, current.position)
    q_err = target.orientation.multiply(current.orientation.conjugate())
    e[3:] = q_err.to_rotation_vector()
    return e


def solve_ik(arm: ArmDescriptor, target: Pose, q0, params: IkParams | None = None,
             position_only: bool = False) -> IkResult:
    """Damped-least-squares IK toward a target tip pose.

    Iterates ``dq = J^T (J J^T + damping^2 I)^-1 e`` with each component of
    ``dq`` clamped to ``step_clamp`` and ``q`` clamped to the joint limits,
    so the returned vector is always feasible.  With ``position_only`` the
    orientation rows are dropped and only ``pos_tol`` must be met.

    Raises ``IkNotConvergedError`` (carrying the best-effort q and its
    residuals) if tolerance is not reached within ``max_iters``.
    """
    if params is None:
        params = IkParams()
    q = _check_q(arm, q0).copy()
    rows = slice(0, 3) if position_only else slice(0, 6)
    n_rows = 3 if position_only else 6
    damping_sq = params.damping * params.damping

    best_q = q.copy()
    best_err = math.inf
    best_residuals = (math.inf, math.inf)

    for iteration in range(params.max_iters + 1):
        e = pose_error(forward_kinematics(arm, q), target)
        pos_err = float(np.linalg.norm(e[:3]))
        ori_err = 0.0 if position_only else float(np.linalg.norm(e[3:]))
        if pos_err + ori_err < best_err:
            best_err = pos_err + ori_err
            best_q = q.copy()
            best_residuals = (pos_err, ori_err)
        if pos_err <= params.pos_tol and (position_only or ori_err <= params.ori_tol):
            return IkResult(q=q, iterations=iteration, pos_err=pos_err, ori_err=ori_err)
        if iteration == params.max_iters:
            break
        jac = compute_jacobian(arm, q)[rows]
        gram = jac @ jac.T + damping_sq * np.eye(n_rows)
        dq = jac.T @ np.linalg.solve(gram, e[rows])
        np.clip(dq, -params.step_clamp, params.step_clamp, out=dq)
        q = np.clip(q + dq, arm.limits_lo, arm.limits_hi)

    raise IkNotConvergedError(best_q, params.max_iters, *best_residuals)


# --- batched variants -----------------------------------------------------------
#
# The planner validates thousands of configurations per query; doing that one
# Pose at a time is the bottleneck, so these operate on (N, dof) arrays with
# rotation matrices throughout.


def _axis_angle_matrices(axis, angles: np.ndarray) -> np.ndarray:
    """Rodrigues formula for one fixed axis and N angles -> (N, 3, 3)."""
    a = np.asarray(axis, dtype=float)
    k = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    c = np.cos(angles)[:, None, None]
    s = np.sin(angles)[:, None, None]
    eye = np.eye(3)
    outer = np.outer(a, a)
    return c * eye + s * k + (1.0 - c) * outer


def link_frames_batch(arm: ArmDescriptor, Q: np.ndarray):
    """Joint frames for a batch of configurations.

    Returns ``(R, t)`` with shapes (N, dof, 3, 3) and (N, dof, 3); frame i
    matches ``link_frames`` entry i.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[1] != arm.dof:
        raise ValueError(f"expected (N, {arm.dof}) configurations, got {Q.shape}")
    n_cfg = Q.shape[0]
    R = np.tile(np.eye(3), (n_cfg, 1, 1))
    t = np.zeros((n_cfg, 3))
    frames_R = np.empty((n_cfg, arm.dof, 3, 3))
    frames_t = np.empty((n_cfg, arm.dof, 3))
    for i in range(arm.dof):
        off = arm.link_offsets[i]
        r_off = off.orientation.to_matrix()
        t = t + np.einsum("nij,j->ni", R, np.asarray(off.position))
        R = R @ r_off
        if arm.joint_types[i] == JOINT_REVOLUTE:
            R = R @ _axis_angle_matrices(arm.axes[i], Q[:, i])
        else:
            step = np.outer(Q[:, i], np.asarray(arm.axes[i]))
            t = t + np.einsum("nij,nj->ni", R, step)
        frames_R[:, i] = R
        frames_t[:, i] = t
    return frames_R, frames_t


def forward_kinematics_batch(arm: ArmDescriptor, Q: np.ndarray):
    """Tip positions and rotation matrices for a batch: (N, 3) and (N, 3, 3)."""
    frames_R, frames_t = link_frames_batch(arm, Q)
    r_tip = arm.tip_offset.orientation.to_matrix()
    last_R = frames_R[:, -1]
    pos = frames_t[:, -1] + np.einsum("nij,j->ni", last_R, np.asarray(arm.tip_offset.position))
    return pos, last_R @ r_tip
