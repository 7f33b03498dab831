"""Joint-space RRT-Connect planning against a sphere collision world.

Collision geometry is spheres only — obstacle spheres fixed in the world,
robot spheres attached to link frames — which keeps every check exact and
lets tests re-validate returned paths independently.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    GoalInCollisionError,
    LimitViolationError,
    NoPathFoundError,
    StartInCollisionError,
)
from .kinematics import link_frames_batch
from .scene import KIND_JOINT, KIND_SHAPE
from .transforms import Pose


class CollisionWorld:
    """Obstacle spheres in world coordinates plus per-link robot spheres.

    obstacles: iterable of (center xyz, radius).
    link_spheres: one iterable of (local center xyz, radius) per arm joint;
    local centers live in the post-motion frame of that joint.
    """

    def __init__(self, obstacles=(), link_spheres=()):
        obstacles = list(obstacles)
        if obstacles:
            self.obstacle_centers = np.array([c for c, _ in obstacles], dtype=float)
            self.obstacle_radii = np.array([r for _, r in obstacles], dtype=float)
        else:
            self.obstacle_centers = np.zeros((0, 3))
            self.obstacle_radii = np.zeros(0)
        if np.any(self.obstacle_radii <= 0):
            raise ValueError("obstacle radii must be positive")
        self.link_centers = []
        self.link_radii = []
        for spheres in link_spheres:
            spheres = list(spheres)
            if spheres:
                centers = np.array([c for c, _ in spheres], dtype=float)
                radii = np.array([r for _, r in spheres], dtype=float)
            else:
                centers = np.zeros((0, 3))
                radii = np.zeros(0)
            if np.any(radii <= 0):
                raise ValueError("link sphere radii must be positive")
            self.link_centers.append(centers)
            self.link_radii.append(radii)

    @property
    def n_links(self):
        return len(self.link_centers)


@dataclass
class PlanningParams:
    step_size: float = 0.1
    goal_bias: float = 0.1
    max_nodes: int = 10_000
    validation_resolution: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must be in [0, 1]")
        if self.validation_resolution > self.step_size:
            raise ValueError("validation_resolution must not exceed step_size")
        if self.max_nodes < 2:
            raise ValueError("max_nodes must be at least 2")


def _check_limits(arm, q, label):
    q = np.asarray(q, dtype=float)
    if q.shape != (arm.dof,):
        raise ValueError(f"{label} has {q.shape} entries, arm has {arm.dof} joints")
    if np.any(q < arm.limits_lo) or np.any(q > arm.limits_hi):
        raise LimitViolationError(f"{label} violates joint limits")
    return q


def in_collision_batch(arm, qs, world):
    """Vectorized collision test; returns a boolean per configuration."""
    qs = np.asarray(qs, dtype=float)
    if world.n_links != arm.dof:
        raise ValueError("collision world link count does not match arm dof")
    n = qs.shape[0]
    hit = np.zeros(n, dtype=bool)
    if world.obstacle_centers.shape[0] == 0:
        return hit
    rotations, translations = link_frames_batch(arm, qs)
    for j in range(arm.dof):
        centers = world.link_centers[j]
        if centers.shape[0] == 0:
            continue
        # world centers: (n, m, 3)
        wc = np.einsum("nab,mb->nma", rotations[:, j], centers) + translations[:, j, None, :]
        diff = wc[:, :, None, :] - world.obstacle_centers[None, None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        reach = world.link_radii[j][None, :, None] + world.obstacle_radii[None, None, :]
        hit |= np.any(dist < reach, axis=(1, 2))  # touching is collision-free
    return hit


def in_collision(arm, q, world):
    return bool(in_collision_batch(arm, np.asarray(q, dtype=float)[None, :], world)[0])


def _segment_points(a, b, resolution):
    """Interior + endpoint samples of segment a->b at L-inf spacing <= resolution."""
    span = float(np.max(np.abs(b - a)))
    steps = max(1, math.ceil(span / resolution))
    ts = np.arange(1, steps + 1) / steps
    return a[None, :] + ts[:, None] * (b - a)[None, :]


def _segment_free(arm, a, b, world, resolution):
    return not np.any(in_collision_batch(arm, _segment_points(a, b, resolution), world))


def densify(waypoints, resolution):
    """Insert evenly spaced points so consecutive rows differ <= resolution per joint."""
    waypoints = [np.asarray(w, dtype=float) for w in waypoints]
    out = [waypoints[0]]
    for a, b in zip(waypoints, waypoints[1:]):
        out.extend(_segment_points(a, b, resolution))
    return np.array(out)


def path_length(path):
    path = np.asarray(path, dtype=float)
    if len(path) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1)))


_TRAPPED, _ADVANCED, _REACHED = 0, 1, 2


class _Tree:
    def __init__(self, root, capacity):
        self.qs = np.empty((capacity, root.shape[0]))
        self.qs[0] = root
        self.parents = [-1]
        self.n = 1

    def nearest(self, q):
        diff = self.qs[: self.n] - q
        return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))

    def add(self, q, parent):
        self.qs[self.n] = q
        self.parents.append(parent)
        self.n += 1
        return self.n - 1

    def branch(self, index):
        """Configurations from the root to node `index`, inclusive."""
        out = []
        while index >= 0:
            out.append(self.qs[index])
            index = self.parents[index]
        out.reverse()
        return out


def _extend(tree, q_target, arm, world, params):
    near = tree.nearest(q_target)
    q_near = tree.qs[near]
    delta = q_target - q_near
    span = float(np.max(np.abs(delta)))
    if span < 1e-12:
        return _REACHED, near
    if span <= params.step_size:
        q_new = q_target
        reached = True
    else:
        q_new = q_near + delta * (params.step_size / span)
        reached = False
    if not _segment_free(arm, q_near, q_new, world, params.validation_resolution):
        return _TRAPPED, -1
    index = tree.add(q_new, near)
    return (_REACHED if reached else _ADVANCED), index


def _connect(tree, q_target, arm, world, params, budget):
    """Greedily extend toward q_target until reached, blocked, or out of nodes."""
    status = _ADVANCED
    index = -1
    while status == _ADVANCED:
        if tree.n >= budget:
            return _TRAPPED, -1
        status, index = _extend(tree, q_target, arm, world, params)
    return status, index


def plan_rrt_connect(arm, q_start, q_goal, world, params=None):
    if params is None:
        params = PlanningParams()
    q_start = _check_limits(arm, q_start, "q_start")
    q_goal = _check_limits(arm, q_goal, "q_goal")
    if in_collision(arm, q_start, world):
        raise StartInCollisionError("start configuration is in collision")
    if in_collision(arm, q_goal, world):
        raise GoalInCollisionError("goal configuration is in collision")

    if _segment_free(arm, q_start, q_goal, world, params.validation_resolution):
        return densify([q_start, q_goal], params.validation_resolution)

    rng = np.random.default_rng(params.seed)
    # either tree may take most of the budget during a long greedy connect
    tree_start = _Tree(q_start, params.max_nodes)
    tree_goal = _Tree(q_goal, params.max_nodes)
    ta, tb = tree_start, tree_goal

    lo, hi = arm.limits_lo, arm.limits_hi
    while ta.n + tb.n < params.max_nodes:
        if rng.random() < params.goal_bias:
            q_rand = tb.qs[0]
        else:
            q_rand = rng.uniform(lo, hi)
        status, index = _extend(ta, q_rand, arm, world, params)
        if status != _TRAPPED:
            q_new = ta.qs[index]
            remaining = params.max_nodes - ta.n - tb.n
            status2, index2 = _connect(tb, q_new, arm, world, params, tb.n + remaining)
            if status2 == _REACHED:
                if ta is tree_start:
                    first, second = ta.branch(index), tb.branch(index2)
                else:
                    first, second = tb.branch(index2), ta.branch(index)
                # both branches include the meeting configuration; drop one copy
                waypoints = first + second[::-1][1:]
                return densify(waypoints, params.validation_resolution)
        ta, tb = tb, ta

    raise NoPathFoundError(
        f"no path found within {params.max_nodes} nodes "
        f"(start tree {tree_start.n}, goal tree {tree_goal.n})"
    )


def shortcut_path(path, world, arm, params=None, attempts=100):
    """Replace random sub-segments with straight lines when collision-free.

    Output arc length never exceeds the input's, and the result is densified
    back to validation resolution.
    """
    if params is None:
        params = PlanningParams()
    pts = [np.asarray(p, dtype=float) for p in np.asarray(path, dtype=float)]
    rng = np.random.default_rng(params.seed)
    for _ in range(attempts):
        if len(pts) < 3:
            break
        i = int(rng.integers(0, len(pts) - 2))
        j = int(rng.integers(i + 2, len(pts)))
        if _segment_free(arm, pts[i], pts[j], world, params.validation_resolution):
            pts = pts[: i + 1] + pts[j:]
    return densify(pts, params.validation_resolution)


def collision_world_from_scene(scene, arm):
    """Build a CollisionWorld snapshot from a scene's collision spheres.

    Shapes rigidly attached to one of the arm's links become robot spheres in
    that link's frame; every other shape's spheres become world obstacles at
    their current pose.
    """
    from .scene import world_pose  # local import to avoid cycle at module load

    joint_of = {}  # handle -> arm joint index, for shapes hanging off a link
    for idx, h in enumerate(arm.joint_handles or ()):
        joint_of[h] = idx

    def owning_link(obj):
        handle = obj.handle
        while handle is not None:
            if handle in joint_of:
                return joint_of[handle]
            handle = scene.objects[handle].parent
        return None

    link_spheres = [[] for _ in range(arm.dof)]
    obstacles = []
    frames = None
    for obj in scene.iter_kind(KIND_SHAPE):
        spheres = obj.payload.collision_spheres
        if not spheres:
            continue
        pose = world_pose(scene, obj.handle)
        link = owning_link(obj)
        if link is None:
            for center, radius in spheres:
                obstacles.append((pose.transform_point(center), radius))
        else:
            if frames is None:
                from .kinematics import link_frames

                frames = link_frames(arm, arm.current_q())
            frame = frames[link]
            for center, radius in spheres:
                world_c = pose.transform_point(center)
                link_spheres[link].append((frame.inverse_transform_point(world_c), radius))
    return CollisionWorld(obstacles, link_spheres)
