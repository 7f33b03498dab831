"""Independent reference implementations used to check the kernel.

Everything here is deliberately written against plain matrices (and scipy,
where it helps) rather than the package's own pose algebra, so a bug in the
implementation cannot hide in its oracle.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial.transform import Rotation


def quat_wxyz_to_matrix(w, x, y, z) -> np.ndarray:
    return Rotation.from_quat([x, y, z, w]).as_matrix()


def pose_to_matrix(position, quat_wxyz) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = quat_wxyz_to_matrix(*quat_wxyz)
    m[:3, 3] = position
    return m


def matrix_of(pose) -> np.ndarray:
    """4x4 matrix of a kernel Pose, built through scipy, not the kernel."""
    q = pose.orientation
    return pose_to_matrix(pose.position, (q.w, q.x, q.y, q.z))


def planar_2r_tip(l1, l2, q1, q2):
    """Closed-form planar two-revolute tip position."""
    return np.array(
        [
            l1 * math.cos(q1) + l2 * math.cos(q1 + q2),
            l1 * math.sin(q1) + l2 * math.sin(q1 + q2),
            0.0,
        ]
    )


def finite_difference_jacobian(fk, q, h=1e-6) -> np.ndarray:
    """Central-difference geometric Jacobian of a pose-valued function.

    ``fk(q)`` must return a kernel Pose.  Linear rows come from position
    differences; angular rows from the rotation vector of R+ R-^T over 2h.
    """
    q = np.asarray(q, dtype=float)
    n = q.size
    jac = np.zeros((6, n))
    for i in range(n):
        dq = np.zeros(n)
        dq[i] = h
        plus = fk(q + dq)
        minus = fk(q - dq)
        jac[:3, i] = (np.array(plus.position) - np.array(minus.position)) / (2 * h)
        r_plus = quat_wxyz_to_matrix(
            plus.orientation.w, plus.orientation.x, plus.orientation.y, plus.orientation.z
        )
        r_minus = quat_wxyz_to_matrix(
            minus.orientation.w, minus.orientation.x, minus.orientation.y, minus.orientation.z
        )
        rotvec = Rotation.from_matrix(r_plus @ r_minus.T).as_rotvec()
        jac[3:, i] = rotvec / (2 * h)
    return jac


# --- ray casting (renderer oracle) ----------------------------------------------


def ray_sphere(origin, direction, centre, radius):
    """Smallest positive hit distance along the ray, or None."""
    oc = np.asarray(origin) - np.asarray(centre)
    d = np.asarray(direction)
    b = 2.0 * float(np.dot(oc, d))
    c = float(np.dot(oc, oc)) - radius * radius
    disc = b * b - 4.0 * float(np.dot(d, d)) * c
    if disc < 0:
        return None
    sq = math.sqrt(disc)
    den = 2.0 * float(np.dot(d, d))
    t1 = (-b - sq) / den
    t2 = (-b + sq) / den
    for t in (t1, t2):
        if t > 1e-9:
            return t
    return None


def ray_box(origin, direction, half_extents):
    """Slab test against an axis-aligned box centred at the origin."""
    t_near, t_far = -math.inf, math.inf
    for axis in range(3):
        o, d, h = origin[axis], direction[axis], half_extents[axis]
        if abs(d) < 1e-12:
            if abs(o) > h:
                return None
            continue
        t1, t2 = (-h - o) / d, (h - o) / d
        if t1 > t2:
            t1, t2 = t2, t1
        t_near = max(t_near, t1)
        t_far = min(t_far, t2)
        if t_near > t_far:
            return None
    if t_far < 1e-9:
        return None
    return t_near if t_near > 1e-9 else t_far


def ray_rectangle(origin, direction, half_x, half_y):
    """Hit distance against the z=0 rectangle |x|<=hx, |y|<=hy, or None."""
    if abs(direction[2]) < 1e-12:
        return None
    t = -origin[2] / direction[2]
    if t <= 1e-9:
        return None
    x = origin[0] + t * direction[0]
    y = origin[1] + t * direction[1]
    if abs(x) <= half_x and abs(y) <= half_y:
        return t
    return None


def raycast_depth(scene_shapes, camera_pose_matrix, width, height, fov_deg, near, far):
    """Analytic depth image: view-axis z of the nearest hit, ``far`` if none.

    ``scene_shapes`` is a list of dicts: {"kind": "sphere"|"box"|"plane",
    "matrix": 4x4 world transform, "params": radius | half-extents | (hx, hy)}.
    Works in world space with true primitive geometry (not the tessellation).
    """
    f = (width / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
    cam = np.asarray(camera_pose_matrix)
    cam_r = cam[:3, :3]
    cam_t = cam[:3, 3]
    depth = np.full((height, width), float(far))
    for row in range(height):
        for col in range(width):
            dir_cam = np.array(
                [(col + 0.5 - width / 2.0) / f, (row + 0.5 - height / 2.0) / f, 1.0]
            )
            dir_world = cam_r @ dir_cam
            best = math.inf
            for shape in scene_shapes:
                m = np.asarray(shape["matrix"])
                inv_r = m[:3, :3].T
                local_o = inv_r @ (cam_t - m[:3, 3])
                local_d = inv_r @ dir_world
                kind = shape["kind"]
                if kind == "sphere":
                    t = ray_sphere(local_o, local_d, (0, 0, 0), shape["params"])
                elif kind == "box":
                    t = ray_box(local_o, local_d, shape["params"])
                else:
                    t = ray_rectangle(local_o, local_d, *shape["params"])
                if t is not None and t < best:
                    best = t
            if best < math.inf:
                # dir_cam has z component 1, so the ray parameter IS the
                # view-axis depth of the hit point
                if near <= best <= far:
                    depth[row, col] = best
    return depth
