"""Rigid-transform algebra: unit quaternions and poses.

Conventions, stated once and tested everywhere:

* quaternions are w-first ``(w, x, y, z)``, Hamilton product, right-handed
  frames;
* a ``Pose`` maps points from its own frame into the parent frame:
  ``p_parent = R * p_local + t``;
* ``compose(a, b)`` applies ``b`` inside ``a``'s frame, so world poses of a
  tree accumulate root-to-leaf.

Scalars are plain Python floats rather than numpy arrays: pose composition
sits on the simulator's per-step hot path and small-array overhead dominates
at this size.  Conversion helpers to numpy matrices live at the bottom for
the renderer and kinematics, which batch their math.
"""

from __future__ import annotations

import math

import numpy as np


class Quaternion:
    """Unit quaternion, w-first, Hamilton convention."""

    __slots__ = ("w", "x", "y", "z")

    def __init__(self, w: float, x: float, y: float, z: float):
        self.w = w
        self.x = x
        self.y = y
        self.z = z

    @staticmethod
    def identity() -> "Quaternion":
        return Quaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "Quaternion":
        ax, ay, az = axis
        n = math.sqrt(ax * ax + ay * ay + az * az)
        if n == 0.0:
            raise ValueError("rotation axis must be non-zero")
        half = 0.5 * angle
        s = math.sin(half) / n
        return Quaternion(math.cos(half), ax * s, ay * s, az * s)

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize zero quaternion")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def multiply(self, other: "Quaternion") -> "Quaternion":
        """Hamilton product, renormalized to keep drift below 1e-9."""
        a, b = self, other
        w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z
        x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y
        y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x
        z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w
        n = math.sqrt(w * w + x * x + y * y + z * z)
        return Quaternion(w / n, x / n, y / n, z / n)

    __mul__ = multiply

    def rotate(self, v):
        """Rotate a 3-vector (any sequence) into the parent frame."""
        vx, vy, vz = v
        w, x, y, z = self.w, self.x, self.y, self.z
        # v + 2 w (q_v x v) + 2 q_v x (q_v x v), expanded
        tx = 2.0 * (y * vz - z * vy)
        ty = 2.0 * (z * vx - x * vz)
        tz = 2.0 * (x * vy - y * vx)
        return (
            vx + w * tx + y * tz - z * ty,
            vy + w * ty + z * tx - x * tz,
            vz + w * tz + x * ty - y * tx,
        )

    def rotate_inverse(self, v):
        return self.conjugate().rotate(v)

    def to_matrix(self) -> np.ndarray:
        """3x3 rotation matrix."""
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def to_rotation_vector(self):
        """Axis-angle log map as a 3-vector (radians)."""
        w = min(1.0, max(-1.0, self.w))
        # take the representative with w >= 0 so the angle is in [0, pi]
        sign = 1.0 if w >= 0.0 else -1.0
        w *= sign
        x, y, z = sign * self.x, sign * self.y, sign * self.z
        s = math.sqrt(x * x + y * y + z * z)
        if s < 1e-12:
            return (2.0 * x, 2.0 * y, 2.0 * z)  # small-angle: q_v ~ axis*angle/2
        angle = 2.0 * math.atan2(s, w)
        k = angle / s
        return (x * k, y * k, z * k)

    def __repr__(self):
        return f"Quaternion({self.w:.6g}, {self.x:.6g}, {self.y:.6g}, {self.z:.6g})"


class Pose:
    """Rigid transform: position (metres) plus unit-quaternion orientation."""

    __slots__ = ("position", "orientation")

    def __init__(self, position=(0.0, 0.0, 0.0), orientation: Quaternion | None = None):
        px, py, pz = position
        self.position = (float(px), float(py), float(pz))
        self.orientation = orientation if orientation is not None else Quaternion.identity()

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_translation(x: float, y: float, z: float) -> "Pose":
        return Pose((x, y, z))

    @staticmethod
    def from_axis_angle(axis, angle, position=(0.0, 0.0, 0.0)) -> "Pose":
        return Pose(position, Quaternion.from_axis_angle(axis, angle))

    def compose(self, other: "Pose") -> "Pose":
        """Apply ``other`` inside this pose's frame."""
        px, py, pz = self.position
        ox, oy, oz = self.orientation.rotate(other.position)
        return Pose(
            (px + ox, py + oy, pz + oz),
            self.orientation.multiply(other.orientation),
        )

    def inverse(self) -> "Pose":
        qi = self.orientation.conjugate()
        ix, iy, iz = qi.rotate(self.position)
        return Pose((-ix, -iy, -iz), qi)

    def transform_point(self, p):
        """Map a point from this frame into the parent frame."""
        rx, ry, rz = self.orientation.rotate(p)
        px, py, pz = self.position
        return (px + rx, py + ry, pz + rz)

    def inverse_transform_point(self, p):
        """Map a parent-frame point into this frame."""
        px, py, pz = self.position
        return self.orientation.rotate_inverse((p[0] - px, p[1] - py, p[2] - pz))

    def to_matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.orientation.to_matrix()
        m[:3, 3] = self.position
        return m

    def __repr__(self):
        return f"Pose(position={self.position}, orientation={self.orientation!r})"


def compose_pose(a: Pose, b: Pose) -> Pose:
    """Compose two poses: apply ``b`` in ``a``'s frame."""
    return a.compose(b)
