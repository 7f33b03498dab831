"""Scene graph: named objects in a parent/child transform hierarchy.

Scenes load from a JSON document (see ``docs in README``): a flat object
list with parent links by name.  Handles are dense integers assigned in
document order starting at 1, so they are reproducible across loads of the
same file.

A joint object contributes its commanded motion to the hierarchy on the
fly: the effective local transform of a joint is ``local_pose * motion(q)``
where ``q`` is the joint's current position.  Nothing else in the tree
mutates when a joint moves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import meshes
from .errors import (
    BadOrientationError,
    CycleError,
    DuplicateNameError,
    NotFoundError,
    SceneParseError,
    SetOnJointError,
    UnknownParentError,
)
from .transforms import Pose, Quaternion, compose_pose

KIND_SHAPE = "shape"
KIND_DUMMY = "dummy"
KIND_JOINT = "joint"
KIND_VISION_SENSOR = "vision_sensor"
KIND_LIGHT = "light"
OBJECT_KINDS = (KIND_SHAPE, KIND_DUMMY, KIND_JOINT, KIND_VISION_SENSOR, KIND_LIGHT)

JOINT_REVOLUTE = "revolute"
JOINT_PRISMATIC = "prismatic"

MODE_VELOCITY = "velocity"
MODE_POSITION = "position"
MODE_PASSIVE = "passive"

DEFAULT_AMBIENT = 0.2
QUATERNION_NORM_SLACK = 1e-3


@dataclass
class ShapePayload:
    primitive: str  # box | sphere | plane
    size: tuple
    color: tuple
    collision_spheres: list = field(default_factory=list)  # [(center xyz, radius)]
    mesh: meshes.MeshData | None = None


@dataclass
class JointPayload:
    joint_type: str  # revolute | prismatic
    axis: tuple
    limits: tuple  # (lo, hi)
    mode: str
    max_velocity: float
    position: float = 0.0  # current q, written by the simulator
    initial_position: float = 0.0


@dataclass
class VisionSensorPayload:
    resolution: tuple  # (width, height) pixels
    fov_deg: float  # horizontal
    near: float
    far: float


@dataclass
class LightPayload:
    light_type: str  # directional | spot | point
    color: tuple
    cone_deg: float | None = None


@dataclass
class DummyPayload:
    pass


class SceneObject:
    __slots__ = ("handle", "name", "kind", "parent", "local_pose", "payload", "children")

    def __init__(self, handle, name, kind, parent, local_pose, payload):
        self.handle = handle
        self.name = name
        self.kind = kind
        self.parent = parent  # parent handle or None
        self.local_pose = local_pose
        self.payload = payload
        self.children: list[int] = []

    def __repr__(self):
        return f"SceneObject({self.handle}, {self.name!r}, {self.kind})"


class Scene:
    """Handle-addressed object map plus the derived indices."""

    def __init__(self):
        self.objects: dict[int, SceneObject] = {}
        self.roots: list[int] = []
        self.ambient = DEFAULT_AMBIENT
        self.dt: float | None = None  # per-scene timestep override
        self._by_name: dict[str, int] = {}

    def __contains__(self, handle):
        return handle in self.objects

    def object(self, handle: int) -> SceneObject:
        obj = self.objects.get(handle)
        if obj is None:
            raise NotFoundError(f"unknown handle {handle}")
        return obj

    def handle_of(self, name: str) -> int:
        h = self._by_name.get(name)
        if h is None:
            raise NotFoundError(f"no object named {name!r}")
        return h

    def iter_kind(self, kind: str):
        for h in sorted(self.objects):
            if self.objects[h].kind == kind:
                yield self.objects[h]


def _joint_motion(payload: JointPayload) -> Pose:
    q = payload.position
    ax, ay, az = payload.axis
    if payload.joint_type == JOINT_REVOLUTE:
        half = 0.5 * q
        s = math.sin(half)
        return Pose((0.0, 0.0, 0.0), Quaternion(math.cos(half), ax * s, ay * s, az * s))
    return Pose((ax * q, ay * q, az * q))


def effective_local_pose(obj: SceneObject) -> Pose:
    if obj.kind == KIND_JOINT:
        return obj.local_pose.compose(_joint_motion(obj.payload))
    return obj.local_pose


def world_pose(scene: Scene, handle: int) -> Pose:
    """Composition of effective local poses from the root down to ``handle``.

    Equivalent to folding ``effective_local_pose`` with ``Pose.compose``,
    but inlined over plain floats: this sits on the hot query path and the
    per-level object churn costs several times the arithmetic.
    """
    obj = scene.object(handle)
    chain = [obj]
    objects = scene.objects
    parent = obj.parent
    while parent is not None:
        obj = objects[parent]
        chain.append(obj)
        parent = obj.parent

    qw, qx, qy, qz = 1.0, 0.0, 0.0, 0.0
    px, py, pz = 0.0, 0.0, 0.0
    sqrt, sin, cos = math.sqrt, math.sin, math.cos
    for node in reversed(chain):
        local = node.local_pose
        bx, by, bz = local.position
        # p += R(q) b
        tx = 2.0 * (qy * bz - qz * by)
        ty = 2.0 * (qz * bx - qx * bz)
        tz = 2.0 * (qx * by - qy * bx)
        px += bx + qw * tx + qy * tz - qz * ty
        py += by + qw * ty + qz * tx - qx * tz
        pz += bz + qw * tz + qx * ty - qy * tx
        # q = q (x) local.orientation, renormalized
        lq = local.orientation
        bw, bx, by, bz = lq.w, lq.x, lq.y, lq.z
        w = qw * bw - qx * bx - qy * by - qz * bz
        x = qw * bx + qx * bw + qy * bz - qz * by
        y = qw * by - qx * bz + qy * bw + qz * bx
        z = qw * bz + qx * by - qy * bx + qz * bw
        n = sqrt(w * w + x * x + y * y + z * z)
        qw, qx, qy, qz = w / n, x / n, y / n, z / n
        if node.kind == KIND_JOINT:
            payload = node.payload
            qj = payload.position
            ax, ay, az = payload.axis
            if payload.joint_type == JOINT_REVOLUTE:
                half = 0.5 * qj
                s = sin(half)
                bw, bx, by, bz = cos(half), ax * s, ay * s, az * s
                w = qw * bw - qx * bx - qy * by - qz * bz
                x = qw * bx + qx * bw + qy * bz - qz * by
                y = qw * by - qx * bz + qy * bw + qz * bx
                z = qw * bz + qx * by - qy * bx + qz * bw
                n = sqrt(w * w + x * x + y * y + z * z)
                qw, qx, qy, qz = w / n, x / n, y / n, z / n
            else:
                bx, by, bz = ax * qj, ay * qj, az * qj
                tx = 2.0 * (qy * bz - qz * by)
                ty = 2.0 * (qz * bx - qx * bz)
                tz = 2.0 * (qx * by - qy * bx)
                px += bx + qw * tx + qy * tz - qz * ty
                py += by + qw * ty + qz * tx - qx * tz
                pz += bz + qw * tz + qx * ty - qy * tx
    return Pose((px, py, pz), Quaternion(qw, qx, qy, qz))


def get_object_by_name(scene: Scene, name: str) -> int:
    return scene.handle_of(name)


def get_position(scene: Scene, handle: int, relative_to: int | None = None) -> np.ndarray:
    """World position, or position expressed in ``relative_to``'s frame."""
    p = world_pose(scene, handle).position
    if relative_to is not None:
        p = world_pose(scene, relative_to).inverse_transform_point(p)
    return np.array(p)


def set_position(scene: Scene, handle: int, p, relative_to: int | None = None) -> None:
    """Move an object so ``get_position`` with the same frame returns ``p``.

    Joints cannot be repositioned this way; they move only through joint
    targets.  Descendants follow rigidly (child local poses are untouched).
    """
    obj = scene.object(handle)
    if obj.kind == KIND_JOINT:
        raise SetOnJointError(f"cannot set position of joint {obj.name!r}")
    target = (float(p[0]), float(p[1]), float(p[2]))
    if relative_to is not None:
        target = world_pose(scene, relative_to).transform_point(target)
    if obj.parent is not None:
        target = world_pose(scene, obj.parent).inverse_transform_point(target)
    obj.local_pose = Pose(target, obj.local_pose.orientation)


def set_orientation(scene: Scene, handle: int, quat: Quaternion, relative_to: int | None = None) -> None:
    """Orientation counterpart of ``set_position``; world frame by default."""
    obj = scene.object(handle)
    if obj.kind == KIND_JOINT:
        raise SetOnJointError(f"cannot set orientation of joint {obj.name!r}")
    world_target = quat
    if relative_to is not None:
        world_target = world_pose(scene, relative_to).orientation.multiply(quat)
    if obj.parent is not None:
        parent_q = world_pose(scene, obj.parent).orientation
        world_target = parent_q.conjugate().multiply(world_target)
    obj.local_pose = Pose(obj.local_pose.position, world_target)


# --- loading -------------------------------------------------------------------


def _require(cond, message):
    if not cond:
        raise SceneParseError(message)


def _vec3(raw, what):
    _require(
        isinstance(raw, (list, tuple)) and len(raw) == 3
        and all(isinstance(v, (int, float)) for v in raw),
        f"{what} must be a list of 3 numbers",
    )
    return (float(raw[0]), float(raw[1]), float(raw[2]))


def _parse_quaternion(raw, name):
    _require(
        isinstance(raw, (list, tuple)) and len(raw) == 4
        and all(isinstance(v, (int, float)) for v in raw),
        f"quaternion of {name!r} must be a list of 4 numbers [w,x,y,z]",
    )
    q = Quaternion(float(raw[0]), float(raw[1]), float(raw[2]), float(raw[3]))
    n = q.norm()
    if abs(n - 1.0) > QUATERNION_NORM_SLACK:
        raise BadOrientationError(
            f"quaternion of {name!r} has norm {n:.6f}; more than 1e-3 from unit"
        )
    return q.normalized()


def _parse_shape(entry, name):
    primitive = entry.get("primitive")
    _require(primitive in ("box", "sphere", "plane"),
             f"shape {name!r}: primitive must be box, sphere or plane")
    raw_size = entry.get("size")
    _require(raw_size is not None, f"shape {name!r}: size is required")
    if primitive == "sphere":
        if isinstance(raw_size, (int, float)):
            radius = float(raw_size)
        else:
            _require(isinstance(raw_size, (list, tuple)) and len(raw_size) >= 1,
                     f"shape {name!r}: sphere size must be a radius")
            radius = float(raw_size[0])
        _require(radius > 0, f"shape {name!r}: radius must be positive")
        size = (radius,)
        mesh = meshes.sphere_mesh(radius)
    elif primitive == "box":
        sx, sy, sz = _vec3(raw_size, f"shape {name!r}: size")
        _require(sx > 0 and sy > 0 and sz > 0, f"shape {name!r}: box size must be positive")
        size = (sx, sy, sz)
        mesh = meshes.box_mesh(size)
    else:  # plane
        _require(isinstance(raw_size, (list, tuple)) and len(raw_size) >= 2,
                 f"shape {name!r}: plane size must be [x, y]")
        sx, sy = float(raw_size[0]), float(raw_size[1])
        _require(sx > 0 and sy > 0, f"shape {name!r}: plane size must be positive")
        size = (sx, sy)
        mesh = meshes.plane_mesh(size)

    color = _vec3(entry.get("color", [1.0, 1.0, 1.0]), f"shape {name!r}: color")
    _require(all(0.0 <= c <= 1.0 for c in color), f"shape {name!r}: color channels must be in [0,1]")

    spheres = []
    for i, cs in enumerate(entry.get("collision_spheres", [])):
        _require(isinstance(cs, dict) and "center" in cs and "radius" in cs,
                 f"shape {name!r}: collision sphere {i} needs center and radius")
        centre = _vec3(cs["center"], f"shape {name!r}: collision sphere {i} center")
        radius = float(cs["radius"])
        _require(radius > 0, f"shape {name!r}: collision sphere {i} radius must be positive")
        spheres.append((centre, radius))
    return ShapePayload(primitive=primitive, size=size, color=color,
                        collision_spheres=spheres, mesh=mesh)


def _parse_joint(entry, name):
    joint_type = entry.get("joint_type")
    _require(joint_type in (JOINT_REVOLUTE, JOINT_PRISMATIC),
             f"joint {name!r}: joint_type must be revolute or prismatic")
    raw_axis = entry.get("axis")
    _require(raw_axis is not None, f"joint {name!r}: axis is required")
    axis = _vec3(raw_axis, f"joint {name!r}: axis")
    norm = math.sqrt(sum(a * a for a in axis))
    _require(norm > 1e-9, f"joint {name!r}: axis must be non-zero")
    axis = tuple(a / norm for a in axis)
    raw_limits = entry.get("limits")
    _require(isinstance(raw_limits, (list, tuple)) and len(raw_limits) == 2,
             f"joint {name!r}: limits [lo, hi] are required")
    lo, hi = float(raw_limits[0]), float(raw_limits[1])
    _require(lo <= hi, f"joint {name!r}: limits must satisfy lo <= hi")
    mode = entry.get("mode", MODE_VELOCITY)
    _require(mode in (MODE_VELOCITY, MODE_POSITION, MODE_PASSIVE),
             f"joint {name!r}: mode must be velocity, position or passive")
    max_velocity = float(entry.get("max_velocity", 1.0))
    _require(max_velocity > 0, f"joint {name!r}: max_velocity must be positive")
    q0 = float(entry.get("joint_position", 0.0))
    _require(lo <= q0 <= hi, f"joint {name!r}: initial position outside limits")
    return JointPayload(joint_type=joint_type, axis=axis, limits=(lo, hi),
                        mode=mode, max_velocity=max_velocity,
                        position=q0, initial_position=q0)


def _parse_vision_sensor(entry, name):
    raw_res = entry.get("resolution")
    _require(isinstance(raw_res, (list, tuple)) and len(raw_res) == 2,
             f"vision sensor {name!r}: resolution [w, h] is required")
    w, h = int(raw_res[0]), int(raw_res[1])
    _require(w > 0 and h > 0, f"vision sensor {name!r}: resolution must be positive")
    fov = float(entry.get("fov_deg", 60.0))
    _require(0.0 < fov < 180.0, f"vision sensor {name!r}: fov_deg must be in (0, 180)")
    near = float(entry.get("near", 0.1))
    far = float(entry.get("far", 10.0))
    _require(0.0 < near < far, f"vision sensor {name!r}: need 0 < near < far")
    return VisionSensorPayload(resolution=(w, h), fov_deg=fov, near=near, far=far)


def _parse_light(entry, name):
    light_type = entry.get("light_type")
    _require(light_type in ("directional", "spot", "point"),
             f"light {name!r}: light_type must be directional, spot or point")
    color = _vec3(entry.get("color", [1.0, 1.0, 1.0]), f"light {name!r}: color")
    cone = None
    if light_type == "spot":
        cone = float(entry.get("cone_deg", 0.0))
        _require(0.0 < cone < 180.0, f"light {name!r}: spot needs cone_deg in (0, 180)")
    return LightPayload(light_type=light_type, color=color, cone_deg=cone)


_PAYLOAD_PARSERS = {
    KIND_SHAPE: _parse_shape,
    KIND_JOINT: _parse_joint,
    KIND_VISION_SENSOR: _parse_vision_sensor,
    KIND_LIGHT: _parse_light,
    KIND_DUMMY: lambda entry, name: DummyPayload(),
}


def load_scene(text: str) -> Scene:
    """Parse and fully link a scene document; all invariants verified."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc

    _require(isinstance(doc, dict), "top level must be a JSON object")
    entries = doc.get("objects")
    _require(isinstance(entries, list), 'top level needs an "objects" list')

    scene = Scene()
    scene.ambient = float(doc.get("ambient", DEFAULT_AMBIENT))
    if "dt" in doc:
        scene.dt = float(doc["dt"])
        _require(scene.dt > 0, "dt must be positive")

    parent_names: dict[int, str | None] = {}
    for index, entry in enumerate(entries):
        _require(isinstance(entry, dict), f"objects[{index}] must be an object")
        name = entry.get("name")
        _require(isinstance(name, str) and name, f"objects[{index}]: non-empty name required")
        if name in scene._by_name:
            raise DuplicateNameError(f"duplicate object name {name!r}")
        kind = entry.get("type")
        _require(kind in OBJECT_KINDS, f"object {name!r}: unknown type {kind!r}")
        position = _vec3(entry.get("position", [0.0, 0.0, 0.0]), f"position of {name!r}")
        quat = _parse_quaternion(entry.get("quaternion", [1.0, 0.0, 0.0, 0.0]), name)
        payload = _PAYLOAD_PARSERS[kind](entry, name)

        handle = index + 1  # dense handles in document order
        obj = SceneObject(handle, name, kind, None, Pose(position, quat), payload)
        scene.objects[handle] = obj
        scene._by_name[name] = handle
        parent = entry.get("parent")
        _require(parent is None or isinstance(parent, str),
                 f"object {name!r}: parent must be a name or null")
        parent_names[handle] = parent

    # second pass: link parents (forward references are fine)
    for handle, parent_name in parent_names.items():
        obj = scene.objects[handle]
        if parent_name is None:
            scene.roots.append(handle)
            continue
        parent_handle = scene._by_name.get(parent_name)
        if parent_handle is None:
            raise UnknownParentError(
                f"object {obj.name!r}: parent {parent_name!r} does not exist")
        obj.parent = parent_handle
        scene.objects[parent_handle].children.append(handle)

    # acyclicity by traversal: no walk may exceed the object count
    limit = len(scene.objects)
    for handle, obj in scene.objects.items():
        steps = 0
        node = obj
        while node.parent is not None:
            node = scene.objects[node.parent]
            steps += 1
            if steps > limit:
                raise CycleError(f"parent chain of {obj.name!r} contains a cycle")
    return scene


def save_scene(scene: Scene) -> str:
    """Serialize to the same JSON schema; reloading reproduces handles and poses."""
    entries = []
    for handle in sorted(scene.objects):
        obj = scene.objects[handle]
        q = obj.local_pose.orientation
        entry = {
            "name": obj.name,
            "type": obj.kind,
            "parent": scene.objects[obj.parent].name if obj.parent is not None else None,
            "position": list(obj.local_pose.position),
            "quaternion": [q.w, q.x, q.y, q.z],
        }
        payload = obj.payload
        if obj.kind == KIND_SHAPE:
            entry["primitive"] = payload.primitive
            entry["size"] = payload.size[0] if payload.primitive == "sphere" else list(payload.size)
            entry["color"] = list(payload.color)
            if payload.collision_spheres:
                entry["collision_spheres"] = [
                    {"center": list(c), "radius": r} for c, r in payload.collision_spheres
                ]
        elif obj.kind == KIND_JOINT:
            entry["joint_type"] = payload.joint_type
            entry["axis"] = list(payload.axis)
            entry["limits"] = list(payload.limits)
            entry["mode"] = payload.mode
            entry["max_velocity"] = payload.max_velocity
            entry["joint_position"] = payload.position
        elif obj.kind == KIND_VISION_SENSOR:
            entry["resolution"] = list(payload.resolution)
            entry["fov_deg"] = payload.fov_deg
            entry["near"] = payload.near
            entry["far"] = payload.far
        elif obj.kind == KIND_LIGHT:
            entry["light_type"] = payload.light_type
            entry["color"] = list(payload.color)
            if payload.cone_deg is not None:
                entry["cone_deg"] = payload.cone_deg
        entries.append(entry)
    doc = {"ambient": scene.ambient, "objects": entries}
    if scene.dt is not None:
        doc["dt"] = scene.dt
    return json.dumps(doc, indent=2)
