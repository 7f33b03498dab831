"""Software rasterizer for vision sensors.

Deterministic z-buffer rendering with Lambertian shading and hard 0/1 shadow
maps for directional, spot and point lights.  Depth captures carry metric
view-axis distances with the far plane as background.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotALightError, NotAVisionSensorError
from .scene import KIND_LIGHT, KIND_SHAPE, KIND_VISION_SENSOR, world_pose

# background sentinel in shadow maps: occludes nothing
SHADOW_FAR = np.inf


@dataclass
class ShadowParams:
    resolution: int = 512
    bias: float = 1e-3  # in normalized light depth
    near: float = 0.05  # spot/point light frustum near plane

    def __post_init__(self):
        if self.resolution & (self.resolution - 1) or self.resolution <= 0:
            raise ValueError("shadow map resolution must be a power of two")


class ShadowMap:
    """Depth as seen from one light, plus the projection that produced it.

    data holds normalized depth in [0, 1] (point lights: one slab per cube
    face) with SHADOW_FAR where the light sees nothing.
    """

    def __init__(self, kind, data, bias, world_to_light, extra):
        self.kind = kind
        self.data = data
        self.bias = bias
        self.world_to_light = world_to_light  # 3x3 rotation^T and origin
        self.extra = extra


def _gather_world_triangles(scene, with_shading=False):
    """All shape triangles in world coordinates.

    Returns (verts (T,3,3), normals (T,3,3), handles (T,)); the latter two are
    None unless with_shading is set.
    """
    tri_pts = []
    tri_normals = []
    tri_handles = []
    for obj in scene.iter_kind(KIND_SHAPE):
        mesh = obj.payload.mesh
        if mesh is None:
            continue
        pose = world_pose(scene, obj.handle)
        rot = np.array(pose.orientation.to_matrix())
        pos = np.array(pose.position)
        verts = mesh.vertices @ rot.T + pos
        tri_pts.append(verts[mesh.faces])
        if with_shading:
            normals = mesh.vertex_normals @ rot.T
            tri_normals.append(normals[mesh.faces])
            tri_handles.append(np.full(len(mesh.faces), obj.handle, dtype=np.int32))
    if not tri_pts:
        empty = np.zeros((0, 3, 3))
        return empty, (empty.copy() if with_shading else None), (
            np.zeros(0, dtype=np.int32) if with_shading else None
        )
    verts = np.concatenate(tri_pts)
    if with_shading:
        return verts, np.concatenate(tri_normals), np.concatenate(tri_handles)
    return verts, None, None


def _clip_near(tri, aux, near):
    """Sutherland-Hodgman clip of one camera-space triangle against z >= near.

    aux is an optional (3, k) per-vertex attribute block, linearly
    interpolated at the clip boundary.  Yields (triangle, aux) tuples.
    """
    inside = tri[:, 2] >= near
    count = int(inside.sum())
    if count == 3:
        yield tri, aux
        return
    if count == 0:
        return
    poly = []
    poly_aux = []
    for i in range(3):
        j = (i + 1) % 3
        a, b = tri[i], tri[j]
        if inside[i]:
            poly.append(a)
            poly_aux.append(None if aux is None else aux[i])
        if inside[i] != inside[j]:
            t = (near - a[2]) / (b[2] - a[2])
            poly.append(a + t * (b - a))
            poly_aux.append(None if aux is None else aux[i] + t * (aux[j] - aux[i]))
    for k in range(1, len(poly) - 1):  # fan triangulation of the clipped polygon
        new_tri = np.array([poly[0], poly[k], poly[k + 1]])
        if aux is None:
            yield new_tri, None
        else:
            yield new_tri, np.array([poly_aux[0], poly_aux[k], poly_aux[k + 1]])


def _raster_perspective(tris_cam, aux, width, height, f, cx, cy, near, far,
                        want_gbuffer):
    """Z-buffer rasterization of camera-space triangles.

    Perspective-correct interpolation; depth is view-axis z.  Returns
    (zbuf, normal buffer, triangle-index buffer); the latter two are None
    unless want_gbuffer.
    """
    zbuf = np.full((height, width), far, dtype=np.float64)
    nbuf = np.zeros((height, width, 3)) if want_gbuffer else None
    ibuf = np.full((height, width), -1, dtype=np.int64) if want_gbuffer else None

    for index in range(len(tris_cam)):
        for tri, tri_aux in _clip_near(
            tris_cam[index], None if aux is None else aux[index], near
        ):
            z = tri[:, 2]
            px = tri[:, 0] / z * f + cx
            py = tri[:, 1] / z * f + cy
            lo_x = max(0, int(math.floor(px.min() - 0.5)))
            hi_x = min(width - 1, int(math.ceil(px.max() - 0.5)))
            lo_y = max(0, int(math.floor(py.min() - 0.5)))
            hi_y = min(height - 1, int(math.ceil(py.max() - 0.5)))
            if lo_x > hi_x or lo_y > hi_y:
                continue
            denom = (px[1] - px[0]) * (py[2] - py[0]) - (px[2] - px[0]) * (py[1] - py[0])
            if abs(denom) < 1e-12:
                continue
            gx = np.arange(lo_x, hi_x + 1) + 0.5
            gy = np.arange(lo_y, hi_y + 1) + 0.5
            sx = gx[None, :] - px[0]
            sy = gy[:, None] - py[0]
            e1x, e1y = px[1] - px[0], py[1] - py[0]
            e2x, e2y = px[2] - px[0], py[2] - py[0]
            b1 = (sx * e2y - sy * e2x) / denom
            b2 = (sy * e1x - sx * e1y) / denom
            b0 = 1.0 - b1 - b2
            mask = (b0 >= 0) & (b1 >= 0) & (b2 >= 0)
            if not mask.any():
                continue
            inv_z = b0 / z[0] + b1 / z[1] + b2 / z[2]
            with np.errstate(divide="ignore"):
                depth = 1.0 / inv_z
            rows, cols = np.nonzero(mask)
            ys = rows + lo_y
            xs = cols + lo_x
            d = depth[rows, cols]
            keep = (d <= far) & (d < zbuf[ys, xs])
            if not keep.any():
                continue
            ys, xs, d = ys[keep], xs[keep], d[keep]
            zbuf[ys, xs] = d
            if want_gbuffer:
                rows, cols = rows[keep], cols[keep]
                w0 = b0[rows, cols] / z[0]
                w1 = b1[rows, cols] / z[1]
                w2 = b2[rows, cols] / z[2]
                total = w0 + w1 + w2
                attr = (
                    w0[:, None] * tri_aux[0]
                    + w1[:, None] * tri_aux[1]
                    + w2[:, None] * tri_aux[2]
                ) / total[:, None]
                nbuf[ys, xs] = attr
                ibuf[ys, xs] = index
    return zbuf, nbuf, ibuf


def _raster_ortho_depth(tris, width, height, x0, x1, y0, y1):
    """Orthographic depth rasterization (directional shadow maps).

    tris are in light space; x/y map linearly onto the viewport, depth is
    light-space z interpolated linearly (no perspective).
    """
    zbuf = np.full((height, width), SHADOW_FAR)
    sx = width / (x1 - x0)
    sy = height / (y1 - y0)
    for tri in tris:
        px = (tri[:, 0] - x0) * sx
        py = (tri[:, 1] - y0) * sy
        z = tri[:, 2]
        lo_x = max(0, int(math.floor(px.min() - 0.5)))
        hi_x = min(width - 1, int(math.ceil(px.max() - 0.5)))
        lo_y = max(0, int(math.floor(py.min() - 0.5)))
        hi_y = min(height - 1, int(math.ceil(py.max() - 0.5)))
        if lo_x > hi_x or lo_y > hi_y:
            continue
        denom = (px[1] - px[0]) * (py[2] - py[0]) - (px[2] - px[0]) * (py[1] - py[0])
        if abs(denom) < 1e-12:
            continue
        gx = np.arange(lo_x, hi_x + 1) + 0.5
        gy = np.arange(lo_y, hi_y + 1) + 0.5
        sxx = gx[None, :] - px[0]
        syy = gy[:, None] - py[0]
        e1x, e1y = px[1] - px[0], py[1] - py[0]
        e2x, e2y = px[2] - px[0], py[2] - py[0]
        b1 = (sxx * e2y - syy * e2x) / denom
        b2 = (syy * e1x - sxx * e1y) / denom
        b0 = 1.0 - b1 - b2
        mask = (b0 >= 0) & (b1 >= 0) & (b2 >= 0)
        if not mask.any():
            continue
        depth = b0 * z[0] + b1 * z[1] + b2 * z[2]
        rows, cols = np.nonzero(mask)
        ys = rows + lo_y
        xs = cols + lo_x
        d = depth[rows, cols]
        keep = d < zbuf[ys, xs]
        zbuf[ys[keep], xs[keep]] = d[keep]
    return zbuf


def _sensor(scene, handle):
    obj = scene.objects.get(handle)
    if obj is None or obj.kind != KIND_VISION_SENSOR:
        raise NotAVisionSensorError(f"handle {handle} is not a vision sensor")
    return obj


def _light(scene, handle):
    obj = scene.objects.get(handle)
    if obj is None or obj.kind != KIND_LIGHT:
        raise NotALightError(f"handle {handle} is not a light")
    return obj


def _camera_frame(scene, handle):
    pose = world_pose(scene, handle)
    rot = np.array(pose.orientation.to_matrix())
    origin = np.array(pose.position)
    return rot, origin


def _to_camera(world_tris, rot, origin):
    return (world_tris - origin) @ rot  # rot columns are camera axes


def capture_depth(scene, sensor_handle):
    obj = _sensor(scene, sensor_handle)
    p = obj.payload
    width, height = p.resolution
    f = (width / 2.0) / math.tan(math.radians(p.fov_deg) / 2.0)
    rot, origin = _camera_frame(scene, sensor_handle)
    world_tris, _, _ = _gather_world_triangles(scene)
    cam_tris = _to_camera(world_tris, rot, origin)
    zbuf, _, _ = _raster_perspective(
        cam_tris, None, width, height, f, width / 2.0, height / 2.0, p.near, p.far,
        want_gbuffer=False,
    )
    return zbuf


def render_shadow_map(scene, light_handle, params=None):
    if params is None:
        params = ShadowParams()
    obj = _light(scene, light_handle)
    kind = obj.payload.light_type
    rot, origin = _camera_frame(scene, light_handle)
    world_tris, _, _ = _gather_world_triangles(scene)
    res = params.resolution

    if kind == "directional":
        # same world-to-light transform the visibility lookup applies
        tris = _to_camera(world_tris, rot, origin)
        if len(tris):
            light_pts = tris.reshape(-1, 3)
            mins = light_pts.min(axis=0) - 1e-3
            maxs = light_pts.max(axis=0) + 1e-3
        else:
            mins = np.array([-1.0, -1.0, 0.0])
            maxs = np.array([1.0, 1.0, 1.0])
        zbuf = _raster_ortho_depth(tris, res, res, mins[0], maxs[0], mins[1], maxs[1])
        span = max(maxs[2] - mins[2], 1e-9)
        data = (zbuf - mins[2]) / span
        extra = {"bounds": (mins, maxs), "span": span}
        return ShadowMap("directional", data, params.bias, (rot, origin), extra)

    if kind == "spot":
        cam_tris = _to_camera(world_tris, rot, origin)
        far = _fit_far(cam_tris, params.near)
        fov = obj.payload.cone_deg
        f = (res / 2.0) / math.tan(math.radians(fov) / 2.0)
        zbuf, _, _ = _raster_perspective(
            cam_tris, None, res, res, f, res / 2.0, res / 2.0, params.near, far,
            want_gbuffer=False,
        )
        data = np.where(zbuf >= far, SHADOW_FAR, (zbuf - params.near) / (far - params.near))
        extra = {
            "f": f,
            "near": params.near,
            "far": far,
            "cos_half_cone": math.cos(math.radians(fov) / 2.0),
        }
        return ShadowMap("spot", data, params.bias, (rot, origin), extra)

    if kind == "point":
        cam_all = _to_camera(world_tris, rot, origin)
        far = _fit_far(cam_all, params.near)
        f = res / 2.0  # 90 degree faces
        faces = np.empty((6, res, res))
        for face in range(6):
            face_tris = _face_space(cam_all, face)
            zbuf, _, _ = _raster_perspective(
                face_tris, None, res, res, f, res / 2.0, res / 2.0, params.near, far,
                want_gbuffer=False,
            )
            faces[face] = np.where(
                zbuf >= far, SHADOW_FAR, (zbuf - params.near) / (far - params.near)
            )
        extra = {"f": f, "near": params.near, "far": far}
        return ShadowMap("point", faces, params.bias, (rot, origin), extra)

    raise NotALightError(f"unknown light type {kind!r}")


def _fit_far(cam_pts, near):
    if len(cam_pts) == 0:
        return near + 1.0
    radius = float(np.linalg.norm(cam_pts.reshape(-1, 3), axis=1).max())
    return max(near * 2.0, radius * 1.05 + 1e-3)


# cube-face bases expressed in light-local axes: +x -x +y -y +z -z
_FACE_AXES = (
    ((0, 0, -1), (0, 1, 0), (1, 0, 0)),
    ((0, 0, 1), (0, 1, 0), (-1, 0, 0)),
    ((1, 0, 0), (0, 0, -1), (0, 1, 0)),
    ((1, 0, 0), (0, 0, 1), (0, -1, 0)),
    ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
    ((-1, 0, 0), (0, 1, 0), (0, 0, -1)),
)


def _face_space(cam_pts, face):
    basis = np.array(_FACE_AXES[face], dtype=float)
    return cam_pts @ basis.T


def _point_face(vec):
    ax = np.abs(vec)
    axis = np.argmax(ax, axis=-1)
    sign = np.take_along_axis(vec, axis[..., None], axis=-1)[..., 0] < 0
    return axis * 2 + sign  # 0:+x 1:-x 2:+y 3:-y 4:+z 5:-z


def shadow_visibility(world_points, normals, light_obj, smap):
    """Hard 0/1 visibility of world points from the light behind `smap`.

    Accepts a single point or an (n, 3) batch; normals are accepted for API
    symmetry with shading but do not enter the depth comparison.
    """
    pts = np.atleast_2d(np.asarray(world_points, dtype=float))
    rot, origin = smap.world_to_light
    local = (pts - origin) @ rot
    res = smap.data.shape[-1]
    vis = np.zeros(len(pts))

    if smap.kind == "directional":
        mins, maxs = smap.extra["bounds"]
        span = smap.extra["span"]
        u = (local[:, 0] - mins[0]) / (maxs[0] - mins[0]) * res
        v = (local[:, 1] - mins[1]) / (maxs[1] - mins[1]) * res
        depth = (local[:, 2] - mins[2]) / span
        inside = (u >= 0) & (u < res) & (v >= 0) & (v < res) & (depth >= -smap.bias)
        iu = np.clip(u.astype(np.int64), 0, res - 1)
        iv = np.clip(v.astype(np.int64), 0, res - 1)
        stored = smap.data[iv, iu]
        vis[inside & (depth <= stored + smap.bias)] = 1.0
    elif smap.kind == "spot":
        z = local[:, 2]
        norm = np.linalg.norm(local, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            cosang = np.where(norm > 0, z / norm, 0.0)
        f = smap.extra["f"]
        near, far = smap.extra["near"], smap.extra["far"]
        front = z >= near
        zz = np.where(front, z, 1.0)
        u = local[:, 0] / zz * f + res / 2.0
        v = local[:, 1] / zz * f + res / 2.0
        depth = (z - near) / (far - near)
        inside = (
            front
            & (cosang >= smap.extra["cos_half_cone"])
            & (u >= 0) & (u < res) & (v >= 0) & (v < res)
        )
        iu = np.clip(u.astype(np.int64), 0, res - 1)
        iv = np.clip(v.astype(np.int64), 0, res - 1)
        stored = smap.data[iv, iu]
        vis[inside & (depth <= stored + smap.bias)] = 1.0
    elif smap.kind == "point":
        faces = _point_face(local)
        f = smap.extra["f"]
        near, far = smap.extra["near"], smap.extra["far"]
        for face in range(6):
            sel = faces == face
            if not sel.any():
                continue
            fp = local[sel] @ np.array(_FACE_AXES[face], dtype=float).T
            z = fp[:, 2]
            front = z >= near
            zz = np.where(front, z, 1.0)
            u = fp[:, 0] / zz * f + res / 2.0
            v = fp[:, 1] / zz * f + res / 2.0
            depth = (z - near) / (far - near)
            iu = np.clip(u.astype(np.int64), 0, res - 1)
            iv = np.clip(v.astype(np.int64), 0, res - 1)
            stored = smap.data[face][iv, iu]
            ok = front & (u >= 0) & (u < res) & (v >= 0) & (v < res)
            out = np.zeros(sel.sum())
            out[ok & (depth <= stored + smap.bias)] = 1.0
            vis[sel] = out
    else:
        raise ValueError(f"unknown shadow map kind {smap.kind!r}")

    if np.ndim(world_points) == 1:
        return float(vis[0])
    return vis


def capture_rgb(scene, sensor_handle, lights=None, shadows=True, clamp=True,
                shadow_params=None):
    """Lambertian render through a vision sensor.

    lights narrows shading to a subset of light handles (None = all); shadows
    and clamp exist so tests can probe superposition pre-clamp.
    """
    obj = _sensor(scene, sensor_handle)
    p = obj.payload
    width, height = p.resolution
    f = (width / 2.0) / math.tan(math.radians(p.fov_deg) / 2.0)
    cx, cy = width / 2.0, height / 2.0
    rot, origin = _camera_frame(scene, sensor_handle)

    world_tris, tri_normals, tri_handles = _gather_world_triangles(scene, with_shading=True)
    cam_tris = _to_camera(world_tris, rot, origin)
    zbuf, nbuf, ibuf = _raster_perspective(
        cam_tris, tri_normals, width, height, f, cx, cy, p.near, p.far,
        want_gbuffer=True,
    )

    image = np.zeros((height, width, 3))
    mask = ibuf >= 0
    if not mask.any():
        return image
    ys, xs = np.nonzero(mask)
    depth = zbuf[ys, xs]
    # exact world positions from per-pixel rays; no interpolation error
    dir_cam = np.stack(
        [(xs + 0.5 - cx) / f, (ys + 0.5 - cy) / f, np.ones(len(xs))], axis=1
    )
    points = origin + (dir_cam * depth[:, None]) @ rot.T
    normals = nbuf[ys, xs]
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / np.where(norms > 0, norms, 1.0)

    shapes = list(scene.iter_kind(KIND_SHAPE))
    lut = np.zeros((max(s.handle for s in shapes) + 1, 3))
    for shape in shapes:
        lut[shape.handle] = shape.payload.color
    albedo = lut[tri_handles[ibuf[ys, xs]]]

    shade = np.full((len(xs), 3), scene.ambient)
    for light in scene.iter_kind(KIND_LIGHT):
        if lights is not None and light.handle not in lights:
            continue
        lp = light.payload
        lrot, lorigin = _camera_frame(scene, light.handle)
        if lp.light_type == "directional":
            ldir = -lrot[:, 2]  # from surface toward the light
            ndotl = normals @ ldir
            cone = np.ones(len(xs))
        else:
            to_light = lorigin - points
            dist = np.linalg.norm(to_light, axis=1, keepdims=True)
            ldirs = to_light / np.where(dist > 0, dist, 1.0)
            ndotl = np.einsum("ij,ij->i", normals, ldirs)
            if lp.light_type == "spot":
                cos_half = math.cos(math.radians(lp.cone_deg) / 2.0)
                axis = lrot[:, 2]
                cosang = -(ldirs @ axis)
                cone = (cosang >= cos_half).astype(float)
            else:
                cone = np.ones(len(xs))
        ndotl = np.maximum(ndotl, 0.0)
        if shadows:
            smap = render_shadow_map(scene, light.handle, shadow_params)
            vis = shadow_visibility(points, normals, light, smap)
        else:
            vis = 1.0
        shade = shade + (vis * cone * ndotl)[:, None] * np.asarray(lp.color, dtype=float)

    colors = albedo * shade
    if clamp:
        colors = np.clip(colors, 0.0, 1.0)
    image[ys, xs] = colors
    return image


# --- image quantization and debug dumps -------------------------------------


def quantize_u8(rgb):
    """Float image in [0, 1] to uint8, the encoding used on the wire."""
    return np.clip(np.rint(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path, rgb):
    """Binary PPM (P6, maxval 255) from a float image in [0, 1]."""
    data = quantize_u8(rgb)
    height, width = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_pgm(path, depth, near, far):
    """Binary PGM (P5, 16-bit big-endian); [near, far] maps to [0, 65535]."""
    depth = np.asarray(depth)
    scaled = (depth - near) / (far - near) * 65535.0
    data = np.clip(np.rint(scaled), 0, 65535).astype(">u2")
    height, width = depth.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def read_ppm(path):
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P6":
            raise ValueError("not a binary PPM file")
        width, height = map(int, fh.readline().split())
        maxval = int(fh.readline())
        raw = fh.read(width * height * 3)
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return arr.astype(float) / maxval


def read_pgm(path, near, far):
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError("not a binary PGM file")
        width, height = map(int, fh.readline().split())
        maxval = int(fh.readline())
        raw = fh.read(width * height * 2)
    arr = np.frombuffer(raw, dtype=">u2").reshape(height, width).astype(float)
    return arr / maxval * (far - near) + near
