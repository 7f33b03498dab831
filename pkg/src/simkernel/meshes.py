"""Primitive tessellation.

Shapes are turned into triangle meshes once, at scene load, with fixed
vertex counts so renders are reproducible: box = 12 triangles, plane = 2,
sphere = 1280 (icosahedron subdivided 3 times).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPHERE_SUBDIVISIONS = 3


@dataclass
class MeshData:
    """Triangle mesh in the owning object's local frame."""

    vertices: np.ndarray  # (N, 3) float64
    faces: np.ndarray  # (M, 3) int32, counter-clockwise
    vertex_normals: np.ndarray  # (N, 3) float64, unit


def box_mesh(size) -> MeshData:
    """Axis-aligned box centred on the origin; ``size`` = full extents."""
    hx, hy, hz = size[0] / 2.0, size[1] / 2.0, size[2] / 2.0
    verts = []
    normals = []
    faces = []
    # (normal axis, sign) per face; 4 verts per face keep normals flat
    for axis, sign in ((0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1)):
        n = np.zeros(3)
        n[axis] = sign
        u = np.zeros(3)
        v = np.zeros(3)
        u[(axis + 1) % 3] = 1.0
        v[(axis + 2) % 3] = 1.0
        half = np.array([hx, hy, hz])
        centre = n * half
        base = len(verts)
        for su, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            verts.append(centre + su * u * half + sv * v * half)
            normals.append(n)
        if sign > 0:
            faces.append((base, base + 1, base + 2))
            faces.append((base, base + 2, base + 3))
        else:
            faces.append((base, base + 2, base + 1))
            faces.append((base, base + 3, base + 2))
    return MeshData(
        vertices=np.array(verts, dtype=np.float64),
        faces=np.array(faces, dtype=np.int32),
        vertex_normals=np.array(normals, dtype=np.float64),
    )


def plane_mesh(size) -> MeshData:
    """Rectangle in the local xy-plane, normal +z; ``size`` = (x, y) extents."""
    hx, hy = size[0] / 2.0, size[1] / 2.0
    verts = np.array(
        [[-hx, -hy, 0.0], [hx, -hy, 0.0], [hx, hy, 0.0], [-hx, hy, 0.0]],
        dtype=np.float64,
    )
    faces = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    normals = np.tile(np.array([0.0, 0.0, 1.0]), (4, 1))
    return MeshData(verts, faces, normals)


def sphere_mesh(radius: float, subdivisions: int = SPHERE_SUBDIVISIONS) -> MeshData:
    """Icosphere: 20 * 4**subdivisions triangles, vertices exactly on the sphere."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    verts = [np.asarray(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    for _ in range(subdivisions):
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            idx = midpoint_cache.get(key)
            if idx is None:
                m = verts[i] + verts[j]
                m /= np.linalg.norm(m)
                verts.append(m)
                idx = len(verts) - 1
                midpoint_cache[key] = idx
            return idx

        new_faces = []
        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces

    unit = np.array(verts, dtype=np.float64)
    return MeshData(
        vertices=unit * radius,
        faces=np.array(faces, dtype=np.int32),
        vertex_normals=unit.copy(),
    )
