"""Procedural watertight test shapes: icosphere, box, capped cylinder.

These double as pipeline fixtures and as analytic ground truth for distance
and sampling tests, so the generators favor exactness (shared vertices,
consistent winding) over mesh quality.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import TriangleMesh


def icosphere(radius: float = 0.15, subdivisions: int = 3) -> TriangleMesh:
    """Subdivided icosahedron with all vertices on the sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    midpoint_cache: dict[tuple[int, int], int] = {}

    def midpoint(i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        if key not in midpoint_cache:
            m = np.array(verts[i]) + np.array(verts[j])
            m /= np.linalg.norm(m)
            verts.append(tuple(m))
            midpoint_cache[key] = len(verts) - 1
        return midpoint_cache[key]

    for _ in range(subdivisions):
        next_faces = []
        for i, j, k in faces:
            ij, jk, ki = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            next_faces += [(i, ij, ki), (j, jk, ij), (k, ki, jk), (ij, jk, ki)]
        faces = next_faces

    v = np.array(verts) * radius
    return TriangleMesh.from_arrays(v, np.array(faces, dtype=np.int64))


def box(extents: tuple[float, float, float] = (0.2, 0.2, 0.2)) -> TriangleMesh:
    """Axis-aligned box centered at the origin."""
    ex, ey, ez = (e / 2.0 for e in extents)
    v = np.array(
        [
            [-ex, -ey, -ez], [ex, -ey, -ez], [ex, ey, -ez], [-ex, ey, -ez],
            [-ex, -ey, ez], [ex, -ey, ez], [ex, ey, ez], [-ex, ey, ez],
        ]
    )
    quads = [
        (0, 3, 2, 1),  # -z
        (4, 5, 6, 7),  # +z
        (0, 1, 5, 4),  # -y
        (2, 3, 7, 6),  # +y
        (1, 2, 6, 5),  # +x
        (0, 4, 7, 3),  # -x
    ]
    faces = []
    for a, b, c, d in quads:
        faces += [(a, b, c), (a, c, d)]
    return TriangleMesh.from_arrays(v, np.array(faces, dtype=np.int64))


def cylinder(radius: float = 0.15, height: float = 0.3, segments: int = 48) -> TriangleMesh:
    """Capped cylinder along z, centered at the origin."""
    ang = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1) * radius
    lo = np.column_stack([ring, np.full(segments, -height / 2.0)])
    hi = np.column_stack([ring, np.full(segments, height / 2.0)])
    centers = np.array([[0.0, 0.0, -height / 2.0], [0.0, 0.0, height / 2.0]])
    v = np.vstack([lo, hi, centers])
    c_lo, c_hi = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [(i, j, segments + i), (j, segments + j, segments + i)]  # wall
        faces.append((c_lo, j, i))  # bottom fan, wound to face -z
        faces.append((c_hi, segments + i, segments + j))  # top fan, +z
    return TriangleMesh.from_arrays(v, np.array(faces, dtype=np.int64))


def write_obj(mesh: TriangleMesh, path: str | Path) -> Path:
    """Write a mesh as OBJ (full float precision, round-trip exact)."""
    path = Path(path)
    lines = [f"v {float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    path.write_text("\n".join(lines) + "\n")
    return path
