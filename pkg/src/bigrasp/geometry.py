"""Triangle-mesh geometry: loading, surface sampling, neighborhoods, dilated
convex hulls, exact signed distance, and concavity scoring.

Conventions:
    All lengths are meters. Triangles wind counter-clockwise seen from
    outside; loaders reorient the whole mesh if its signed volume comes out
    negative. Signed distance is negative inside the surface. Sample normals
    point outward; the inward contact normal used elsewhere is the negation.

Signed distance uses exact point-to-triangle projection with angle-weighted
pseudonormals for the inside/outside test, which is why open meshes are
rejected at load instead of repaired: without a closed, consistently
oriented surface the sign is meaningless and every collision term downstream
would silently break.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .seeding import rng_from

# Meshes up to this many faces take the flat vectorized scan; larger ones go
# through centroid-tree candidate pruning with an exactness recheck.
_BRUTE_FORCE_FACES = 2048
_QUERY_CHUNK = 256

# Vertex displacement for hull dilation is capped at 5x the offset to keep
# needle-sharp corners from shooting vertices to infinity.
_DILATION_ALIGN_FLOOR = 0.2

# Faces meeting flatter than this share shading normals; sharper dihedrals
# (box edges, cylinder rims) keep a crease.
_SMOOTH_DOT = np.cos(np.radians(40.0))


class MeshError(ValueError):
    """Raised for unreadable, open, or degenerate mesh input."""


@dataclass
class TriangleMesh:
    """Closed triangle surface with derived quantities precomputed.

    Instances are immutable by convention once constructed and safe to share
    across worker processes. Use :meth:`from_arrays` instead of the bare
    constructor so validation and derived-array setup run.
    """

    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64, CCW outward
    face_normals: np.ndarray = field(default=None, repr=False)
    face_areas: np.ndarray = field(default=None, repr=False)

    # pseudonormal tables for the signed-distance sign test
    _vertex_normals: np.ndarray = field(default=None, repr=False)
    _edge_normals: np.ndarray = field(default=None, repr=False)
    _face_edge_index: np.ndarray = field(default=None, repr=False)
    _corner_normals: np.ndarray = field(default=None, repr=False)
    _centroids: np.ndarray = field(default=None, repr=False)
    _tri_radius: np.ndarray = field(default=None, repr=False)
    _centroid_tree: cKDTree = field(default=None, repr=False)

    @classmethod
    def from_arrays(cls, vertices: np.ndarray, triangles: np.ndarray) -> "TriangleMesh":
        """Validate and build a mesh from raw arrays.

        Checks index ranges, degenerate faces, and watertightness (every
        undirected edge shared by exactly two consistently wound faces), and
        flips the global orientation if the signed volume is negative.
        """
        v = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(triangles, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3 or t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("expected (V,3) vertices and (T,3) triangles")
        if len(t) == 0:
            raise MeshError("mesh has no faces")
        if t.min() < 0 or t.max() >= len(v):
            raise MeshError("triangle index out of range")
        if np.any(t[:, 0] == t[:, 1]) or np.any(t[:, 1] == t[:, 2]) or np.any(t[:, 0] == t[:, 2]):
            raise MeshError("triangle with repeated vertex")

        a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        cross = np.cross(b - a, c - a)
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        if np.any(areas < 1e-15):
            raise MeshError("zero-area triangle")

        # orientation: signed volume must be positive for outward winding
        volume = np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0
        if volume < 0.0:
            t = t[:, [0, 2, 1]].copy()
            a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
            cross = np.cross(b - a, c - a)

        mesh = cls(vertices=v, triangles=t)
        mesh.face_areas = areas
        mesh.face_normals = cross / np.linalg.norm(cross, axis=1, keepdims=True)
        mesh._build_edges()
        mesh._build_vertex_normals()
        mesh._build_corner_normals()
        mesh._centroids = (a + b + c) / 3.0
        mesh._tri_radius = np.maximum(
            np.linalg.norm(a - mesh._centroids, axis=1),
            np.maximum(
                np.linalg.norm(b - mesh._centroids, axis=1),
                np.linalg.norm(c - mesh._centroids, axis=1),
            ),
        )
        mesh._centroid_tree = cKDTree(mesh._centroids)
        return mesh

    def _build_edges(self) -> None:
        """Index undirected edges and reject open or inconsistent meshes."""
        t = self.triangles
        # directed edges per face slot: (v0,v1), (v1,v2), (v2,v0)
        heads = np.stack([t[:, 0], t[:, 1], t[:, 2]], axis=1).ravel()
        tails = np.stack([t[:, 1], t[:, 2], t[:, 0]], axis=1).ravel()
        lo = np.minimum(heads, tails)
        hi = np.maximum(heads, tails)
        keys = lo * len(self.vertices) + hi
        uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
        if np.any(counts != 2):
            raise MeshError("mesh is not closed: edge not shared by exactly 2 faces")
        # consistent winding: each undirected edge appears once per direction
        forward = heads < tails
        dir_sum = np.zeros(len(uniq), dtype=np.int64)
        np.add.at(dir_sum, inverse, np.where(forward, 1, -1))
        if np.any(dir_sum != 0):
            raise MeshError("inconsistent triangle winding")
        self._face_edge_index = inverse.reshape(-1, 3)

        face_ids = np.repeat(np.arange(len(t)), 3)
        edge_n = np.zeros((len(uniq), 3))
        np.add.at(edge_n, inverse, self.face_normals[face_ids])
        self._edge_normals = edge_n  # unnormalized; only the sign of a dot is used

    def _build_vertex_normals(self) -> None:
        """Angle-weighted pseudonormals per vertex."""
        t = self.triangles
        v = self.vertices
        out = np.zeros_like(v)
        for k in range(3):
            p = v[t[:, k]]
            u1 = v[t[:, (k + 1) % 3]] - p
            u2 = v[t[:, (k + 2) % 3]] - p
            u1 /= np.linalg.norm(u1, axis=1, keepdims=True)
            u2 /= np.linalg.norm(u2, axis=1, keepdims=True)
            angle = np.arccos(np.clip(np.einsum("ij,ij->i", u1, u2), -1.0, 1.0))
            np.add.at(out, t[:, k], angle[:, None] * self.face_normals)
        self._vertex_normals = out

    def _build_corner_normals(self) -> None:
        """Shading normals per face corner, split at sharp creases.

        A corner averages the angle-weighted normals of the faces around its
        vertex, but only over faces within _SMOOTH_DOT of the owning face's
        normal, so curved regions shade smoothly while each side of a crease
        (a box edge, a cylinder rim) keeps its own flat normal.
        """
        t = self.triangles
        v = self.vertices
        n_inc = t.size  # one incidence per (face, corner slot)
        face_of = np.repeat(np.arange(len(t)), 3)
        vert_of = t.ravel()
        slot_of = np.tile(np.arange(3), len(t))
        weight = np.empty(n_inc)
        for k in range(3):
            p = v[t[:, k]]
            u1 = v[t[:, (k + 1) % 3]] - p
            u2 = v[t[:, (k + 2) % 3]] - p
            u1 /= np.linalg.norm(u1, axis=1, keepdims=True)
            u2 /= np.linalg.norm(u2, axis=1, keepdims=True)
            weight[slot_of == k] = np.arccos(
                np.clip(np.einsum("ij,ij->i", u1, u2), -1.0, 1.0)
            )

        order = np.argsort(vert_of, kind="stable")
        deg = np.bincount(vert_of, minlength=len(v))
        seg_start = np.concatenate([[0], np.cumsum(deg)[:-1]])
        # expand every incidence against its vertex's whole face fan
        rep = deg[vert_of[order]]
        i_idx = np.repeat(order, rep)
        within = np.arange(rep.sum()) - np.repeat(np.cumsum(rep) - rep, rep)
        j_idx = order[np.repeat(seg_start[vert_of[order]], rep) + within]
        keep = (
            np.einsum(
                "ij,ij->i", self.face_normals[face_of[i_idx]], self.face_normals[face_of[j_idx]]
            )
            >= _SMOOTH_DOT
        )
        accum = np.zeros((n_inc, 3))
        np.add.at(
            accum,
            i_idx[keep],
            weight[j_idx[keep]][:, None] * self.face_normals[face_of[j_idx[keep]]],
        )
        norms = np.linalg.norm(accum, axis=1, keepdims=True)
        flat = norms[:, 0] < 1e-12
        if np.any(flat):
            accum[flat] = self.face_normals[face_of[flat]]
            norms[flat] = 1.0
        self._corner_normals = (accum / norms).reshape(len(t), 3, 3)

    # -- basic measures ----------------------------------------------------

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    @property
    def centroid(self) -> np.ndarray:
        """Volume centroid (divergence theorem over the closed surface)."""
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        vols = np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0
        total = vols.sum()
        if abs(total) < 1e-15:
            return self.vertices.mean(axis=0)
        return (vols[:, None] * (a + b + c) / 4.0).sum(axis=0) / total

    def scaled(self, factor: float) -> "TriangleMesh":
        if factor <= 0.0:
            raise MeshError("scale factor must be positive")
        return TriangleMesh.from_arrays(self.vertices * factor, self.triangles)

    # -- distance queries --------------------------------------------------

    def closest_surface(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Signed distance, closest surface point, and outward direction.

        Parameters
        ----------
        points : (N, 3) query positions.

        Returns
        -------
        sdf : (N,) signed distances, negative inside.
        closest : (N, 3) closest points on the surface.
        outward : (N, 3) unit directions of increasing signed distance
            (the face normal of the closest feature when the query sits
            exactly on the surface).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = len(pts)
        sdf = np.empty(n)
        closest = np.empty((n, 3))
        outward = np.empty((n, 3))
        for start in range(0, n, _QUERY_CHUNK):
            sl = slice(start, min(start + _QUERY_CHUNK, n))
            self._query_chunk(pts[sl], sdf[sl], closest[sl], outward[sl])
        return sdf, closest, outward

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return self.closest_surface(points)[0]

    def closest_surface_frames(
        self, points: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """closest_surface with shading normals and their spatial derivative.

        Returns (sdf, closest, normal, jac). The normal interpolates the
        crease-aware corner normals at the closest point instead of taking
        the raw step direction, so it varies smoothly as the closest point
        slides across triangulated curvature and stays exactly flat over
        planar faces; creases sharper than the shading threshold still flip
        it when the closest point crosses them. jac (N, 3, 3) holds
        d(normal)/d(query point); queries pinned to a vertex feature see a
        locally constant closest point and report zero.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = len(pts)
        sdf = np.empty(n)
        closest = np.empty((n, 3))
        outward = np.empty((n, 3))
        feat = np.empty((n, 2), dtype=np.int64)
        for start in range(0, n, _QUERY_CHUNK):
            sl = slice(start, min(start + _QUERY_CHUNK, n))
            self._query_chunk(pts[sl], sdf[sl], closest[sl], outward[sl], feat[sl])

        tri = self.triangles[feat[:, 0]]
        va = self.vertices[tri[:, 0]]
        v0 = self.vertices[tri[:, 1]] - va
        v1 = self.vertices[tri[:, 2]] - va
        d00 = np.einsum("ij,ij->i", v0, v0)
        d01 = np.einsum("ij,ij->i", v0, v1)
        d11 = np.einsum("ij,ij->i", v1, v1)
        denom = d00 * d11 - d01 * d01
        safe = np.where(denom > 1e-30, denom, 1.0)
        rel = closest - va
        r0 = np.einsum("ij,ij->i", rel, v0)
        r1 = np.einsum("ij,ij->i", rel, v1)
        lam1 = (d11 * r0 - d01 * r1) / safe
        lam2 = (d00 * r1 - d01 * r0) / safe
        lam = np.stack([1.0 - lam1 - lam2, lam1, lam2], axis=1)

        cn = self._corner_normals[feat[:, 0]]  # (N, corner, 3)
        raw = np.einsum("nk,nkj->nj", lam, cn)
        length = np.linalg.norm(raw, axis=1)
        bad = length < 1e-12
        if np.any(bad):
            raw[bad] = self.face_normals[feat[bad, 0]]
            length[bad] = 1.0
        normal = raw / length[:, None]

        # barycentric gradients wrt the closest point, constant per triangle;
        # they sum to zero, so coplanar corner fans cancel exactly
        g2 = (d11[:, None] * v0 - d01[:, None] * v1) / safe[:, None]
        g3 = (d00[:, None] * v1 - d01[:, None] * v0) / safe[:, None]
        g1 = -g2 - g3
        dn_dc = (
            cn[:, 0, :, None] * g1[:, None, :]
            + cn[:, 1, :, None] * g2[:, None, :]
            + cn[:, 2, :, None] * g3[:, None, :]
        )

        # the closest point tracks the query only along its support feature
        reg = feat[:, 1]
        p_feat = np.zeros((n, 3, 3))
        face = reg == 0
        if np.any(face):
            f = self.face_normals[feat[face, 0]]
            p_feat[face] = np.eye(3) - f[:, :, None] * f[:, None, :]
        edge_rows = np.flatnonzero(reg >= 4)
        if len(edge_rows):
            slot = reg[edge_rows] - 4  # 4/5/6: edges ab, bc, ca
            tri_e = tri[edge_rows]
            ar = np.arange(len(edge_rows))
            e = self.vertices[tri_e[ar, (slot + 1) % 3]] - self.vertices[tri_e[ar, slot]]
            e /= np.linalg.norm(e, axis=1, keepdims=True)
            p_feat[edge_rows] = e[:, :, None] * e[:, None, :]

        proj = (np.eye(3) - normal[:, :, None] * normal[:, None, :]) / length[:, None, None]
        jac = proj @ dn_dc @ p_feat
        jac[denom <= 1e-30] = 0.0
        return sdf, closest, normal, jac

    def _query_chunk(self, pts, sdf_out, cp_out, dir_out, feat_out=None) -> None:
        ntri = len(self.triangles)
        if ntri <= _BRUTE_FORCE_FACES:
            cand = np.broadcast_to(np.arange(ntri), (len(pts), ntri))
            self._exact_over(pts, cand, sdf_out, cp_out, dir_out, feat_out)
            return
        # candidate pruning: nearest centroids first, then enlarge until the
        # bounding-sphere lower bound proves no better triangle exists; only
        # points whose bound fails graduate to the next candidate budget
        k = 16
        r_max = float(self._tri_radius.max())
        alive = np.arange(len(pts))
        while True:
            kk = min(k, ntri)
            dist_c, cand = self._centroid_tree.query(pts[alive], k=kk)
            sub_sdf = np.empty(len(alive))
            sub_cp = np.empty((len(alive), 3))
            sub_dir = np.empty((len(alive), 3))
            sub_feat = None if feat_out is None else np.empty((len(alive), 2), dtype=np.int64)
            self._exact_over(pts[alive], cand, sub_sdf, sub_cp, sub_dir, sub_feat)
            sdf_out[alive] = sub_sdf
            cp_out[alive] = sub_cp
            dir_out[alive] = sub_dir
            if feat_out is not None:
                feat_out[alive] = sub_feat
            if kk >= ntri:
                return
            alive = alive[dist_c[:, -1] - r_max < np.abs(sub_sdf)]
            if not len(alive):
                return
            k *= 4

    def _exact_over(self, pts, cand, sdf_out, cp_out, dir_out, feat_out=None) -> None:
        """Exact closest point over candidate triangle sets (N, K)."""
        tri = self.triangles[cand]  # (N, K, 3)
        a = self.vertices[tri[..., 0]]
        b = self.vertices[tri[..., 1]]
        c = self.vertices[tri[..., 2]]
        p = pts[:, None, :]
        cp, region = _closest_point_triangle(p, a, b, c)
        d2 = np.einsum("nkj,nkj->nk", p - cp, p - cp)
        best = np.argmin(d2, axis=1)
        rows = np.arange(len(pts))
        cp_best = cp[rows, best]
        tri_best = cand[rows, best]
        reg_best = region[rows, best]

        pseudo = self._pseudonormal(tri_best, reg_best)
        delta = pts - cp_best
        dist = np.sqrt(d2[rows, best])
        inside = np.einsum("ij,ij->i", delta, pseudo) < 0.0
        sdf_out[:] = np.where(inside, -dist, dist)
        cp_out[:] = cp_best
        with np.errstate(invalid="ignore", divide="ignore"):
            direction = delta / dist[:, None]
        direction = np.where(inside[:, None], -direction, direction)
        # face-interior features: the quotient equals the face normal up to
        # rounding, so use the normal itself (exact on planar faces)
        face_feat = reg_best == 0
        if np.any(face_feat):
            direction[face_feat] = self.face_normals[tri_best[face_feat]]
        # on-surface edge and vertex queries fall back to the face normal
        degenerate = dist < 1e-12
        if np.any(degenerate):
            direction[degenerate] = self.face_normals[tri_best[degenerate]]
        dir_out[:] = direction
        if feat_out is not None:
            feat_out[:, 0] = tri_best
            feat_out[:, 1] = reg_best

    def _pseudonormal(self, tri_idx: np.ndarray, region: np.ndarray) -> np.ndarray:
        """Pseudonormal of the closest feature (face, edge, or vertex)."""
        out = self.face_normals[tri_idx].copy()
        vert_mask = (region >= 1) & (region <= 3)
        if np.any(vert_mask):
            local = region[vert_mask] - 1
            vids = self.triangles[tri_idx[vert_mask], local]
            out[vert_mask] = self._vertex_normals[vids]
        edge_mask = region >= 4
        if np.any(edge_mask):
            slot = region[edge_mask] - 4
            eids = self._face_edge_index[tri_idx[edge_mask], slot]
            out[edge_mask] = self._edge_normals[eids]
        return out


def _closest_point_triangle(p, a, b, c):
    """Vectorized exact closest point on triangles.

    Region codes: 0 face interior, 1/2/3 vertex a/b/c, 4/5/6 edge ab/bc/ca.
    Later assignments overwrite earlier ones, so masks are applied face
    first and vertices last to give boundary features precedence.
    """
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("...j,...j->...", ab, ap)
    d2 = np.einsum("...j,...j->...", ac, ap)
    bp = p - b
    d3 = np.einsum("...j,...j->...", ab, bp)
    d4 = np.einsum("...j,...j->...", ac, bp)
    cpv = p - c
    d5 = np.einsum("...j,...j->...", ab, cpv)
    d6 = np.einsum("...j,...j->...", ac, cpv)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    def _safe_div(num, den):
        return num / np.where(np.abs(den) < 1e-300, 1.0, den)

    region = np.zeros(p.shape[:-1], dtype=np.int8)
    denom = _safe_div(np.ones_like(va), va + vb + vc)
    v = vb * denom
    w = vc * denom
    cp = a + ab * v[..., None] + ac * w[..., None]

    m = (va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0)  # edge bc
    t = _safe_div(d4 - d3, (d4 - d3) + (d5 - d6))
    cp = np.where(m[..., None], b + t[..., None] * (c - b), cp)
    region = np.where(m, np.int8(5), region)

    m = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)  # edge ca
    t = _safe_div(d2, d2 - d6)
    cp = np.where(m[..., None], a + t[..., None] * ac, cp)
    region = np.where(m, np.int8(6), region)

    m = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)  # edge ab
    t = _safe_div(d1, d1 - d3)
    cp = np.where(m[..., None], a + t[..., None] * ab, cp)
    region = np.where(m, np.int8(4), region)

    m = (d6 >= 0.0) & (d5 <= d6)  # vertex c
    cp = np.where(m[..., None], c, cp)
    region = np.where(m, np.int8(3), region)

    m = (d3 >= 0.0) & (d4 <= d3)  # vertex b
    cp = np.where(m[..., None], b, cp)
    region = np.where(m, np.int8(2), region)

    m = (d1 <= 0.0) & (d2 <= 0.0)  # vertex a
    cp = np.where(m[..., None], a, cp)
    region = np.where(m, np.int8(1), region)
    return cp, region


@dataclass
class SurfaceSamples:
    """Area-weighted surface point set with outward normals."""

    points: np.ndarray  # (N, 3)
    normals: np.ndarray  # (N, 3) outward unit
    face_indices: np.ndarray  # (N,)
    seed: int

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class Region:
    """Neighborhood of an anchor sample: candidate grasping patch."""

    anchor_index: int
    member_indices: np.ndarray
    mean_position: np.ndarray
    mean_normal: np.ndarray  # outward, unit


# -- loading ---------------------------------------------------------------


def _parse_obj(text: str) -> tuple[np.ndarray, np.ndarray]:
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(tok.split("/")[0]) for tok in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts or not faces:
        raise MeshError("no geometry found in OBJ")
    return np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64)


def _parse_stl(raw: bytes) -> tuple[np.ndarray, np.ndarray]:
    tris: np.ndarray
    if len(raw) >= 84:
        (count,) = struct.unpack_from("<I", raw, 80)
        if len(raw) == 84 + 50 * count:
            body = np.frombuffer(raw, dtype=np.uint8, offset=84).reshape(count, 50)
            floats = body[:, :48].copy().view("<f4").reshape(count, 4, 3)
            tris = floats[:, 1:4, :].astype(np.float64)
            return _merge_stl_vertices(tris)
    text = raw.decode("ascii", errors="replace")
    coords: list[list[float]] = []
    for line in text.splitlines():
        parts = line.split()
        if parts and parts[0] == "vertex":
            coords.append([float(x) for x in parts[1:4]])
    if not coords or len(coords) % 3 != 0:
        raise MeshError("malformed STL")
    tris = np.array(coords, dtype=np.float64).reshape(-1, 3, 3)
    return _merge_stl_vertices(tris)


def _merge_stl_vertices(tris: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # exact-coordinate merge recovers shared topology from triangle soup
    flat = tris.reshape(-1, 3)
    verts, inverse = np.unique(flat, axis=0, return_inverse=True)
    return verts, inverse.reshape(-1, 3).astype(np.int64)


def load_mesh(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read raw (vertices, triangles) from an OBJ or STL file."""
    path = Path(path)
    if not path.is_file():
        raise MeshError(f"mesh file not found: {path}")
    suffix = path.suffix.lower()
    try:
        if suffix == ".obj":
            return _parse_obj(path.read_text())
        if suffix == ".stl":
            return _parse_stl(path.read_bytes())
    except MeshError:
        raise
    except Exception as exc:
        raise MeshError(f"failed to parse {path}: {exc}") from exc
    raise MeshError(f"unsupported mesh format: {path.suffix}")


def sample_surface(mesh: TriangleMesh, n_points: int, seed: int) -> SurfaceSamples:
    """Area-weighted surface samples, deterministic for a fixed seed."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    rng = rng_from("surface", seed)
    weights = mesh.face_areas / mesh.face_areas.sum()
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    faces = np.searchsorted(cdf, rng.random(n_points), side="right")
    faces = np.minimum(faces, len(cdf) - 1)
    u = rng.random(n_points)
    v = rng.random(n_points)
    flip = u + v > 1.0  # reflect off-triangle draws back inside
    u = np.where(flip, 1.0 - u, u)
    v = np.where(flip, 1.0 - v, v)
    a = mesh.vertices[mesh.triangles[faces, 0]]
    b = mesh.vertices[mesh.triangles[faces, 1]]
    c = mesh.vertices[mesh.triangles[faces, 2]]
    points = a + u[:, None] * (b - a) + v[:, None] * (c - a)
    return SurfaceSamples(
        points=points,
        normals=mesh.face_normals[faces].copy(),
        face_indices=faces,
        seed=seed,
    )


def load_and_sample(
    path: str | Path, scale: float, n_points: int, seed: int
) -> tuple[TriangleMesh, SurfaceSamples]:
    """Load a mesh, scale it (meters per model unit), and sample its surface."""
    if scale <= 0.0:
        raise MeshError("scale must be positive")
    verts, tris = load_mesh(path)
    mesh = TriangleMesh.from_arrays(verts * scale, tris)
    return mesh, sample_surface(mesh, n_points, seed)


# -- point-set operations --------------------------------------------------


def farthest_point_sample(samples: SurfaceSamples, k: int, start_index: int = 0) -> np.ndarray:
    """Greedy max-min subset selection over sample points.

    Each pick maximizes the minimum distance to the already selected set;
    ties resolve to the lowest index via argmax.
    """
    points = samples.points
    n = len(points)
    if k > n:
        raise ValueError(f"cannot select {k} anchors from {n} samples")
    if not 0 <= start_index < n:
        raise ValueError("start_index out of range")
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = start_index
    min_d2 = np.einsum("ij,ij->i", points - points[start_index], points - points[start_index])
    for i in range(1, k):
        nxt = int(np.argmax(min_d2))
        chosen[i] = nxt
        d2 = np.einsum("ij,ij->i", points - points[nxt], points - points[nxt])
        np.minimum(min_d2, d2, out=min_d2)
    return chosen


def region_of(
    samples: SurfaceSamples, anchor_index: int, radius: float = 0.08, k_max: int = 256
) -> Region:
    """Up-to-k_max nearest samples within radius of the anchor."""
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    if not 0 <= anchor_index < len(samples):
        raise ValueError("anchor index out of range")
    anchor = samples.points[anchor_index]
    d2 = np.einsum("ij,ij->i", samples.points - anchor, samples.points - anchor)
    within = np.flatnonzero(d2 <= radius * radius)
    order = within[np.lexsort((within, d2[within]))]
    members = order[:k_max]
    normal = samples.normals[members].sum(axis=0)
    norm = np.linalg.norm(normal)
    if norm < 1e-12:
        normal = samples.normals[anchor_index].copy()
    else:
        normal = normal / norm
    return Region(
        anchor_index=int(anchor_index),
        member_indices=members,
        mean_position=samples.points[members].mean(axis=0),
        mean_normal=normal,
    )


def dilated_convex_hull(points: np.ndarray | SurfaceSamples, offset: float) -> TriangleMesh:
    """Convex hull with every face pushed outward by at least ``offset``.

    Each hull vertex displaces by the minimum-norm solution of "move every
    adjacent face plane outward by exactly the offset"; consistent systems
    (planar-faced solids) solve exactly, so flat faces stay flat and parallel
    to the originals. Inconsistent systems (smooth vertices) are rescaled so
    no adjacent plane displaces by less than the offset, then the moved set
    is re-hulled to guarantee convexity.
    """
    if isinstance(points, SurfaceSamples):
        points = points.points
    pts = np.asarray(points, dtype=np.float64)
    if offset < 0.0:
        raise ValueError("offset must be non-negative")
    try:
        hull = ConvexHull(pts)
    except Exception as exc:
        raise MeshError(f"degenerate point set for hull: {exc}") from exc

    if offset > 0.0:
        normals = hull.equations[:, :3]  # outward unit normals per facet
        vert_ids = hull.vertices
        target = offset
        moved = pts[vert_ids].copy()
        for row, vid in enumerate(vert_ids):
            adj = normals[np.any(hull.simplices == vid, axis=1)]
            # coplanar triangles of one merged facet share an equation
            adj = np.unique(np.round(adj, 12), axis=0)
            d, *_ = np.linalg.lstsq(adj, np.full(len(adj), target), rcond=None)
            disp = adj @ d
            lo = float(disp.min())
            if not np.all(np.isfinite(d)) or lo <= target * 1e-6:
                u = adj.sum(axis=0)
                u = u / np.linalg.norm(u)
                align = max(float(np.min(adj @ u)), _DILATION_ALIGN_FLOOR)
                d = (target / align) * u
            elif lo < target * (1.0 - 1e-9):
                d *= target / lo
            moved[row] += d
        hull = ConvexHull(moved)
        pts = moved

    # orient each simplex to agree with Qhull's outward facet normal
    tris = hull.simplices.copy()
    a = pts[tris[:, 0]]
    b = pts[tris[:, 1]]
    c = pts[tris[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), hull.equations[:, :3]) < 0.0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    used = np.unique(tris)
    remap = np.full(len(pts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriangleMesh.from_arrays(pts[used], remap[tris])


def signed_distance(mesh: TriangleMesh, point: np.ndarray) -> float:
    """Exact signed distance of one query point, negative inside."""
    return float(mesh.signed_distance(np.asarray(point, dtype=np.float64)[None, :])[0])


def concavity_score(region: Region, samples: SurfaceSamples) -> float:
    """Mean height of region members above the anchor's tangent plane.

    Positive means the patch curves toward the outward normal (a hollow),
    negative means it falls away (convex cap), zero means flat.
    """
    members = region.member_indices
    if len(members) < 2:
        raise ValueError("region needs at least 2 members")
    anchor_p = samples.points[region.anchor_index]
    anchor_n = samples.normals[region.anchor_index]
    heights = (samples.points[members] - anchor_p) @ anchor_n
    return float(heights.mean())
