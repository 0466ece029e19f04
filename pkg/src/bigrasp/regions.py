"""Bimanual grasp region selection.

Anchors spread by farthest point sampling grow into geodesic-ball-ish
neighborhoods; concave or too-close region pairs are dropped, the survivors
are scored by how well contacts drawn from both regions resist the twelve
signed axis disturbances, and the best pairs are kept.

The score of a pair is the minimum over disturbance directions of the best
projection of the grasp wrench boundary onto that direction. Sampled
boundary wrenches are augmented with the exact support value per direction,
so the score equals the minimum support value; the samples keep the
construction honest against the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Region, SurfaceSamples, concavity_score, farthest_point_sample, region_of
from .seeding import rng_from
from .wrench import _tangent_frame

# both signs of every force and torque axis
from .wrench import DISTURBANCE_DIRECTIONS

_PAIR_CHUNK = 128  # pairs scored per vectorized batch


class RegionError(ValueError):
    """Raised for empty regions or filter sets with no survivors."""


@dataclass
class RegionParams:
    """Knobs for pair selection; defaults follow the dataset generator."""

    k_anchors: int = 200
    k_neighbors: int = 256
    radius: float = 0.08
    n_contacts: int = 5
    m_directions: int = 1000
    k_retain: int = 40
    d_min: float = 0.10
    tau_concave: float = 0.002
    mu: float = 0.6


@dataclass
class RegionPair:
    """Two scored grasp regions with the contacts used for scoring."""

    region_a: Region
    region_b: Region
    score: float
    contact_points_a: np.ndarray  # (N, 3)
    contact_normals_a: np.ndarray  # (N, 3) inward
    contact_points_b: np.ndarray
    contact_normals_b: np.ndarray
    concavity_a: float = 0.0  # mean height above the anchor tangent plane
    concavity_b: float = 0.0


def _draw_region_contacts(
    region: Region, samples: SurfaceSamples, n: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """n contact positions and inward normals, uniform over region members.

    Sampling is without replacement when the region is large enough, with
    replacement otherwise. The stream is keyed by the region's anchor so a
    region draws the same contacts regardless of pairing order.
    """
    members = np.asarray(region.member_indices, dtype=np.intp)
    if members.size == 0:
        raise RegionError("region has no member points")
    rng = rng_from("region-contacts", seed, region.anchor_index)
    pick = rng.choice(members, size=n, replace=members.size < n)
    return samples.points[pick], -samples.normals[pick]


def _probe_directions(m: int, seed: int) -> np.ndarray:
    """Uniform unit directions in wrench space, shared across all pairs."""
    u = rng_from("gwb", seed).normal(size=(m, 6))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _region_tables(
    positions: np.ndarray,
    inward: np.ndarray,
    mu: float,
    centroid: np.ndarray,
    probes: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-contact-set boundary wrench projections and exact support sums.

    positions, inward: (R, n, 3) contact sets. Support and the boundary
    wrench of a friction cone hull are sums of per-contact terms, so a
    pair's score only needs each set's contribution: the projection of its
    summed boundary forces onto the twelve signed axis disturbances at every
    probe direction, (R, M, 12), and its exact support sum per disturbance,
    (R, 12). Pair quantities are the elementwise sums of two tables.
    """
    r, n, _ = positions.shape
    norms = np.linalg.norm(inward, axis=-1, keepdims=True)
    if np.any(norms < 1e-12):
        raise RegionError("contact normal is numerically zero")
    nrm = (inward / norms).reshape(-1, 3)
    d, e = _tangent_frame(nrm)
    frame = np.stack([nrm, d, e], axis=2).reshape(r, n, 3, 3)
    rel = positions - centroid
    g = np.empty((r, n, 6, 3))
    g[:, :, :3, :] = frame
    g[:, :, 3:, :] = np.cross(rel[..., None, :], frame.transpose(0, 1, 3, 2)).transpose(
        0, 1, 3, 2
    )

    # one pass over probes and disturbances together
    m = len(probes)
    dirs = np.vstack([probes, DISTURBANCE_DIRECTIONS])
    gt_rows = np.ascontiguousarray(g.transpose(0, 1, 3, 2)).reshape(-1, 6)
    gu = (gt_rows @ dirs.T).reshape(r, n, 3, -1)  # (R, n, 3, M + 12)
    tang = np.hypot(gu[:, :, 1, :], gu[:, :, 2, :])
    vals = gu[:, :, 0, :] + mu * tang
    active = vals > 0.0
    support = np.maximum(vals, 0.0).sum(axis=1)  # (R, M + 12)

    forces = np.empty_like(gu)
    safe = np.where(tang > 1e-300, tang, 1.0)[:, :, None, :]
    forces[:, :, 0, :] = 1.0
    forces[:, :, 1:, :] = mu * gu[:, :, 1:, :] / safe
    forces *= active[:, :, None, :]
    # summed boundary forces mapped to wrench space, probe columns only
    f_mat = forces[..., :m].reshape(r, n * 3, m)
    wrench = np.matmul(gt_rows.reshape(r, n * 3, 6).transpose(0, 2, 1), f_mat)
    proj = (
        wrench.transpose(0, 2, 1).reshape(-1, 6) @ DISTURBANCE_DIRECTIONS.T
    ).reshape(r, m, 12)
    return proj, support[:, m:]


def _combined_scores(
    proj_a: np.ndarray, proj_b: np.ndarray, sup_a: np.ndarray, sup_b: np.ndarray
) -> np.ndarray:
    """Scores for stacked pairs given the two halves' tables.

    The best sampled projection per disturbance direction is max-merged
    with the exact support value, then the worst direction wins. Shapes:
    proj (C, M, 12), sup (C, 12); returns (C,).
    """
    best = (proj_a + proj_b).max(axis=1)
    return np.minimum.reduce(np.maximum(best, sup_a + sup_b), axis=1)


def stability_score(
    region_a: Region,
    region_b: Region,
    samples: SurfaceSamples,
    n_per_region: int = 5,
    m_directions: int = 1000,
    mu: float = 0.6,
    seed: int = 0,
) -> float:
    """Worst-direction wrench resistance of contacts drawn from two regions.

    Torques are taken about the sample-cloud centroid. Non-negative: zero
    force is always feasible, so the wrench space contains the origin.
    """
    if n_per_region < 1 or m_directions < 1:
        raise RegionError("need at least one contact and one direction sample")
    pts_a, nrm_a = _draw_region_contacts(region_a, samples, n_per_region, seed)
    pts_b, nrm_b = _draw_region_contacts(region_b, samples, n_per_region, seed)
    centroid = samples.points.mean(axis=0)
    probes = _probe_directions(m_directions, seed)
    proj, sup = _region_tables(
        np.stack([pts_a, pts_b]), np.stack([nrm_a, nrm_b]), mu, centroid, probes
    )
    score = _combined_scores(proj[:1], proj[1:], sup[:1], sup[1:])
    return float(score[0])


def select_region_pairs(
    samples: SurfaceSamples,
    params: RegionParams | None = None,
    seed: int = 0,
) -> list[RegionPair]:
    """Ranked grasp region pairs for one object.

    Anchors come from farthest point sampling; regions around anchors are
    dropped when concave beyond tolerance, pairs are dropped when anchors
    sit closer than d_min, every surviving pair is scored, and the top
    k_retain survive, sorted by descending score with anchor-index
    tie-breaks for determinism.
    """
    p = params if params is not None else RegionParams()
    n_samples = len(samples.points)
    if n_samples < p.k_anchors:
        raise RegionError(f"need at least {p.k_anchors} surface samples, got {n_samples}")

    anchors = farthest_point_sample(samples, p.k_anchors)
    regions = []
    concavity = {}
    for a in anchors:
        region = region_of(samples, int(a), radius=p.radius, k_max=p.k_neighbors)
        if len(region.member_indices) < 2:
            continue  # concavity undecidable on a lone point
        conc = concavity_score(region, samples)
        if conc > p.tau_concave:
            continue
        regions.append(region)
        concavity[region.anchor_index] = conc

    regions.sort(key=lambda r: r.anchor_index)
    anchor_xyz = samples.points[[r.anchor_index for r in regions]]
    gaps = np.linalg.norm(anchor_xyz[:, None, :] - anchor_xyz[None, :, :], axis=-1)
    candidates = [
        (ra, rb)
        for i, ra in enumerate(regions)
        for j, rb in enumerate(regions[i + 1 :], start=i + 1)
        if gaps[i, j] >= p.d_min
    ]
    if not candidates:
        raise RegionError("no region pair passes the filters; object unsuitable at this scale")

    # each region draws contacts and builds its wrench tables exactly once
    drawn = {
        region.anchor_index: _draw_region_contacts(region, samples, p.n_contacts, seed)
        for region in regions
    }
    centroid = samples.points.mean(axis=0)
    probes = _probe_directions(p.m_directions, seed)
    row = {region.anchor_index: k for k, region in enumerate(regions)}
    proj, sup = _region_tables(
        np.stack([drawn[r.anchor_index][0] for r in regions]),
        np.stack([drawn[r.anchor_index][1] for r in regions]),
        p.mu,
        centroid,
        probes,
    )

    idx_a = np.array([row[ra.anchor_index] for ra, _ in candidates])
    idx_b = np.array([row[rb.anchor_index] for _, rb in candidates])
    scores = np.empty(len(candidates))
    for lo in range(0, len(candidates), _PAIR_CHUNK):
        hi = min(lo + _PAIR_CHUNK, len(candidates))
        scores[lo:hi] = _combined_scores(
            proj[idx_a[lo:hi]], proj[idx_b[lo:hi]], sup[idx_a[lo:hi]], sup[idx_b[lo:hi]]
        )

    pairs = [
        RegionPair(
            region_a=ra,
            region_b=rb,
            score=float(s),
            contact_points_a=drawn[ra.anchor_index][0],
            contact_normals_a=drawn[ra.anchor_index][1],
            contact_points_b=drawn[rb.anchor_index][0],
            contact_normals_b=drawn[rb.anchor_index][1],
            concavity_a=concavity[ra.anchor_index],
            concavity_b=concavity[rb.anchor_index],
        )
        for (ra, rb), s in zip(candidates, scores)
    ]
    pairs.sort(key=lambda rp: (-rp.score, rp.region_a.anchor_index, rp.region_b.anchor_index))
    return pairs[: p.k_retain]
