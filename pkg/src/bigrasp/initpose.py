"""Region-based bimanual grasp initialization and feasibility screening.

Each hand's palm is placed at the point on the dilated object hull closest
to its target region, facing inward along the negated hull normal. In-plane
orientation follows an ideal-direction rule with uniform jitter, and the
fingers pre-close from fully open toward the surface by an amount set by
the region's concavity, stopping short of predicted contact.

The dilated hull is a convex supporting surface, so the open palm plane
touches it only at the placement point and the flat-open hand keeps the
dilation offset as clearance from the true object everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import TriangleMesh
from .handkin import (
    BiGraspPose,
    CollisionReport,
    HandModel,
    HandPose,
    collision_check,
    forward_kinematics,
)
from .regions import RegionPair
from .rotations import matrix_to_quat, rotation_about_axis
from .seeding import rng_from


class InitError(ValueError):
    """Raised for degenerate hull queries or mismatched hand chirality."""


@dataclass
class InitParams:
    """Placement and pre-close knobs."""

    jitter: float = np.pi / 12.0  # max in-plane rotation jitter, radians
    preclose_fraction: float = 0.2  # of joint range, at full curvature scale
    curvature_ref: float = 0.002  # concavity (m) that maps to full scale
    contact_clearance: float = 0.002  # m; closing stops at this object distance
    preclose_steps: int = 16


@dataclass
class WorkspaceSphere:
    """Reachability proxy: the wrist must stay inside this ball."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=np.float64)
        if self.radius <= 0.0:
            raise InitError("workspace radius must be positive")

    def contains(self, point: np.ndarray) -> bool:
        return float(np.linalg.norm(point - self.center)) <= self.radius


@dataclass
class FailureReport:
    """Outcome of feasibility screening; reasons empty means pass."""

    passed: bool
    reasons: list[str] = field(default_factory=list)
    collisions: CollisionReport | None = None


def _palm_frame(
    hull: TriangleMesh, centroid: np.ndarray, prefer_sign: float, jitter_angle: float
) -> tuple[np.ndarray, np.ndarray]:
    """Palm origin on the hull and wrist rotation matrix.

    Columns of the rotation are the palm x, y (lateral), and z (inward)
    axes in world coordinates. The lateral axis chases world +z or -z
    projected into the palm plane, falling back to +-x when the inward
    axis is vertical, then rotates by the jitter angle about the inward
    axis.
    """
    query = np.asarray(centroid, dtype=np.float64)[None, :]
    sdf, closest, outward = hull.closest_surface(query)
    if not (np.all(np.isfinite(closest)) and np.all(np.isfinite(outward))):
        raise InitError("hull closest-point query failed")
    if sdf[0] > -1e-9:
        raise InitError("region centroid is not strictly inside the dilated hull")
    inward = -outward[0]
    ideal = np.array([0.0, 0.0, prefer_sign])
    lateral = ideal - inward * float(ideal @ inward)
    if np.linalg.norm(lateral) < 1e-6:
        # vertical grasp axis: fall back to the world x direction
        ideal = np.array([prefer_sign, 0.0, 0.0])
        lateral = ideal - inward * float(ideal @ inward)
    lateral = lateral / np.linalg.norm(lateral)
    lateral = rotation_about_axis(inward, jitter_angle) @ lateral
    rot = np.column_stack([np.cross(lateral, inward), lateral, inward])
    return closest[0], rot


def _preclose(
    hand: HandModel,
    t: np.ndarray,
    rot: np.ndarray,
    obj: TriangleMesh | None,
    concavity: float,
    params: InitParams,
) -> np.ndarray:
    """Joints closed from fully open toward the object, curvature-scaled.

    Walks flexion in even steps up to preclose_fraction of the joint range
    times the clamped curvature scale, keeping the last step where every
    predicted contact stays clear of the object surface. Without an object
    mesh the full curvature-scaled flexion is applied unchecked.
    """
    scale = float(np.clip(concavity / params.curvature_ref, 0.0, 1.0))
    target = params.preclose_fraction * scale
    q = hand.q_open
    if target <= 0.0:
        return q
    span = hand.joint_upper - hand.joint_lower
    if obj is None:
        return hand.clamp(hand.q_open + target * span)
    quat = matrix_to_quat(rot)
    for k in range(1, params.preclose_steps + 1):
        s = target * k / params.preclose_steps
        q_try = hand.clamp(hand.q_open + s * span)
        fk = forward_kinematics(hand, HandPose(t, quat, q_try))
        if obj.signed_distance(fk.contact_pos).min() < params.contact_clearance:
            break
        q = q_try
    return q


def initialize_bigrasp(
    pair: RegionPair,
    hand_l: HandModel,
    hand_r: HandModel,
    hull: TriangleMesh,
    seed: int = 0,
    params: InitParams | None = None,
    obj: TriangleMesh | None = None,
) -> BiGraspPose:
    """Initial bimanual pose for a region pair.

    The left hand targets region A and the right hand region B. Jitter is
    drawn per region, so swapping the pair swaps the full placements. The
    object mesh, when given, caps the finger pre-close at a clearance from
    the true surface. Pure function of its arguments for a fixed seed.
    """
    p = params if params is not None else InitParams()
    if hand_l.chirality == hand_r.chirality:
        raise InitError("hands must have opposite chirality")

    poses = []
    for region, concavity, hand, sign in (
        (pair.region_a, pair.concavity_a, hand_l, 1.0),
        (pair.region_b, pair.concavity_b, hand_r, -1.0),
    ):
        rng = rng_from("init-inplane", seed, region.anchor_index)
        jitter = float(rng.uniform(-p.jitter, p.jitter)) if p.jitter > 0.0 else 0.0
        origin, rot = _palm_frame(hull, region.mean_position, sign, jitter)
        q = _preclose(hand, origin, rot, obj, concavity, p)
        poses.append(HandPose(origin, matrix_to_quat(rot), q))
    return BiGraspPose(left=poses[0], right=poses[1])


def verify_feasibility(
    bigrasp: BiGraspPose,
    hand_l: HandModel,
    hand_r: HandModel,
    obj=None,
    table_height: float | None = None,
    workspace_left: WorkspaceSphere | None = None,
    workspace_right: WorkspaceSphere | None = None,
    penetration_tol: float = 1e-4,
) -> FailureReport:
    """Physical and kinematic screening of a bimanual pose.

    Collision kinds (self, inter, object, table) fail when any penetration
    exceeds the tolerance; the workspace spheres fail when a wrist leaves
    its ball. Total: always returns a report, never raises.
    """
    report = collision_check(
        hand_l, bigrasp.left, hand_r, bigrasp.right, obj=obj, table_height=table_height
    )
    reasons = sorted({it.kind for it in report.items if it.depth > penetration_tol})
    for name, sphere, pose in (
        ("workspace-left", workspace_left, bigrasp.left),
        ("workspace-right", workspace_right, bigrasp.right),
    ):
        if sphere is not None and not sphere.contains(pose.t):
            reasons.append(name)
    return FailureReport(passed=not reasons, reasons=reasons, collisions=report)
