"""Analytic grasp quality metrics.

Geometric interference (penetration and self-penetration depth), contact
placement consistency, grasp-set diversity, and a force-closure success
check that gates on all of them. Everything here is a pure function of
poses, hand models, and the object mesh, so records can be re-scored
without rerunning synthesis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .handkin import BiGraspPose, HandModel, collision_check, forward_kinematics
from .rotations import quat_to_matrix
from .wrench import ContactState, qp_energy

# contacts further than this from the surface are not load-bearing
_CONTACT_TOL = 0.002

# success gates on geometric sanity as well as the disturbance residual
_PD_GATE = 0.005
_SPD_GATE = 0.002

_QP_ITERS = 4000


class MetricsError(ValueError):
    pass


def penetration_depth(bigrasp: BiGraspPose, hands: tuple[HandModel, HandModel], obj) -> float:
    """Deepest hand-object interference over all collision spheres, meters.

    Zero when every sphere center stays at least its radius outside the
    surface.
    """
    worst = 0.0
    for pose, hand in zip((bigrasp.left, bigrasp.right), hands):
        fk = forward_kinematics(hand, pose)
        sdf = np.asarray(obj.signed_distance(fk.sphere_pos))
        worst = max(worst, float(np.max(hand.sphere_radius - sdf, initial=0.0)))
    return max(worst, 0.0)


def self_penetration_depth(bigrasp: BiGraspPose, hands: tuple[HandModel, HandModel]) -> float:
    """Deepest sphere-sphere overlap within and between the hands, meters.

    Intra-hand pairs on the same or adjacent links are exempt, matching the
    collision model; every inter-hand pair counts.
    """
    report = collision_check(hands[0], bigrasp.left, hands[1], bigrasp.right)
    return max(report.max_depth("self"), report.max_depth("inter"))


def contact_distance_consistency(
    bigrasp: BiGraspPose, hands: tuple[HandModel, HandModel], obj
) -> float:
    """Spread of the fingertip signed contact distances, meters.

    Signed distances are negative inside the object; the value is the range
    max - min pooled over both hands' fingertip contacts.
    """
    dists = []
    for pose, hand in zip((bigrasp.left, bigrasp.right), hands):
        fk = forward_kinematics(hand, pose)
        tips = fk.contact_pos[hand.fingertip_mask]
        if len(tips):
            dists.append(np.asarray(obj.signed_distance(tips)))
    if not dists:
        raise MetricsError("no fingertip contacts defined")
    pooled = np.concatenate(dists)
    return float(pooled.max() - pooled.min())


def _flatten_grasp(bigrasp: BiGraspPose) -> np.ndarray:
    parts = []
    for pose in (bigrasp.left, bigrasp.right):
        parts.append(pose.t)
        parts.append(quat_to_matrix(pose.r).ravel())
        parts.append(pose.q)
    return np.concatenate(parts)


def first_variance_ratio(grasps: list[BiGraspPose]) -> float:
    """Share of grasp-set variance along its first principal direction.

    Each grasp flattens to (t, rotation matrix entries, joints) for both
    hands. Near-identical sets (total variance < 1e-12) report 1.0; a set
    needs at least two grasps to have a variance direction at all.
    """
    if len(grasps) < 2:
        raise MetricsError("need at least 2 grasps for a variance ratio")
    x = np.stack([_flatten_grasp(g) for g in grasps])
    x = x - x.mean(axis=0)
    s = np.linalg.svd(x, compute_uv=False)
    lam = s * s / (len(grasps) - 1)
    total = float(lam.sum())
    if total < 1e-12:
        return 1.0
    return float(lam[0] / total)


@dataclass
class SuccessReport:
    passed: bool
    q: float
    residual_norms: np.ndarray  # (12,) per disturbance direction
    pd: float
    spd: float
    n_contacts: int  # contacts close enough to the surface to count


def analytic_success(
    bigrasp: BiGraspPose,
    hands: tuple[HandModel, HandModel],
    obj,
    mu: float = 0.6,
    beta: float = 0.1,
    gamma: float = 0.2,
    eps: float = 0.05,
) -> SuccessReport:
    """Force-closure success proxy for a refined bimanual grasp.

    Both hands' contacts within 2 mm of the surface form one joint contact
    set whose disturbance residual Q must stay under eps * beta^2, with the
    interference gates PD <= 5 mm and SPD <= 2 mm applied on top. Contact
    normals come from the same interpolated surface field the optimizer
    descends, so a pose scores as it was shaped.
    """
    pts = []
    nrm = []
    for pose, hand in zip((bigrasp.left, bigrasp.right), hands):
        fk = forward_kinematics(hand, pose)
        sdf, _, normal, _ = obj.closest_surface_frames(fk.contact_pos)
        near = np.abs(sdf) <= _CONTACT_TOL
        pts.append(fk.contact_pos[near])
        nrm.append(-normal[near])

    pd = penetration_depth(bigrasp, hands, obj)
    spd = self_penetration_depth(bigrasp, hands)
    pts = np.concatenate(pts)
    nrm = np.concatenate(nrm)
    if len(pts) == 0:
        # nothing touches: every disturbance is unresisted at magnitude beta
        return SuccessReport(
            passed=False,
            q=12.0 * beta * beta,
            residual_norms=np.full(12, beta),
            pd=pd,
            spd=spd,
            n_contacts=0,
        )

    contacts = ContactState.from_contacts(pts, nrm, mu, torque_center=obj.centroid)
    qp = qp_energy(contacts, beta, gamma, max_iter=_QP_ITERS)
    passed = (
        qp.energy <= eps * beta * beta and pd <= _PD_GATE and spd <= _SPD_GATE
    )
    return SuccessReport(
        passed=bool(passed),
        q=float(qp.energy),
        residual_norms=np.linalg.norm(qp.residuals, axis=1),
        pd=pd,
        spd=spd,
        n_contacts=len(pts),
    )
