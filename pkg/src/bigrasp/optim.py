"""Grasp refinement by projected gradient descent on a weighted energy.

The energy couples four concerns: per-hand disturbance resistance (the
quadratic-program residual over the twelve signed axis disturbances, run
independently per hand so the two contact sets never mix inside one
program), contact-to-surface distance, consistency with the contact regions
chosen at initialization, and squared collision penetration depths.
Gradients flow through the hand Jacobians; the surface and program terms
use envelope derivatives (closest points and optimal forces held fixed),
exact almost everywhere.

A refined grasp becomes an execution pair by retracting each wrist along
its palm axis while opening the fingers until the contacts sit one
centimeter off the surface (the pre-grasp), then extrapolating the refined
pose past itself by the same relative motion (the squeeze).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .handkin import (
    BiGraspPose,
    HandModel,
    HandPose,
    collision_check,
    contact_jacobians,
    forward_kinematics,
    sphere_jacobians,
)
from .regions import RegionPair
from .rotations import (
    quat_conjugate,
    quat_from_rotvec,
    quat_multiply,
    quat_normalize,
    quat_to_matrix,
)
from .wrench import (
    DISTURBANCE_DIRECTIONS,
    ContactState,
    _support_terms,
    qp_energy,
    qp_energy_gradient,
)

_RETRACT_MAX = 0.03  # meters of wrist travel at full retraction
_OPEN_FRACTION = 0.5  # share of finger flexion released at full retraction
_PRE_TARGET = 0.010
_PRE_WINDOW = (0.009, 0.011)
_PRE_SCAN = 32
_PRE_BISECT = 60


class OptimError(ValueError):
    pass


@dataclass
class EnergyWeights:
    """Term weights and contact-model constants for the grasp energy.

    ``a`` is the region falloff threshold in meters; the falloff turns fully
    linear at ``2 * a`` (exposed as ``b``).
    """

    w_q_left: float = 1000.0
    w_q_right: float = 1000.0
    w_dis: float = 100.0
    w_region: float = 50.0
    w_col: float = 500.0
    beta: float = 0.1
    gamma: float = 0.2
    mu: float = 0.6
    a: float = 0.01

    def __post_init__(self) -> None:
        for name in ("w_q_left", "w_q_right", "w_dis", "w_region", "w_col"):
            if getattr(self, name) < 0.0:
                raise OptimError(f"{name} must be non-negative")
        if self.a <= 0.0:
            raise OptimError("a must be positive")

    @property
    def b(self) -> float:
        return 2.0 * self.a


@dataclass
class OptimConfig:
    """Projected-gradient schedule.

    Separate step scales per parameter block, halved at each iteration in
    ``anneal_iters``; backtracking halves the whole step up to
    ``max_backtracks`` times until the energy decreases.
    """

    iters: int = 200
    step_t: float = 1e-3
    step_r: float = 1e-2
    step_q: float = 1e-2
    anneal_iters: tuple[int, ...] = (100, 150)
    anneal_factor: float = 0.5
    max_backtracks: int = 8
    tol: float = 1e-6
    tol_window: int = 10

    def __post_init__(self) -> None:
        if self.iters < 0:
            raise OptimError("iters must be non-negative")
        if self.tol_window < 1:
            raise OptimError("tol_window must be at least 1")


@dataclass
class OptimTrace:
    """Energy history: the initial evaluation, then one row per iteration.

    ``terms`` holds raw, unweighted values keyed q_left, q_right, dis,
    region, col. Rejected iterations repeat the previous row with
    ``accepted`` False, so the total sequence is non-increasing.
    """

    totals: list[float] = field(default_factory=list)
    terms: list[dict[str, float]] = field(default_factory=list)
    accepted: list[bool] = field(default_factory=list)
    reason: str = ""


def phi(d: np.ndarray | float, a: float) -> np.ndarray | float:
    """Distance falloff: 0 inside a, d - a beyond 2a, cubic Hermite between."""
    if a <= 0.0:
        raise OptimError("a must be positive")
    d_arr = np.asarray(d, dtype=np.float64)
    t = np.clip((d_arr - a) / a, 0.0, 1.0)
    out = np.where(d_arr <= a, 0.0, t * t * (3.0 - 2.0 * t) * (d_arr - a))
    return float(out) if out.ndim == 0 else out


def _phi_slope(d: np.ndarray, a: float) -> np.ndarray:
    # d/dd of phi: the blend H(t)*(d-a) differentiates to H + H'(t)*(d-a)/a
    t = np.clip((d - a) / a, 0.0, 1.0)
    h = t * t * (3.0 - 2.0 * t)
    hp = 6.0 * t * (1.0 - t)
    return np.where(d <= a, 0.0, h + hp * (d - a) / a)


def e_dis(points: np.ndarray, obj) -> tuple[float, np.ndarray]:
    """Sum of squared contact-to-surface distances and its gradient.

    The gradient holds each closest surface point fixed, which equals the
    true derivative wherever the closest point is unique.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    _, closest, _ = obj.closest_surface(pts)
    diff = pts - closest
    return float(np.einsum("ij,ij->", diff, diff)), 2.0 * diff


def e_region(
    points: np.ndarray, region_points: np.ndarray, a: float
) -> tuple[float, np.ndarray]:
    """Falloff-weighted distance from each point to a region point set.

    The subgradient follows the achieving nearest region point.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    reg = np.atleast_2d(np.asarray(region_points, dtype=np.float64))
    if reg.size == 0:
        raise OptimError("empty region point set")
    diff = pts[:, None, :] - reg[None, :, :]
    dist = np.sqrt(np.einsum("nmk,nmk->nm", diff, diff))
    idx = dist.argmin(axis=1)
    d = dist[np.arange(len(pts)), idx]
    slope = _phi_slope(d, a)
    safe = np.where(d > 1e-12, d, 1.0)
    grad = (slope / safe)[:, None] * (pts - reg[idx])
    return float(np.sum(phi(d, a))), grad


# -- energy evaluation -----------------------------------------------------

_QP_ITERS = 4000  # the per-hand programs must actually converge: the energy
# feeds backtracking comparisons and finite-difference oracles, so leftover
# solver residual would masquerade as gradient noise
_QP_TOL_INNER = 1e-6  # update norms this small leave the value wrong by
# ~1e-12, orders below any accept/reject margin the line search sees


def _qp_seed(contacts: ContactState, beta: float) -> np.ndarray:
    # residual-minimizing scaling of each disturbance's support maximizer;
    # depends only on this hand's contact state, so decoupling is preserved
    _, forces = _support_terms(contacts, DISTURBANCE_DIRECTIONS)
    w = np.einsum("nkc,mnc->mk", contacts.G, forces)
    num = beta * np.einsum("mk,mk->m", DISTURBANCE_DIRECTIONS, w)
    den = np.einsum("mk,mk->m", w, w)
    s = np.clip(num / np.maximum(den, 1e-300), 0.0, 1.0)
    return forces * s[:, None, None]


@dataclass
class _HandEval:
    fk: object
    contacts: ContactState
    qp: object
    dis_grad: np.ndarray  # (n_contacts, 3) d(E_dis)/d(contact point)
    reg_grad: np.ndarray
    norm_jac: np.ndarray  # (n_contacts, 3, 3) d(outward)/d(contact point)


@dataclass
class _Eval:
    total: float
    terms: dict[str, float]
    hands: tuple[_HandEval, _HandEval]
    report: object


def _evaluate(
    bigrasp: BiGraspPose,
    hands: tuple[HandModel, HandModel],
    obj,
    region_pts: tuple[np.ndarray, np.ndarray],
    weights: EnergyWeights,
    table_height: float | None,
    qp_seeds: tuple[np.ndarray | None, np.ndarray | None] = (None, None),
    reject_above: float | None = None,
) -> _Eval | None:
    center = obj.centroid
    geom = []
    terms: dict[str, float] = {}
    dis_total = 0.0
    reg_total = 0.0
    for pose, hand, rpts in (
        (bigrasp.left, hands[0], region_pts[0]),
        (bigrasp.right, hands[1], region_pts[1]),
    ):
        fk = forward_kinematics(hand, pose)
        _, closest, normal, norm_jac = obj.closest_surface_frames(fk.contact_pos)
        contacts = ContactState.from_contacts(
            fk.contact_pos, -normal, weights.mu, torque_center=center
        )
        diff = fk.contact_pos - closest
        dis_total += float(np.einsum("ij,ij->", diff, diff))
        reg_val, reg_grad = e_region(fk.contact_pos, rpts, weights.a)
        reg_total += reg_val
        geom.append((fk, contacts, diff, reg_grad, norm_jac))

    report = collision_check(
        hands[0], bigrasp.left, hands[1], bigrasp.right, obj=obj, table_height=table_height
    )
    terms["dis"] = dis_total
    terms["region"] = reg_total
    terms["col"] = float(sum(it.depth * it.depth for it in report.items))
    total = (
        weights.w_dis * terms["dis"]
        + weights.w_region * terms["region"]
        + weights.w_col * terms["col"]
    )
    if reject_above is not None and total >= reject_above:
        # the wrench terms are nonnegative, so this trial is already lost
        return None

    per_hand = []
    for idx, (key, (fk, contacts, diff, reg_grad, norm_jac)) in enumerate(
        zip(("q_left", "q_right"), geom)
    ):
        seed = qp_seeds[idx]
        if seed is None:
            seed = _qp_seed(contacts, weights.beta)
        qp = qp_energy(
            contacts,
            weights.beta,
            weights.gamma,
            warm_start=seed,
            max_iter=_QP_ITERS,
            tol=_QP_TOL_INNER,
        )
        terms[key] = qp.energy
        total += (weights.w_q_left, weights.w_q_right)[idx] * qp.energy
        per_hand.append(_HandEval(fk, contacts, qp, 2.0 * diff, reg_grad, norm_jac))

    return _Eval(float(total), terms, (per_hand[0], per_hand[1]), report)


def _gradient(
    ev: _Eval,
    bigrasp: BiGraspPose,
    hands: tuple[HandModel, HandModel],
    obj,
    weights: EnergyWeights,
) -> tuple[np.ndarray, np.ndarray]:
    poses = (bigrasp.left, bigrasp.right)
    w_q = (weights.w_q_left, weights.w_q_right)
    grads = []
    for side in (0, 1):
        h = ev.hands[side]
        jac = contact_jacobians(hands[side], poses[side], h.fk)
        g = np.einsum(
            "nk,nkp->p", weights.w_dis * h.dis_grad + weights.w_region * h.reg_grad, jac
        )
        if w_q[side] != 0.0:
            # inward normals ride the interpolated surface normal field
            dn = -np.einsum("nij,njp->nip", h.norm_jac, jac)
            g = g + w_q[side] * qp_energy_gradient(
                h.contacts, weights.beta, weights.gamma, h.qp, dp=jac, dn=dn
            )
        grads.append(g)

    if weights.w_col != 0.0 and ev.report.items:
        base_r = len(hands[0].sphere_radius)
        sjac = [None, None]

        def jac_of(sphere_id: int) -> tuple[int, np.ndarray]:
            side = 0 if sphere_id < base_r else 1
            if sjac[side] is None:
                sjac[side] = sphere_jacobians(hands[side], poses[side], ev.hands[side].fk)
            return side, sjac[side][sphere_id - side * base_r]

        obj_items = [it for it in ev.report.items if it.kind == "object"]
        obj_outward = {}
        if obj_items:
            centers = np.stack(
                [
                    ev.hands[0 if it.index_a < base_r else 1].fk.sphere_pos[
                        it.index_a - (0 if it.index_a < base_r else base_r)
                    ]
                    for it in obj_items
                ]
            )
            _, _, out = obj.closest_surface(centers)
            obj_outward = {it.index_a: out[row] for row, it in enumerate(obj_items)}

        for it in ev.report.items:
            coef = 2.0 * weights.w_col * it.depth
            side_a, jac_a = jac_of(it.index_a)
            if it.kind in ("self", "inter"):
                side_b, jac_b = jac_of(it.index_b)
                ca = ev.hands[side_a].fk.sphere_pos[it.index_a - side_a * base_r]
                cb = ev.hands[side_b].fk.sphere_pos[it.index_b - side_b * base_r]
                gap = ca - cb
                norm = np.linalg.norm(gap)
                if norm < 1e-12:
                    continue  # coincident centers: subgradient 0
                u = gap / norm
                grads[side_a] -= coef * (u @ jac_a)
                grads[side_b] += coef * (u @ jac_b)
            elif it.kind == "object":
                grads[side_a] -= coef * (obj_outward[it.index_a] @ jac_a)
            else:  # table: depth falls one-for-one with center height
                grads[side_a] -= coef * jac_a[2]
    return grads[0], grads[1]


def total_energy(
    bigrasp: BiGraspPose,
    hand_l: HandModel,
    hand_r: HandModel,
    obj,
    pair: RegionPair,
    weights: EnergyWeights | None = None,
    table_height: float | None = None,
) -> tuple[float, dict[str, float], tuple[np.ndarray, np.ndarray]]:
    """Weighted grasp energy, raw per-term breakdown, and its gradient.

    Each hand's disturbance program sees only that hand's contacts; the
    surface and region terms sum over both hands, each hand measured against
    the region it was initialized on. Gradients are per hand over
    (translation, wrist rotation increment, joints), the rotation block
    being a body-frame axis-angle increment applied as r * exp(delta).
    """
    if weights is None:
        weights = EnergyWeights()
    region_pts = (pair.contact_points_a, pair.contact_points_b)
    ev = _evaluate(bigrasp, (hand_l, hand_r), obj, region_pts, weights, table_height)
    grads = _gradient(ev, bigrasp, (hand_l, hand_r), obj, weights)
    return ev.total, dict(ev.terms), grads


# -- descent loop ----------------------------------------------------------


def _stepped(
    bigrasp: BiGraspPose,
    hands: tuple[HandModel, HandModel],
    grads: tuple[np.ndarray, np.ndarray],
    config: OptimConfig,
    factor: float,
) -> BiGraspPose:
    poses = []
    for pose, hand, g in zip((bigrasp.left, bigrasp.right), hands, grads):
        t = pose.t - factor * config.step_t * g[:3]
        r = quat_multiply(pose.r, quat_from_rotvec(-factor * config.step_r * g[3:6]))
        q = hand.clamp(pose.q - factor * config.step_q * g[6:])
        poses.append(HandPose(t=t, r=quat_normalize(r), q=q))
    return BiGraspPose(left=poses[0], right=poses[1])


def optimize(
    bigrasp: BiGraspPose,
    hand_l: HandModel,
    hand_r: HandModel,
    obj,
    pair: RegionPair,
    weights: EnergyWeights | None = None,
    config: OptimConfig | None = None,
    table_height: float | None = None,
) -> tuple[BiGraspPose, OptimTrace]:
    """Refine a bimanual grasp by projected gradient descent.

    Joints are clamped to their limits and quaternions renormalized after
    every step; a step is accepted only if it lowers the energy, with up to
    ``max_backtracks`` halvings before the iteration is marked rejected.
    Stops early when the relative energy decrease over ``tol_window``
    iterations falls below ``tol``, or with reason "diverged" on a
    non-finite energy or gradient.
    """
    if weights is None:
        weights = EnergyWeights()
    if config is None:
        config = OptimConfig()
    hands = (hand_l, hand_r)
    region_pts = (pair.contact_points_a, pair.contact_points_b)
    current = bigrasp.copy()

    trace = OptimTrace()
    ev = _evaluate(current, hands, obj, region_pts, weights, table_height)
    trace.totals.append(ev.total)
    trace.terms.append(dict(ev.terms))
    trace.accepted.append(True)
    if not np.isfinite(ev.total):
        trace.reason = "diverged"
        return current, trace

    # forces from the last accepted pose seed every trial's programs; trial
    # poses sit within a step of it, so the solves restart nearly converged
    seeds = tuple(h.qp.forces for h in ev.hands)
    reason = "max-iterations"
    for it in range(config.iters):
        scale = config.anneal_factor ** sum(1 for m in config.anneal_iters if it >= m)
        grads = _gradient(ev, current, hands, obj, weights)
        if not all(np.all(np.isfinite(g)) for g in grads):
            reason = "diverged"
            break
        accepted = False
        for halving in range(config.max_backtracks + 1):
            cand = _stepped(current, hands, grads, config, scale * 0.5**halving)
            cand_ev = _evaluate(
                cand,
                hands,
                obj,
                region_pts,
                weights,
                table_height,
                qp_seeds=seeds,
                reject_above=ev.total,
            )
            if cand_ev is not None and np.isfinite(cand_ev.total) and cand_ev.total < ev.total:
                current, ev, accepted = cand, cand_ev, True
                seeds = tuple(h.qp.forces for h in ev.hands)
                break
        trace.totals.append(ev.total)
        trace.terms.append(dict(ev.terms))
        trace.accepted.append(accepted)
        if len(trace.totals) > config.tol_window:
            past = trace.totals[-1 - config.tol_window]
            if past - trace.totals[-1] < config.tol * max(abs(past), 1e-30):
                reason = "converged"
                break
    trace.reason = reason
    return current, trace


# -- pre-grasp and squeeze -------------------------------------------------


@dataclass
class PregraspResult:
    pre: BiGraspPose
    squeeze: BiGraspPose
    ok: bool  # pre-grasp clearance landed inside the target window
    clearance: float  # minimum contact-to-surface distance at the pre-grasp


def _retracted(grasp: BiGraspPose, hands, s: float) -> BiGraspPose:
    poses = []
    for pose, hand in zip((grasp.left, grasp.right), hands):
        inward = quat_to_matrix(pose.r)[:, 2]
        t = pose.t - s * _RETRACT_MAX * inward
        q = hand.clamp(pose.q - s * _OPEN_FRACTION * (pose.q - hand.q_open))
        poses.append(HandPose(t=t, r=pose.r.copy(), q=q))
    return BiGraspPose(left=poses[0], right=poses[1])


def _min_clearance(bigrasp: BiGraspPose, hands, obj) -> float:
    vals = [
        obj.signed_distance(forward_kinematics(hand, pose).contact_pos).min()
        for pose, hand in zip((bigrasp.left, bigrasp.right), hands)
    ]
    return float(min(vals))


def pregrasp_and_squeeze(
    grasp: BiGraspPose, hand_l: HandModel, hand_r: HandModel, obj
) -> PregraspResult:
    """Derive the approach and execution poses bracketing a refined grasp.

    The pre-grasp retracts each wrist along its palm axis and releases
    finger flexion toward open, searching one shared scale until the
    minimum contact-to-surface distance lands in [0.009, 0.011] m; a scale
    outside [-0.3, 1] of the nominal retraction flags the candidate instead
    of widening the search. The squeeze extrapolates each parameter past
    the grasp by its pre-grasp offset: translations and joints linearly
    (joints clamped), rotations by doubling the relative rotation.
    """
    hands = (hand_l, hand_r)
    lo, hi = _PRE_WINDOW
    svals = np.linspace(-0.3, 1.0, _PRE_SCAN)
    fvals = np.array([_min_clearance(_retracted(grasp, hands, s), hands, obj) for s in svals])

    s_pick = None
    inside = (fvals >= lo) & (fvals <= hi)
    if np.any(inside):
        s_pick = float(svals[int(np.argmax(inside))])
    else:
        crossing = (fvals[:-1] - _PRE_TARGET) * (fvals[1:] - _PRE_TARGET) <= 0.0
        if np.any(crossing):
            k = int(np.argmax(crossing))
            s_lo, s_hi = float(svals[k]), float(svals[k + 1])
            f_lo = fvals[k]
            for _ in range(_PRE_BISECT):
                mid = 0.5 * (s_lo + s_hi)
                f_mid = _min_clearance(_retracted(grasp, hands, mid), hands, obj)
                if lo <= f_mid <= hi:
                    s_pick = mid
                    break
                if (f_lo - _PRE_TARGET) * (f_mid - _PRE_TARGET) <= 0.0:
                    s_hi = mid
                else:
                    s_lo, f_lo = mid, f_mid

    if s_pick is None:
        s_pick = float(svals[int(np.argmin(np.abs(fvals - _PRE_TARGET)))])
    pre = _retracted(grasp, hands, s_pick)
    clearance = _min_clearance(pre, hands, obj)
    return PregraspResult(
        pre=pre,
        squeeze=squeeze_pose(grasp, pre, hand_l, hand_r),
        ok=bool(lo <= clearance <= hi),
        clearance=clearance,
    )


def squeeze_pose(
    grasp: BiGraspPose, pre: BiGraspPose, hand_l: HandModel, hand_r: HandModel
) -> BiGraspPose:
    """Extrapolate the grasp past itself by its offset from the pre-grasp."""
    poses = []
    for g, p, hand in zip((grasp.left, grasp.right), (pre.left, pre.right), (hand_l, hand_r)):
        rel = quat_multiply(quat_conjugate(p.r), g.r)  # pre -> grasp
        poses.append(
            HandPose(
                t=2.0 * g.t - p.t,
                r=quat_normalize(quat_multiply(g.r, rel)),
                q=hand.clamp(2.0 * g.q - p.q),
            )
        )
    return BiGraspPose(left=poses[0], right=poses[1])
