"""Floating-base articulated hand: kinematics, Jacobians, collision checks.

A hand is a tree of links rooted at the palm. The wrist pose (t, r) places
the palm in the world; revolute joints place children. Collision geometry is
spheres attached to links; declared contact points are fixed in link frames.
Contacts whose link has no further joints are fingertip contacts.

Palm frame convention for the built-in hand: +z is the approach direction
(out of the palm toward the object), fingers are mounted on a circle in the
xy plane and curl toward the +z axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rotations import (
    quat_normalize,
    quat_to_matrix,
    rotation_about_axis,
    rpy_to_matrix,
)


class HandError(ValueError):
    """Raised for malformed hand descriptions."""


@dataclass
class HandModel:
    """Immutable kinematic description of one hand."""

    name: str
    links: list[str]
    joint_names: list[str]
    joint_parent: np.ndarray  # (J,) link index
    joint_child: np.ndarray  # (J,) link index
    joint_axis: np.ndarray  # (J, 3) unit, in joint frame
    joint_origin_pos: np.ndarray  # (J, 3) in parent link frame
    joint_origin_rot: np.ndarray  # (J, 3, 3)
    joint_lower: np.ndarray  # (J,)
    joint_upper: np.ndarray  # (J,)
    sphere_link: np.ndarray  # (S,) link index
    sphere_center: np.ndarray  # (S, 3) local
    sphere_radius: np.ndarray  # (S,)
    contact_link: np.ndarray  # (C,) link index
    contact_point: np.ndarray  # (C, 3) local
    chirality: str
    collision_exempt: set[tuple[int, int]] = field(default_factory=set)

    # derived
    root: int = 0
    joint_order: np.ndarray = field(default=None, repr=False)
    link_parent_joint: np.ndarray = field(default=None, repr=False)
    downstream: np.ndarray = field(default=None, repr=False)  # (J, L) bool
    fingertip_mask: np.ndarray = field(default=None, repr=False)  # (C,) bool

    def __post_init__(self) -> None:
        n_links = len(self.links)
        if np.any(self.joint_lower >= self.joint_upper):
            raise HandError("joint with lower >= upper limit")
        if np.any(self.sphere_radius <= 0.0):
            raise HandError("collision sphere with non-positive radius")
        if len(self.contact_link) < 3:
            raise HandError("need at least 3 contact points")

        children = set(self.joint_child.tolist())
        roots = [i for i in range(n_links) if i not in children]
        if len(roots) != 1:
            raise HandError("kinematic tree must have exactly one root")
        if len(children) != len(self.joint_child):
            raise HandError("link with multiple parent joints")
        self.root = roots[0]

        # topological order by walking from the root; also detects cycles
        self.link_parent_joint = np.full(n_links, -1, dtype=np.int64)
        for j, child in enumerate(self.joint_child):
            self.link_parent_joint[child] = j
        order: list[int] = []
        placed = {self.root}
        pending = list(range(len(self.joint_child)))
        while pending:
            progressed = False
            for j in list(pending):
                if int(self.joint_parent[j]) in placed:
                    order.append(j)
                    placed.add(int(self.joint_child[j]))
                    pending.remove(j)
                    progressed = True
            if not progressed:
                raise HandError("kinematic tree contains a cycle or orphan")
        self.joint_order = np.array(order, dtype=np.int64)

        # downstream[j, l]: does joint j move link l
        down = np.zeros((len(order), n_links), dtype=bool)
        for j in reversed(order):
            down[j, self.joint_child[j]] = True
        for j in self.joint_order[::-1]:
            parent_joint = self.link_parent_joint[self.joint_parent[j]]
            if parent_joint >= 0:
                down[parent_joint] |= down[j]
        self.downstream = down

        # adjacent links never collide with each other or themselves
        exempt = set(self.collision_exempt)
        for j in range(len(self.joint_child)):
            pair = (int(self.joint_parent[j]), int(self.joint_child[j]))
            exempt.add((min(pair), max(pair)))
        for l in range(n_links):
            exempt.add((l, l))
        self.collision_exempt = exempt

        has_child = set(self.joint_parent.tolist())
        self.fingertip_mask = np.array(
            [int(l) not in has_child for l in self.contact_link], dtype=bool
        )

    @property
    def n_q(self) -> int:
        return len(self.joint_axis)

    @property
    def n_contacts(self) -> int:
        return len(self.contact_link)

    @property
    def q_open(self) -> np.ndarray:
        return self.joint_lower.copy()

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.joint_lower, self.joint_upper)


@dataclass
class HandPose:
    """Wrist translation, wrist rotation (unit quaternion wxyz), joints."""

    t: np.ndarray
    r: np.ndarray
    q: np.ndarray

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=np.float64)
        self.r = np.asarray(self.r, dtype=np.float64)
        self.q = np.asarray(self.q, dtype=np.float64)
        if abs(np.linalg.norm(self.r) - 1.0) > 1e-6:
            raise HandError("wrist quaternion must be unit")
        self.r = quat_normalize(self.r)

    def copy(self) -> "HandPose":
        return HandPose(self.t.copy(), self.r.copy(), self.q.copy())


@dataclass
class BiGraspPose:
    left: HandPose
    right: HandPose

    def copy(self) -> "BiGraspPose":
        return BiGraspPose(self.left.copy(), self.right.copy())


@dataclass
class FkResult:
    link_rot: np.ndarray  # (L, 3, 3)
    link_pos: np.ndarray  # (L, 3)
    contact_pos: np.ndarray  # (C, 3)
    sphere_pos: np.ndarray  # (S, 3)


def forward_kinematics(hand: HandModel, pose: HandPose) -> FkResult:
    """World transforms for all links, contacts, and collision spheres."""
    n_links = len(hand.links)
    rot = np.empty((n_links, 3, 3))
    pos = np.empty((n_links, 3))
    rot[hand.root] = quat_to_matrix(pose.r)
    pos[hand.root] = pose.t
    for j in hand.joint_order:
        p = hand.joint_parent[j]
        c = hand.joint_child[j]
        joint_rot = rot[p] @ hand.joint_origin_rot[j]
        joint_pos = pos[p] + rot[p] @ hand.joint_origin_pos[j]
        rot[c] = joint_rot @ rotation_about_axis(hand.joint_axis[j], pose.q[j])
        pos[c] = joint_pos
    contact_pos = (
        np.einsum("cij,cj->ci", rot[hand.contact_link], hand.contact_point)
        + pos[hand.contact_link]
    )
    sphere_pos = (
        np.einsum("sij,sj->si", rot[hand.sphere_link], hand.sphere_center)
        + pos[hand.sphere_link]
    )
    return FkResult(link_rot=rot, link_pos=pos, contact_pos=contact_pos, sphere_pos=sphere_pos)


def point_jacobians(
    hand: HandModel, pose: HandPose, fk: FkResult, link_ids: np.ndarray, world_points: np.ndarray
) -> np.ndarray:
    """d(world point)/d(t, wrist rotvec increment, q) for link-fixed points.

    Rotation columns are derivatives with respect to a body-frame axis-angle
    increment delta applied as r * exp(delta), so column k is
    (R e_k) x (p - t).
    """
    n = len(world_points)
    jac = np.zeros((n, 3, 6 + hand.n_q))
    jac[:, :, :3] = np.eye(3)
    wrist_rot = fk.link_rot[hand.root]
    rel = world_points - fk.link_pos[hand.root]
    for k in range(3):
        jac[:, :, 3 + k] = np.cross(wrist_rot[:, k], rel)
    for j in hand.joint_order:
        moved = hand.downstream[j, link_ids]
        if not np.any(moved):
            continue
        p = hand.joint_parent[j]
        axis_w = fk.link_rot[p] @ hand.joint_origin_rot[j] @ hand.joint_axis[j]
        origin_w = fk.link_pos[p] + fk.link_rot[p] @ hand.joint_origin_pos[j]
        jac[moved, :, 6 + j] = np.cross(axis_w, world_points[moved] - origin_w)
    return jac


def contact_jacobian(hand: HandModel, pose: HandPose, contact_id: int) -> np.ndarray:
    """3 x (6 + n_q) Jacobian of one contact point's world position."""
    fk = forward_kinematics(hand, pose)
    link = hand.contact_link[contact_id : contact_id + 1]
    point = fk.contact_pos[contact_id : contact_id + 1]
    return point_jacobians(hand, pose, fk, link, point)[0]


def contact_jacobians(hand: HandModel, pose: HandPose, fk: FkResult) -> np.ndarray:
    return point_jacobians(hand, pose, fk, hand.contact_link, fk.contact_pos)


def sphere_jacobians(hand: HandModel, pose: HandPose, fk: FkResult) -> np.ndarray:
    return point_jacobians(hand, pose, fk, hand.sphere_link, fk.sphere_pos)


# -- collisions ------------------------------------------------------------


@dataclass
class CollisionItem:
    kind: str  # "self", "inter", "object", "table"
    index_a: int
    index_b: int  # -1 for object/table entries
    depth: float


@dataclass
class CollisionReport:
    items: list[CollisionItem]

    @property
    def empty(self) -> bool:
        return not self.items

    def max_depth(self, kind: str | None = None) -> float:
        depths = [it.depth for it in self.items if kind is None or it.kind == kind]
        return max(depths, default=0.0)


def _sphere_pair_overlaps(centers_a, radii_a, centers_b, radii_b, upper_only: bool):
    d = np.linalg.norm(centers_a[:, None, :] - centers_b[None, :, :], axis=2)
    depth = radii_a[:, None] + radii_b[None, :] - d
    hits = np.argwhere(depth > 0.0)
    out = []
    for i, j in hits:
        if upper_only and i >= j:  # same set: each unordered pair once
            continue
        out.append((int(i), int(j), float(depth[i, j])))
    return out


def collision_check(
    hand_l: HandModel,
    pose_l: HandPose,
    hand_r: HandModel,
    pose_r: HandPose,
    obj=None,
    table_height: float | None = None,
) -> CollisionReport:
    """All sphere overlaps: intra-hand, inter-hand, against object SDF, table.

    ``obj`` is anything with a ``signed_distance(points) -> (n,)`` method.
    Depths are in meters; entries appear only for positive depth.
    """
    fks = (forward_kinematics(hand_l, pose_l), forward_kinematics(hand_r, pose_r))
    hands = (hand_l, hand_r)
    bases = (0, len(hand_l.sphere_radius))  # sphere ids unique across the pair
    items: list[CollisionItem] = []

    for base, h, fk in zip(bases, hands, fks):
        hits = _sphere_pair_overlaps(
            fk.sphere_pos, h.sphere_radius, fk.sphere_pos, h.sphere_radius, upper_only=True
        )
        for i, j, depth in hits:
            la, lb = int(h.sphere_link[i]), int(h.sphere_link[j])
            if (min(la, lb), max(la, lb)) in h.collision_exempt:
                continue
            items.append(CollisionItem("self", base + i, base + j, depth))

    for i, j, depth in _sphere_pair_overlaps(
        fks[0].sphere_pos, hand_l.sphere_radius, fks[1].sphere_pos, hand_r.sphere_radius, False
    ):
        items.append(CollisionItem("inter", i, bases[1] + j, depth))

    for base, h, fk in zip(bases, hands, fks):
        if obj is not None:
            sdf = np.asarray(obj.signed_distance(fk.sphere_pos))
            for i in np.flatnonzero(sdf < h.sphere_radius):
                items.append(
                    CollisionItem("object", base + int(i), -1, float(h.sphere_radius[i] - sdf[i]))
                )
        if table_height is not None:
            clearance = fk.sphere_pos[:, 2] - h.sphere_radius - table_height
            for i in np.flatnonzero(clearance < 0.0):
                items.append(CollisionItem("table", base + int(i), -1, float(-clearance[i])))

    return CollisionReport(items=items)


# -- loading, serialization, mirroring ------------------------------------


def _hand_from_dict(data: dict, name: str) -> HandModel:
    try:
        links = [l if isinstance(l, str) else l["name"] for l in data["links"]]
        link_index = {l: i for i, l in enumerate(links)}
        joints = data.get("joints", [])
        spheres = data["collision_spheres"]
        contacts = data["contacts"]
        chirality = data["chirality"]
    except KeyError as exc:
        raise HandError(f"hand description missing field {exc}") from exc
    if len(set(links)) != len(links):
        raise HandError("duplicate link name")

    def li(name: str) -> int:
        if name not in link_index:
            raise HandError(f"unknown link {name!r}")
        return link_index[name]

    n_j = len(joints)
    axis = np.zeros((n_j, 3))
    origin_pos = np.zeros((n_j, 3))
    origin_rot = np.zeros((n_j, 3, 3))
    lower = np.zeros(n_j)
    upper = np.zeros(n_j)
    parent = np.zeros(n_j, dtype=np.int64)
    child = np.zeros(n_j, dtype=np.int64)
    names = []
    for k, j in enumerate(joints):
        parent[k] = li(j["parent"])
        child[k] = li(j["child"])
        a = np.asarray(j["axis"], dtype=np.float64)
        norm = np.linalg.norm(a)
        if norm < 1e-12:
            raise HandError("zero joint axis")
        axis[k] = a / norm
        origin = j.get("origin", {})
        origin_pos[k] = np.asarray(origin.get("xyz", [0, 0, 0]), dtype=np.float64)
        origin_rot[k] = rpy_to_matrix(np.asarray(origin.get("rpy", [0, 0, 0]), dtype=np.float64))
        limit = j.get("limit")
        if limit is None:
            raise HandError("joint without limits")
        lower[k] = float(limit["lower"])
        upper[k] = float(limit["upper"])
        names.append(j.get("name", f"joint{k}"))

    exempt = set()
    for a, b in data.get("collision_exempt", []):
        ia, ib = li(a), li(b)
        exempt.add((min(ia, ib), max(ia, ib)))

    return HandModel(
        name=name,
        links=links,
        joint_names=names,
        joint_parent=parent,
        joint_child=child,
        joint_axis=axis,
        joint_origin_pos=origin_pos,
        joint_origin_rot=origin_rot,
        joint_lower=lower,
        joint_upper=upper,
        sphere_link=np.array([li(s["link"]) for s in spheres], dtype=np.int64),
        sphere_center=np.array([s["center"] for s in spheres], dtype=np.float64).reshape(-1, 3),
        sphere_radius=np.array([s["radius"] for s in spheres], dtype=np.float64),
        contact_link=np.array([li(c["link"]) for c in contacts], dtype=np.int64),
        contact_point=np.array([c["point"] for c in contacts], dtype=np.float64).reshape(-1, 3),
        chirality=chirality,
        collision_exempt=exempt,
    )


def load_hand(path: str | Path) -> HandModel:
    """Load and validate a hand description (JSON schema, radians/meters)."""
    path = Path(path)
    if not path.is_file():
        raise HandError(f"hand file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise HandError(f"invalid JSON in {path}: {exc}") from exc
    return _hand_from_dict(data, name=path.stem)


def hand_to_dict(hand: HandModel) -> dict:
    exempt_named = sorted(
        [hand.links[a], hand.links[b]]
        for a, b in hand.collision_exempt
        if a != b and (min(a, b), max(a, b)) not in _derived_adjacent(hand)
    )
    return {
        "chirality": hand.chirality,
        "links": list(hand.links),
        "joints": [
            {
                "name": hand.joint_names[j],
                "parent": hand.links[hand.joint_parent[j]],
                "child": hand.links[hand.joint_child[j]],
                "axis": hand.joint_axis[j].tolist(),
                "origin": {
                    "xyz": hand.joint_origin_pos[j].tolist(),
                    "rpy": _matrix_to_rpy(hand.joint_origin_rot[j]),
                },
                "limit": {"lower": float(hand.joint_lower[j]), "upper": float(hand.joint_upper[j])},
            }
            for j in range(hand.n_q)
        ],
        "collision_spheres": [
            {
                "link": hand.links[hand.sphere_link[s]],
                "center": hand.sphere_center[s].tolist(),
                "radius": float(hand.sphere_radius[s]),
            }
            for s in range(len(hand.sphere_radius))
        ],
        "contacts": [
            {"link": hand.links[hand.contact_link[c]], "point": hand.contact_point[c].tolist()}
            for c in range(hand.n_contacts)
        ],
        "collision_exempt": exempt_named,
    }


def _derived_adjacent(hand: HandModel) -> set[tuple[int, int]]:
    out = set()
    for j in range(hand.n_q):
        a, b = int(hand.joint_parent[j]), int(hand.joint_child[j])
        out.add((min(a, b), max(a, b)))
    return out


def _matrix_to_rpy(m: np.ndarray) -> list[float]:
    sy = -m[2, 0]
    pitch = np.arcsin(np.clip(sy, -1.0, 1.0))
    if abs(sy) < 1.0 - 1e-9:
        roll = np.arctan2(m[2, 1], m[2, 2])
        yaw = np.arctan2(m[1, 0], m[0, 0])
    else:
        roll = np.arctan2(-m[1, 2], m[1, 1])
        yaw = 0.0
    return [float(roll), float(pitch), float(yaw)]


def write_hand_json(hand: HandModel, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(hand_to_dict(hand), indent=2) + "\n")
    return path


def mirrored(hand: HandModel) -> HandModel:
    """Opposite-chirality twin: reflection through the palm yz plane.

    Positions negate x; frame rotations conjugate by the reflection; joint
    axes map to -(S a) so joint angles keep their meaning (same q flexes the
    mirrored finger the mirrored way).
    """
    s = np.array([-1.0, 1.0, 1.0])
    smat = np.diag(s)
    return HandModel(
        name=hand.name + "_mirror",
        links=list(hand.links),
        joint_names=list(hand.joint_names),
        joint_parent=hand.joint_parent.copy(),
        joint_child=hand.joint_child.copy(),
        joint_axis=-(hand.joint_axis * s),
        joint_origin_pos=hand.joint_origin_pos * s,
        joint_origin_rot=np.einsum("ij,njk,kl->nil", smat, hand.joint_origin_rot, smat),
        joint_lower=hand.joint_lower.copy(),
        joint_upper=hand.joint_upper.copy(),
        sphere_link=hand.sphere_link.copy(),
        sphere_center=hand.sphere_center * s,
        sphere_radius=hand.sphere_radius.copy(),
        contact_link=hand.contact_link.copy(),
        contact_point=hand.contact_point * s,
        chirality="right" if hand.chirality == "left" else "left",
        collision_exempt={(a, b) for a, b in hand.collision_exempt if a != b},
    )


# -- built-in hand ---------------------------------------------------------

_FINGER_AZIMUTHS = (np.pi / 2.0, np.pi * 7.0 / 6.0, np.pi * 11.0 / 6.0)
_PROX_LEN = 0.09
_DIST_LEN = 0.08
_BASE_RADIUS = 0.05


def default_hand(chirality: str = "left") -> HandModel:
    """Three-finger radial claw: 6 floating + 6 joint DOF, 6 contacts.

    Fingers sit on a circle in the palm plane and curl toward the +z axis.
    The open pose (lower limits) lays fingers flat in the palm plane so the
    open hand never reaches past its own palm standoff, whatever the object
    looks like. One fingertip and one mid-phalanx contact per finger, each
    placed on a collision-sphere surface facing the grasp axis.
    """
    links = ["palm"]
    joints = []
    spheres = [
        {"link": "palm", "center": [0.0, 0.0, -0.012], "radius": 0.025},
        {"link": "palm", "center": [0.035, 0.0, -0.01], "radius": 0.018},
        {"link": "palm", "center": [-0.0175, 0.0303, -0.01], "radius": 0.018},
        {"link": "palm", "center": [-0.0175, -0.0303, -0.01], "radius": 0.018},
    ]
    contacts = []
    for f, az in enumerate(_FINGER_AZIMUTHS):
        radial = np.array([np.cos(az), np.sin(az), 0.0])
        flex_axis = np.cross(radial, [0.0, 0.0, 1.0])  # curls the finger inward
        prox, dist = f"f{f}_prox", f"f{f}_dist"
        links += [prox, dist]
        joints.append(
            {
                "name": f"f{f}_mcp",
                "parent": "palm",
                "child": prox,
                "axis": flex_axis.tolist(),
                "origin": {"xyz": (radial * _BASE_RADIUS).tolist(), "rpy": [0, 0, 0]},
                "limit": {"lower": -1.5707963267948966, "upper": 1.35},
            }
        )
        joints.append(
            {
                "name": f"f{f}_pip",
                "parent": prox,
                "child": dist,
                "axis": flex_axis.tolist(),
                "origin": {"xyz": [0.0, 0.0, _PROX_LEN], "rpy": [0, 0, 0]},
                "limit": {"lower": 0.0, "upper": 1.9},
            }
        )
        inner = (-radial).tolist()
        for z in (0.02, 0.05, 0.078):
            spheres.append({"link": prox, "center": [0.0, 0.0, z], "radius": 0.013})
        for z in (0.025, 0.062):
            spheres.append({"link": dist, "center": [0.0, 0.0, z], "radius": 0.012})
        mid_center, mid_r = [0.0, 0.0, 0.05], 0.013
        tip_center, tip_r = [0.0, 0.0, 0.062], 0.012
        contacts.append(
            {"link": prox, "point": (np.array(mid_center) + mid_r * np.array(inner)).tolist()}
        )
        contacts.append(
            {"link": dist, "point": (np.array(tip_center) + tip_r * np.array(inner)).tolist()}
        )

    data = {
        "chirality": "left",
        "links": links,
        "joints": joints,
        "collision_spheres": spheres,
        "contacts": contacts,
    }
    hand = _hand_from_dict(data, name="claw3")
    if chirality == "right":
        hand = mirrored(hand)
        hand.name = "claw3_right"
    elif chirality != "left":
        raise HandError(f"unknown chirality {chirality!r}")
    return hand


def default_hand_pair() -> tuple[HandModel, HandModel]:
    return default_hand("left"), default_hand("right")
