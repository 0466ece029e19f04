"""Hand model loading, forward kinematics, Jacobians, and collision checks."""

import numpy as np
import pytest

from bigrasp import handkin
from bigrasp.handkin import (
    BiGraspPose,
    HandError,
    HandModel,
    HandPose,
    collision_check,
    contact_jacobian,
    default_hand,
    default_hand_pair,
    forward_kinematics,
    hand_to_dict,
    load_hand,
    mirrored,
    write_hand_json,
)
from bigrasp.rotations import (
    quat_from_rotvec,
    quat_identity,
    quat_multiply,
    quat_to_matrix,
)
from bigrasp import shapes


def identity_pose(hand: HandModel) -> HandPose:
    return HandPose(np.zeros(3), quat_identity(), np.zeros(hand.n_q))


def minimal_hand(contact_points, joints=None, extra_links=None, spheres=None) -> HandModel:
    data = {
        "chirality": "left",
        "links": ["palm"] + (extra_links or []),
        "joints": joints or [],
        "collision_spheres": spheres
        or [{"link": "palm", "center": [0, 0, 0], "radius": 0.01}],
        "contacts": [{"link": link, "point": p} for link, p in contact_points],
    }
    return handkin._hand_from_dict(data, name="test")


class TestLoadHand:
    def test_default_hand_shape(self, tmp_path):
        hand = default_hand("left")
        path = write_hand_json(hand, tmp_path / "claw.json")
        loaded = load_hand(path)
        assert loaded.n_q == 6
        assert loaded.n_contacts == 6
        assert int(loaded.fingertip_mask.sum()) == 3
        assert loaded.chirality == "left"
        np.testing.assert_allclose(loaded.joint_axis, hand.joint_axis, atol=1e-12)
        np.testing.assert_allclose(loaded.joint_origin_rot, hand.joint_origin_rot, atol=1e-12)

    def test_bad_limits_rejected(self):
        hand_dict = hand_to_dict(default_hand())
        hand_dict["joints"][0]["limit"] = {"lower": 1.0, "upper": 1.0}
        with pytest.raises(HandError):
            handkin._hand_from_dict(hand_dict, "bad")

    def test_cycle_rejected(self):
        with pytest.raises(HandError):
            minimal_hand(
                [("palm", [0, 0, 0])] * 3,
                joints=[
                    {"parent": "palm", "child": "a", "axis": [0, 0, 1],
                     "limit": {"lower": 0, "upper": 1}},
                    {"parent": "a", "child": "palm", "axis": [0, 0, 1],
                     "limit": {"lower": 0, "upper": 1}},
                ],
                extra_links=["a"],
            )

    def test_too_few_contacts_rejected(self):
        with pytest.raises(HandError):
            minimal_hand([("palm", [0, 0, 0])] * 2)

    def test_mirror_negates_contact_x(self):
        hand = default_hand("left")
        m = mirrored(hand)
        np.testing.assert_allclose(
            m.contact_point[:, 0], -hand.contact_point[:, 0], atol=1e-15
        )
        np.testing.assert_allclose(m.contact_point[:, 1:], hand.contact_point[:, 1:])
        assert m.chirality == "right"


class TestForwardKinematics:
    def test_identity_pose_contact(self):
        hand = minimal_hand([("palm", [0, 0, 0.01]), ("palm", [0, 0, 0]), ("palm", [0.01, 0, 0])])
        fk = forward_kinematics(hand, identity_pose(hand))
        np.testing.assert_allclose(fk.contact_pos[0], [0, 0, 0.01], atol=1e-15)

    def test_rigid_translation(self):
        hand = default_hand()
        pose = identity_pose(hand)
        fk0 = forward_kinematics(hand, pose)
        shifted = HandPose(np.array([0.1, 0, 0]), quat_identity(), pose.q)
        fk1 = forward_kinematics(hand, shifted)
        np.testing.assert_allclose(fk1.contact_pos - fk0.contact_pos, 0.1 * np.tile([1, 0, 0], (6, 1)), atol=1e-15)

    def test_revolute_quarter_turn(self):
        hand = minimal_hand(
            [("child", [0.01, 0, 0]), ("palm", [0, 0, 0]), ("palm", [0.01, 0, 0])],
            joints=[
                {"parent": "palm", "child": "child", "axis": [0, 0, 1],
                 "limit": {"lower": -3.2, "upper": 3.2}}
            ],
            extra_links=["child"],
        )
        pose = HandPose(np.zeros(3), quat_identity(), np.array([np.pi / 2]))
        fk = forward_kinematics(hand, pose)
        np.testing.assert_allclose(fk.contact_pos[0], [0, 0.01, 0], atol=1e-12)

    def test_wrist_equivariance(self):
        hand = default_hand()
        rng = np.random.default_rng(0)
        q = hand.joint_lower + rng.random(hand.n_q) * (hand.joint_upper - hand.joint_lower)
        base = HandPose(rng.normal(size=3), quat_from_rotvec(rng.normal(size=3)), q)
        fk_base = forward_kinematics(hand, base)

        delta_r = quat_from_rotvec(rng.normal(size=3))
        delta_t = rng.normal(size=3)
        rot = quat_to_matrix(delta_r)
        composed = HandPose(rot @ base.t + delta_t, quat_multiply(delta_r, base.r), q)
        fk_comp = forward_kinematics(hand, composed)
        np.testing.assert_allclose(
            fk_comp.contact_pos, fk_base.contact_pos @ rot.T + delta_t, atol=1e-12
        )
        np.testing.assert_allclose(
            fk_comp.sphere_pos, fk_base.sphere_pos @ rot.T + delta_t, atol=1e-12
        )

    def test_mirror_fk_consistency(self):
        # asymmetric azimuths so the mirror is a genuinely different model
        hand = default_hand("left")
        m = mirrored(hand)
        s = np.array([-1.0, 1.0, 1.0])
        rng = np.random.default_rng(3)
        for _ in range(5):
            q = hand.joint_lower + rng.random(hand.n_q) * (hand.joint_upper - hand.joint_lower)
            t = rng.normal(size=3)
            r = quat_from_rotvec(rng.normal(size=3))
            rot = quat_to_matrix(r)
            rot_m = np.diag(s) @ rot @ np.diag(s)
            pose = HandPose(t, r, q)
            from bigrasp.rotations import matrix_to_quat

            pose_m = HandPose(t * s, matrix_to_quat(rot_m), q)
            fk = forward_kinematics(hand, pose)
            fk_m = forward_kinematics(m, pose_m)
            np.testing.assert_allclose(fk_m.contact_pos, fk.contact_pos * s, atol=1e-12)


class TestContactJacobian:
    def test_translation_block_identity(self):
        hand = default_hand()
        jac = contact_jacobian(hand, identity_pose(hand), 0)
        np.testing.assert_allclose(jac[:, :3], np.eye(3), atol=1e-15)

    def test_upstream_joint_column_zero(self):
        hand = default_hand()
        rng = np.random.default_rng(1)
        pose = HandPose(
            rng.normal(size=3),
            quat_from_rotvec(rng.normal(size=3)),
            hand.clamp(rng.normal(size=hand.n_q)),
        )
        # contact 0 is on finger 0; finger 1 and 2 joints must not move it
        jac = contact_jacobian(hand, pose, 0)
        np.testing.assert_allclose(jac[:, 6 + 2 :], 0.0, atol=1e-15)

    def test_matches_finite_differences(self):
        hand = default_hand()
        rng = np.random.default_rng(7)
        h = 1e-6
        for _ in range(3):
            q = hand.joint_lower + rng.random(hand.n_q) * (hand.joint_upper - hand.joint_lower)
            pose = HandPose(rng.normal(size=3) * 0.1, quat_from_rotvec(rng.normal(size=3)), q)
            for cid in range(hand.n_contacts):
                jac = contact_jacobian(hand, pose, cid)
                fd = np.zeros_like(jac)
                for k in range(6 + hand.n_q):
                    for sign, col in ((1.0, 0), (-1.0, 1)):
                        p = pose.copy()
                        if k < 3:
                            p.t = p.t.copy()
                            p.t[k] += sign * h
                        elif k < 6:
                            delta = np.zeros(3)
                            delta[k - 3] = sign * h
                            p.r = quat_multiply(p.r, quat_from_rotvec(delta))
                        else:
                            p.q = p.q.copy()
                            p.q[k - 6] += sign * h
                        val = forward_kinematics(hand, p).contact_pos[cid]
                        fd[:, k] += sign * val / (2 * h)
                np.testing.assert_allclose(jac, fd, atol=1e-6)


class TestCollisionCheck:
    def test_far_apart_clean(self):
        left, right = default_hand_pair()
        pl = HandPose(np.array([-0.5, 0, 0.5]), quat_identity(), np.zeros(6))
        pr = HandPose(np.array([0.5, 0, 0.5]), quat_identity(), np.zeros(6))
        report = collision_check(left, pl, right, pr, obj=None, table_height=0.0)
        assert report.empty

    def test_coincident_hands_interpenetrate(self):
        left, right = default_hand_pair()
        pose = identity_pose(left)
        report = collision_check(left, pose, right, pose, obj=None, table_height=None)
        kinds = {it.kind for it in report.items}
        assert "inter" in kinds
        assert report.max_depth("inter") > 0.0

    def test_object_penetration_depth_arithmetic(self):
        obj = shapes.box((0.4, 0.4, 0.4))
        hand = minimal_hand(
            [("palm", [0, 0, 0])] * 3,
            spheres=[{"link": "palm", "center": [0, 0, 0], "radius": 0.01}],
        )
        pose = HandPose(np.array([0.195, 0.0, 0.0]), quat_identity(), np.zeros(0))
        far = HandPose(np.array([5.0, 5.0, 5.0]), quat_identity(), np.zeros(0))
        report = collision_check(hand, pose, hand, far, obj=obj, table_height=None)
        objects = [it for it in report.items if it.kind == "object"]
        assert len(objects) == 1
        assert objects[0].depth == pytest.approx(0.015, abs=1e-12)

    def test_swap_symmetry(self):
        left, right = default_hand_pair()
        rng = np.random.default_rng(5)
        pl = HandPose(rng.normal(size=3) * 0.05, quat_from_rotvec(rng.normal(size=3)), left.clamp(rng.normal(size=6)))
        pr = HandPose(rng.normal(size=3) * 0.05, quat_from_rotvec(rng.normal(size=3)), right.clamp(rng.normal(size=6)))
        a = collision_check(left, pl, right, pr)
        b = collision_check(right, pr, left, pl)
        pairs_a = sorted((it.index_a, it.index_b - len(left.sphere_radius), round(it.depth, 12))
                         for it in a.items if it.kind == "inter")
        pairs_b = sorted((it.index_b - len(right.sphere_radius), it.index_a, round(it.depth, 12))
                         for it in b.items if it.kind == "inter")
        assert pairs_a == pairs_b

    def test_table_penetration(self):
        hand = default_hand()
        pose = HandPose(np.array([0.0, 0.0, 0.0]), quat_identity(), np.zeros(6))
        report = collision_check(hand, pose, hand, HandPose(np.array([0, 0, 2.0]), quat_identity(), np.zeros(6)), table_height=0.0)
        assert any(it.kind == "table" for it in report.items)

    def test_adjacent_links_exempt(self):
        # touching palm and proximal spheres must not be reported
        hand = default_hand()
        pose = identity_pose(hand)
        far = HandPose(np.array([0, 0, 9.0]), quat_identity(), np.zeros(6))
        report = collision_check(hand, pose, hand, far)
        assert report.max_depth("self") == 0.0


def test_open_pose_is_flat_and_clear():
    # fingers at the lower limit lie in the palm plane: nothing ahead of the
    # palm standoff plane except the object-facing contacts at z ~ 0
    hand = default_hand()
    pose = HandPose(np.zeros(3), quat_identity(), hand.q_open)
    fk = forward_kinematics(hand, pose)
    forward_extent = fk.sphere_pos[:, 2] + hand.sphere_radius
    assert forward_extent.max() <= 0.016


def test_bigrasp_pose_copy_independent():
    left, right = default_hand_pair()
    bg = BiGraspPose(
        HandPose(np.zeros(3), quat_identity(), np.zeros(6)),
        HandPose(np.ones(3), quat_identity(), np.zeros(6)),
    )
    c = bg.copy()
    c.left.t[0] = 5.0
    assert bg.left.t[0] == 0.0
