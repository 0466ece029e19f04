"""Geometry of a converged grasp: contact wrap angles and projected-exact Q."""
import numpy as np

from bigrasp import shapes
from bigrasp.geometry import concavity_score, dilated_convex_hull, region_of, sample_surface
from bigrasp.handkin import default_hand_pair, forward_kinematics
from bigrasp.initpose import initialize_bigrasp
from bigrasp.optim import EnergyWeights, optimize
from bigrasp.regions import RegionPair
from bigrasp.wrench import ContactState, qp_energy

HANDS = default_hand_pair()
R = 0.15


def antipodal_sphere_pair():
    mesh = shapes.icosphere(R, 3)
    samples = sample_surface(mesh, 4096, seed=7)
    hull = dilated_convex_hull(samples, 0.02)

    def cap(center):
        idx = int(np.argmin(np.linalg.norm(samples.points - np.asarray(center), axis=1)))
        return region_of(samples, idx, radius=0.05, k_max=64)

    ra, rb = cap([R, 0.0, 0.0]), cap([-R, 0.0, 0.0])
    pair = RegionPair(
        region_a=ra,
        region_b=rb,
        score=1.0,
        contact_points_a=samples.points[ra.member_indices[:5]],
        contact_normals_a=-samples.normals[ra.member_indices[:5]],
        contact_points_b=samples.points[rb.member_indices[:5]],
        contact_normals_b=-samples.normals[rb.member_indices[:5]],
        concavity_a=concavity_score(ra, samples),
        concavity_b=concavity_score(rb, samples),
    )
    return mesh, pair, hull


mesh, pair, hull = antipodal_sphere_pair()
weights = EnergyWeights()
for seed in (4, 13):
    g0 = initialize_bigrasp(pair, *HANDS, hull, seed=seed)
    g, trace = optimize(g0, *HANDS, mesh, pair, weights)
    print(f"seed {seed}: terms {dict((k, f'{v:.3e}') for k, v in trace.terms[-1].items())}")
    for side, (pose, hand) in enumerate(zip((g.left, g.right), HANDS)):
        fk = forward_kinematics(hand, pose)
        pts = fk.contact_pos
        sd = mesh.signed_distance(pts)
        # wrap angle about the mean contact direction
        axis = pts.mean(axis=0)
        axis /= np.linalg.norm(axis)
        ang = np.degrees(np.arccos(np.clip(pts @ axis / np.linalg.norm(pts, axis=1), -1, 1)))
        # exact-sphere Q after projecting contacts radially
        proj = pts / np.linalg.norm(pts, axis=1, keepdims=True) * R
        normals = -proj / R
        contacts = ContactState.from_contacts(proj, normals, 0.6, torque_center=np.zeros(3))
        qp = qp_energy(contacts, 0.1, 0.2, max_iter=30000, tol=1e-10)
        print(
            f"  hand {side}: |sdf| max {np.abs(sd).max()*1000:.2f} mm, wrap angles "
            f"{np.round(np.sort(ang), 1)}, projected-exact Q {qp.energy:.3e} "
            f"({qp.energy/0.01:.3f} b^2)"
        )
