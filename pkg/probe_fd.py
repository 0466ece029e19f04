"""Central-FD check of total_energy gradients with the shading normal field."""
import numpy as np

from bigrasp import shapes
from bigrasp.geometry import concavity_score, dilated_convex_hull, region_of, sample_surface
from bigrasp.handkin import BiGraspPose, HandPose, default_hand_pair
from bigrasp.initpose import initialize_bigrasp
from bigrasp.optim import EnergyWeights, total_energy
from bigrasp.regions import RegionPair
from bigrasp.rotations import quat_from_rotvec, quat_multiply, quat_normalize

HANDS = default_hand_pair()


def antipodal_sphere_pair():
    mesh = shapes.icosphere(0.15, 3)
    samples = sample_surface(mesh, 4096, seed=7)
    hull = dilated_convex_hull(samples, 0.02)

    def cap(center):
        idx = int(np.argmin(np.linalg.norm(samples.points - np.asarray(center), axis=1)))
        return region_of(samples, idx, radius=0.05, k_max=64)

    ra, rb = cap([0.15, 0.0, 0.0]), cap([-0.15, 0.0, 0.0])
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
h = 1e-6
rng = np.random.default_rng(3)


def perturbed(bg, side, k, delta):
    pose = (bg.left, bg.right)[side]
    t, r, q = pose.t.copy(), pose.r.copy(), pose.q.copy()
    if k < 3:
        t[k] += delta
    elif k < 6:
        inc = np.zeros(3)
        inc[k - 3] = delta
        r = quat_normalize(quat_multiply(r, quat_from_rotvec(inc)))
    else:
        q[k - 6] += delta
    new = HandPose(t=t, r=r, q=q)
    return BiGraspPose(left=new if side == 0 else bg.left, right=new if side == 1 else bg.right)


worst = 0.0
n_ok = 0
n_tot = 0
for trial in range(8):
    g0 = initialize_bigrasp(pair, *HANDS, hull, seed=trial)
    # nudge off the initialization manifold
    g0 = perturbed(g0, 0, 0, rng.normal() * 1e-3)
    _, _, grads = total_energy(g0, *HANDS, mesh, pair, weights)
    dim = 6 + len(g0.left.q)
    for side in (0, 1):
        for k in range(dim):
            f_p = total_energy(perturbed(g0, side, k, h), *HANDS, mesh, pair, weights)[0]
            f_m = total_energy(perturbed(g0, side, k, -h), *HANDS, mesh, pair, weights)[0]
            num = (f_p - f_m) / (2 * h)
            ana = grads[side][k]
            rel = abs(num - ana) / max(abs(num), abs(ana), 1e-6)
            n_tot += 1
            if rel <= 1e-2:
                n_ok += 1
            else:
                worst = max(worst, rel)
print(f"FD: {n_ok}/{n_tot} within 1e-2, worst outlier rel {worst:.2e}")
