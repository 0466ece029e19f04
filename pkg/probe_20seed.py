"""20-seed optimize runs on the antipodal sphere; count per-hand Q wins."""
import time

import numpy as np

from bigrasp import shapes
from bigrasp.geometry import concavity_score, dilated_convex_hull, region_of, sample_surface
from bigrasp.handkin import default_hand_pair
from bigrasp.initpose import initialize_bigrasp
from bigrasp.optim import EnergyWeights, optimize
from bigrasp.regions import RegionPair

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
thresh = 0.05 * weights.beta**2
wins = 0
t_all = time.time()
for seed in range(20):
    t0 = time.time()
    g0 = initialize_bigrasp(pair, *HANDS, hull, seed=seed)
    g, trace = optimize(g0, *HANDS, mesh, pair, weights)
    terms = trace.terms[-1]
    ql, qr = terms["q_left"], terms["q_right"]
    win = max(ql, qr) <= thresh
    wins += win
    print(
        f"seed {seed:2d}: Q_l={ql:.3e} Q_r={qr:.3e} rows={len(trace.totals)}"
        f" reason={trace.reason} {'WIN ' if win else 'lose'} {time.time() - t0:5.1f}s",
        flush=True,
    )
print(f"wins {wins}/20  threshold {thresh:g}  total {time.time() - t_all:.0f}s")
