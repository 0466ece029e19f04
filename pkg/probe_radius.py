"""Optimize outcomes vs sphere scale, real region pipeline end to end."""
import time

import numpy as np

from bigrasp import shapes
from bigrasp.geometry import dilated_convex_hull, sample_surface
from bigrasp.handkin import default_hand_pair
from bigrasp.initpose import initialize_bigrasp
from bigrasp.optim import EnergyWeights, optimize
from bigrasp.regions import RegionParams, select_region_pairs

HANDS = default_hand_pair()
weights = EnergyWeights()
thresh = 0.05 * weights.beta**2

for scale in (0.75, 0.80, 0.90, 1.0):
    r = 0.15 * scale
    mesh = shapes.icosphere(0.15, 3).scaled(scale)
    samples = sample_surface(mesh, 1024, seed=7)
    params = RegionParams(k_anchors=64, k_neighbors=96, m_directions=200)
    pairs = select_region_pairs(samples, params, seed=1)
    pair = pairs[0]
    hull = dilated_convex_hull(samples, 0.02)
    wins = 0
    qs = []
    t0 = time.time()
    for seed in range(5):
        g0 = initialize_bigrasp(pair, *HANDS, hull, seed=seed)
        g, trace = optimize(g0, *HANDS, mesh, pair, weights)
        terms = trace.terms[-1]
        qm = max(terms["q_left"], terms["q_right"])
        qs.append(qm)
        wins += qm <= thresh
    print(
        f"scale {scale:.2f} (r={r:.4f}): wins {wins}/5, Qmax per seed "
        f"{[f'{q:.2e}' for q in qs]}  {time.time()-t0:.0f}s",
        flush=True,
    )
