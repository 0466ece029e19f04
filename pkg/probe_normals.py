"""FD check of the interpolated normal field and its jacobian."""
import numpy as np

from bigrasp import shapes

rng = np.random.default_rng(7)


def fd_check(mesh, pts, h=1e-7, tag=""):
    sdf, closest, normal, jac = mesh.closest_surface_frames(pts)
    ok = 0
    jmax = 0.0
    worst = 0.0
    for i, p in enumerate(pts):
        num = np.zeros((3, 3))
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            _, _, np_, _ = mesh.closest_surface_frames((p + dp)[None])
            _, _, nm_, _ = mesh.closest_surface_frames((p - dp)[None])
            num[:, k] = (np_[0] - nm_[0]) / (2 * h)
        scale = max(np.abs(num).max(), np.abs(jac[i]).max(), 1e-3)
        rel = np.abs(num - jac[i]).max() / scale
        jmax = max(jmax, np.abs(jac[i]).max())
        if rel < 1e-4:
            ok += 1
        else:
            worst = max(worst, rel)
    print(f"{tag}: {ok}/{len(pts)} FD-match, max|J|={jmax:.3f}, worst rel={worst:.2e}")


# icosphere r=0.15 like the fixture
sph = shapes.icosphere(0.15, subdivisions=3)
dirs = rng.normal(size=(40, 3))
dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
pts = dirs * (0.15 + rng.uniform(0.002, 0.02, size=40)[:, None])
fd_check(sph, pts, tag="icosphere outside")

pts_in = dirs * (0.15 - rng.uniform(0.002, 0.02, size=40)[:, None])
fd_check(sph, pts_in, tag="icosphere inside")

# normals track the sphere's analytic normal closely
sdf, closest, normal, jac = sph.closest_surface_frames(pts)
ang = np.degrees(np.arccos(np.clip(np.einsum("ij,ij->i", normal, dirs), -1, 1)))
print(f"icosphere: normal-vs-radial max angle {ang.max():.4f} deg")

# box: face-interior queries get the exact face normal, zero jacobian
box = shapes.box((0.4, 0.3, 0.2))
bpts = rng.uniform(-0.1, 0.1, size=(30, 3))
bpts[:, 2] = 0.1 + rng.uniform(0.001, 0.05, size=30)  # above the +z face, interior
sdf, closest, normal, jac = box.closest_surface_frames(bpts)
print(
    "box +z face: normal err",
    np.abs(normal - [0, 0, 1]).max(),
    "jac max",
    np.abs(jac).max(),
)
fd_check(box, bpts, tag="box face")

# continuity sweep across an icosphere vertex region at fixed height
t = np.linspace(-0.02, 0.02, 4001)
path = np.stack([t, 0.001 + 0 * t, np.full_like(t, 0.152)], axis=1)
base = path[0] / np.linalg.norm(path[0]) * 0.152
path = path / np.linalg.norm(path, axis=1, keepdims=True) * 0.1505
_, _, nrm, _ = sph.closest_surface_frames(path)
step = np.linalg.norm(np.diff(nrm, axis=0), axis=1)
print(f"sweep: max normal step {step.max():.3e} (spacing {np.linalg.norm(path[1]-path[0]):.2e})")
