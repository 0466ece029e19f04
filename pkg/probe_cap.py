"""Per-hand Q of an ideal 5-contact cap on a sphere vs cap half-angle."""
import numpy as np

from bigrasp.wrench import ContactState, qp_energy

r = 0.15
beta = 0.1
for theta_deg in (30, 40, 50, 55, 60, 65, 70, 80, 90):
    th = np.radians(theta_deg)
    pts = [np.array([r, 0.0, 0.0])]
    for k in range(4):
        az = k * np.pi / 2
        pts.append(
            r
            * np.array(
                [np.cos(th), np.sin(th) * np.cos(az), np.sin(th) * np.sin(az)]
            )
        )
    pts = np.stack(pts)
    normals = -pts / np.linalg.norm(pts, axis=1, keepdims=True)
    contacts = ContactState.from_contacts(pts, normals, mu=0.6, torque_center=np.zeros(3))
    qp = qp_energy(contacts, beta, 0.2, max_iter=20000, tol=1e-10)
    print(
        f"theta {theta_deg:3d}: Q = {qp.energy:.4e}  ({qp.energy / beta**2:.4f} beta^2)"
    )
