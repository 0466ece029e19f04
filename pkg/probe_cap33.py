"""Q for the hand's 3-tip + 3-mid contact pattern vs ring angles and radius."""
import numpy as np

from bigrasp.wrench import ContactState, qp_energy


def ring(rad, theta, azimuths):
    th = np.radians(theta)
    return np.stack(
        [
            rad * np.array([np.cos(th), np.sin(th) * np.cos(a), np.sin(th) * np.sin(a)])
            for a in np.radians(azimuths)
        ]
    )


def q_of(rad, th_mid, th_tip, stagger=0.0):
    pts = np.vstack(
        [
            ring(rad, th_mid, [0, 120, 240]),
            ring(rad, th_tip, np.array([0, 120, 240]) + stagger),
        ]
    )
    normals = -pts / np.linalg.norm(pts, axis=1, keepdims=True)
    contacts = ContactState.from_contacts(pts, normals, 0.6, torque_center=np.zeros(3))
    return qp_energy(contacts, 0.1, 0.2, max_iter=30000, tol=1e-10).energy


print("r=0.15, aligned azimuths")
for th_tip in (65, 70, 75, 80, 85):
    for th_mid in (35, 45, 55):
        q = q_of(0.15, th_mid, th_tip)
        print(f"  mid {th_mid} tip {th_tip}: Q {q:.3e} ({q/0.01:.3f} b^2)")

print("r=0.15, tips staggered 60 deg")
for th_tip in (70, 75, 80):
    q = q_of(0.15, 40, th_tip, stagger=60.0)
    print(f"  mid 40 tip {th_tip}: Q {q:.3e} ({q/0.01:.3f} b^2)")

print("radius sweep at mid 45 tip 75")
for rad in (0.15, 0.12, 0.09, 0.075, 0.06, 0.045):
    q = q_of(rad, 45, 75)
    print(f"  r {rad:.3f}: Q {q:.3e} ({q/0.01:.3f} b^2)")
