"""Rotation arithmetic and the angular error metrics.

Walks through the building blocks every evaluation in this toolkit rests
on: quaternion <-> matrix conversion, geodesic distance, relative
rotations, the Y-X-Z yaw/pitch decomposition, and angular translation
error.
"""

import numpy as np

from evbench import so3

# A quaternion with half-angle 15 degrees about z is a 30-degree z-rotation.
q = np.array([np.cos(np.radians(15)), 0.0, 0.0, np.sin(np.radians(15))])
r30 = so3.quat_to_matrix(q)
print("30-degree z-rotation from its quaternion:")
print(np.round(r30, 6))

# Geodesic distance is the rotation angle between two orientations.
print("\ngeodesic(R30, I)  =", so3.geodesic_deg(r30, np.eye(3)), "degrees")
print("geodesic(Rx180, I) =", so3.geodesic_deg(so3.rot_x(180), np.eye(3)), "degrees")

# Relative rotation between two absolute camera orientations: R2 @ R1.T.
r1, r2 = so3.rot_z(10), so3.rot_z(50)
rel = so3.relative_rotation(r1, r2)
print("\nrelative rotation of Rz(10) and Rz(50) is Rz(40):",
      so3.geodesic_deg(rel, so3.rot_z(40)) < 1e-9)

# Yaw/pitch split of a relative rotation (camera frame: +y up, +x right).
for label, rot in [("pure 25-degree yaw", so3.rot_y(25)),
                   ("pure -10-degree pitch", so3.rot_x(-10)),
                   ("mixed", so3.rot_y(40) @ so3.rot_x(15))]:
    yaw, pitch = so3.yaw_pitch_deg(rot)
    print(f"{label:24s} -> yaw {yaw:7.3f}, pitch {pitch:7.3f}")

# Angular translation error folds antiparallel directions onto zero and is
# invariant to scale; that makes it usable with scale-ambiguous predictions.
t = np.array([1.0, 2.0, 2.0])
print("\nangle(t, 5t)   =", so3.translation_angle_deg(t, 5 * t))
print("angle(t, -t)   =", so3.translation_angle_deg(t, -t))
print("angle(x, y)    =", so3.translation_angle_deg([1, 0, 0], [0, 1, 0]))
print("scale |gt|/|pred| for pred=(0,0,10), gt=(3,4,0):",
      so3.translation_scale([0, 0, 10], [3, 4, 0]))

# Against a brute-force oracle: the geodesic distance equals the angle of
# the relative rotation recovered from its quaternion.
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(1000):
    a, b = so3.random_rotation(rng), so3.random_rotation(rng)
    qrel = so3.matrix_to_quat(so3.relative_rotation(a, b))
    oracle = np.degrees(2 * np.arctan2(np.linalg.norm(qrel[1:]), abs(qrel[0])))
    worst = max(worst, abs(so3.geodesic_deg(a, b) - oracle))
print(f"\nmax |geodesic - axis-angle oracle| over 1000 random pairs: {worst:.2e} deg")
