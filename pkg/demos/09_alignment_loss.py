"""The rotation alignment objective and its analytic gradient.

loss = geodesic(R_rel_pred, R_rel_gt) + [anchor] * geodesic(R1_pred, I),
in radians. The anchor term is for models that pin the first camera to
the world frame; permutation-invariant models drop it. Gradients live in
the right tangent space (R -> R exp(w^)) and match finite differences.
"""

import math

import numpy as np

from evbench import so3
from evbench.loss import LossInput, rotation_loss, rotation_loss_grad, translation_l1

rng = np.random.default_rng(13)

# A prediction whose relative rotation is off by 30 degrees.
r1 = so3.random_rotation(rng)
r2 = so3.random_rotation(rng)
inp = LossInput(r1, so3.rot_z(30) @ r2, r1, r2, anchor=False)
print(f"30-degree relative error -> loss {rotation_loss(inp):.6f} rad "
      f"(pi/6 = {math.pi / 6:.6f})")

# With anchoring, a first-camera offset is penalized even when the
# relative rotation is perfect.
anchored = LossInput(so3.rot_z(10), so3.rot_x(47) @ so3.rot_z(10), np.eye(3), so3.rot_x(47),
                     anchor=True)
print(f"anchored, R1 off by 10 degrees -> loss {rotation_loss(anchored):.6f} rad")

# Analytic gradient vs central finite differences.
g = rotation_loss_grad(inp)
u = rng.standard_normal(3)
u /= np.linalg.norm(u)
h = 1e-5
f = lambda eps: rotation_loss(
    LossInput(r1, (so3.rot_z(30) @ r2) @ so3.axis_angle_to_matrix(u, eps), r1, r2)
)
fd = (f(h) - f(-h)) / (2 * h)
print(f"\ndirectional derivative: analytic {float(g.g2 @ u):+.8f}, "
      f"finite difference {fd:+.8f}")

# At the exact minimum the loss is non-smooth; a zero subgradient is
# returned and flagged.
flat = rotation_loss_grad(LossInput(r1, r2, r1, r2))
print("at the minimum: smooth =", flat.smooth, ", subgradient =", flat.g1)

# Translation supervision variants. The relative mode rescales the
# prediction by |t_gt|/|t_pred| first, so only direction is penalized.
t1 = rng.standard_normal(3)
t_rel = np.array([1.0, 0.0, 0.0])
base = LossInput(
    r1, r2, r1, r2,
    t1_pred=t1, t2_pred=(r2 @ r1.T) @ t1 + 0.5 * t_rel,  # half the magnitude
    t1_gt=t1, t2_gt=(r2 @ r1.T) @ t1 + t_rel,
)
print(f"\nrelative L1 with the right direction but half the length: "
      f"{translation_l1(base, 'relative_scaled'):.2e}")
wrong_dir = LossInput(
    r1, r2, r1, r2,
    t1_pred=t1, t2_pred=(r2 @ r1.T) @ t1 + np.array([0.0, 1.0, 0.0]),
    t1_gt=t1, t2_gt=(r2 @ r1.T) @ t1 + t_rel,
)
print(f"orthogonal unit directions: "
      f"{translation_l1(wrong_dir, 'relative_scaled'):.2f} (|(1,0,0)-(0,1,0)|_1 = 2)")
