"""Rotation arithmetic and angular error metrics on SO(3).

Conventions used everywhere in this package:
  * rotation matrices are 3x3 numpy arrays, world->camera unless stated
  * quaternions are scalar-first (w, x, y, z); q and -q are the same
    rotation, and conversions return the w >= 0 canonical form
  * angles are held in radians internally and reported in degrees
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

ROTATION_ATOL = 1e-9
GIMBAL_LOCK_TOL_DEG = 1e-6
_DEGENERATE_NORM = 1e-12


class DegenerateInputError(ValueError):
    """Zero-norm quaternion or translation where a direction is required."""


def validate_rotation(m: np.ndarray, atol: float = ROTATION_ATOL) -> np.ndarray:
    """Check m is a proper rotation (orthonormal, det +1) and return it as float64."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("rotation contains non-finite entries")
    err = np.abs(m.T @ m - np.eye(3)).max()
    if err > atol:
        raise ValueError(f"matrix is not orthonormal (max |R^T R - I| = {err:.3e})")
    det = np.linalg.det(m)
    if abs(det - 1.0) > atol:
        raise ValueError(f"matrix has det {det:.12f}, not a proper rotation")
    return m


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Convert a scalar-first unit quaternion to a rotation matrix.

    The quaternion is renormalized internally; its norm must already be
    within 1e-6 of 1. quat_to_matrix(-q) == quat_to_matrix(q).
    """
    q = np.asarray(q, dtype=np.float64).reshape(4)
    n = math.sqrt(float(q @ q))
    if n < _DEGENERATE_NORM:
        raise DegenerateInputError("zero-norm quaternion")
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"quaternion norm {n:.9f} too far from 1")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Convert a rotation matrix to the w >= 0 scalar-first unit quaternion.

    Sign-stable: when w == 0 the first nonzero vector component is made
    positive so the double cover always resolves the same way.
    """
    m = validate_rotation(m, atol=1e-6)
    # Shepperd's method: pick the largest of the four squared components.
    t = float(np.trace(m))
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    elif q[0] == 0:
        for c in q[1:]:
            if c != 0:
                if c < 0:
                    q = -q
                break
    return q


def relative_rotation(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Relative rotation R_rel = R2 R1^T between two absolute rotations."""
    r1 = validate_rotation(r1)
    r2 = validate_rotation(r2)
    return r2 @ r1.T


def geodesic_rad(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic distance arccos((tr(a^T b) - 1) / 2) in radians, in [0, pi]."""
    a = validate_rotation(a)
    b = validate_rotation(b)
    c = (float(np.trace(a.T @ b)) - 1.0) / 2.0
    # floating-point traces overshoot the domain near 0 and 180 degrees
    return math.acos(min(1.0, max(-1.0, c)))


def geodesic_deg(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic rotation error in degrees, in [0, 180]."""
    return math.degrees(geodesic_rad(a, b))


class EulerYXZ(NamedTuple):
    yaw_deg: float
    pitch_deg: float
    roll_deg: float
    gimbal_locked: bool


def euler_yxz_deg(rel: np.ndarray) -> EulerYXZ:
    """Decompose R = Ry(yaw) @ Rx(pitch) @ Rz(roll), intrinsic Y-X-Z.

    Camera frame: +x right, +y up, +z forward, so yaw rotates about the up
    axis and pitch about the right axis. All angles in (-180, 180]. Within
    GIMBAL_LOCK_TOL_DEG of |pitch| = 90 the yaw/roll split is ambiguous;
    roll is fixed to 0 and the result is flagged.
    """
    rel = validate_rotation(rel)
    sp = min(1.0, max(-1.0, -float(rel[1, 2])))
    pitch = math.asin(sp)
    locked = 90.0 - abs(math.degrees(pitch)) <= GIMBAL_LOCK_TOL_DEG
    if locked:
        roll = 0.0
        if sp > 0:
            yaw = math.atan2(float(rel[0, 1]), float(rel[0, 0]))
        else:
            yaw = math.atan2(-float(rel[0, 1]), float(rel[0, 0]))
    else:
        yaw = math.atan2(float(rel[0, 2]), float(rel[2, 2]))
        roll = math.atan2(float(rel[1, 0]), float(rel[1, 1]))
    return EulerYXZ(
        _wrap_deg(math.degrees(yaw)),
        _wrap_deg(math.degrees(pitch)),
        _wrap_deg(math.degrees(roll)),
        locked,
    )


def yaw_pitch_deg(rel: np.ndarray) -> tuple[float, float]:
    """Yaw and pitch (degrees) of a relative rotation; see euler_yxz_deg."""
    e = euler_yxz_deg(rel)
    return e.yaw_deg, e.pitch_deg


def _wrap_deg(a: float) -> float:
    """Map an angle to (-180, 180]."""
    a = math.fmod(a, 360.0)
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    return a


def translation_angle_deg(t: np.ndarray, t_star: np.ndarray) -> float:
    """Angular error arccos(|t . t*| / (|t| |t*|)) in degrees, in [0, 90].

    The absolute value folds antiparallel directions onto 0. Either vector
    with norm below 1e-12 raises DegenerateInputError.
    """
    t = np.asarray(t, dtype=np.float64).reshape(3)
    t_star = np.asarray(t_star, dtype=np.float64).reshape(3)
    nt = float(np.linalg.norm(t))
    ns = float(np.linalg.norm(t_star))
    if nt < _DEGENERATE_NORM or ns < _DEGENERATE_NORM:
        raise DegenerateInputError("translation vector with near-zero norm")
    c = abs(float(t @ t_star)) / (nt * ns)
    return math.degrees(math.acos(min(1.0, c)))


def translation_scale(t_pred: np.ndarray, t_gt: np.ndarray) -> float:
    """Scale factor |t_gt| / |t_pred| matching predicted to GT magnitude."""
    t_pred = np.asarray(t_pred, dtype=np.float64).reshape(3)
    t_gt = np.asarray(t_gt, dtype=np.float64).reshape(3)
    np_pred = float(np.linalg.norm(t_pred))
    if np_pred < _DEGENERATE_NORM:
        raise DegenerateInputError("zero predicted translation")
    return float(np.linalg.norm(t_gt)) / np_pred


def rot_x(deg: float) -> np.ndarray:
    """Rotation of `deg` degrees about the x axis."""
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    """Rotation of `deg` degrees about the y axis."""
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(deg: float) -> np.ndarray:
    """Rotation of `deg` degrees about the z axis."""
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle_to_matrix(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rodrigues formula for a unit axis and angle in radians."""
    axis = np.asarray(axis, dtype=np.float64).reshape(3)
    n = float(np.linalg.norm(axis))
    if n < _DEGENERATE_NORM:
        raise DegenerateInputError("zero-norm rotation axis")
    x, y, z = axis / n
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(angle_rad) * k + (1.0 - math.cos(angle_rad)) * (k @ k)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation from a normalized Gaussian quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    return quat_to_matrix(q)
