"""Reference implementation of the rotation alignment objective.

loss = geodesic(R2p R1p^T, R2g R1g^T) + [anchor] * geodesic(R1p, I)

in radians, with analytic gradients in the right tangent space
(R -> R exp(w^)) verified against finite differences, plus the optional L1
translation terms. Meant as a verifiable reference for external trainers,
not as a training loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import so3

SMOOTH_ANGLE_EPS = 1e-6  # radians from 0 / pi where the geodesic is non-smooth

TRANSLATION_MODES = ("anchored_absolute", "relative_scaled")


@dataclass
class LossInput:
    r1_pred: np.ndarray
    r2_pred: np.ndarray
    r1_gt: np.ndarray
    r2_gt: np.ndarray
    anchor: bool = False
    t1_pred: np.ndarray | None = None
    t2_pred: np.ndarray | None = None
    t1_gt: np.ndarray | None = None
    t2_gt: np.ndarray | None = None
    lambda_t: float = 1.0

    def __post_init__(self):
        for name in ("r1_pred", "r2_pred", "r1_gt", "r2_gt"):
            setattr(self, name, so3.validate_rotation(getattr(self, name), atol=1e-6))
        for name in ("t1_pred", "t2_pred", "t1_gt", "t2_gt"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.asarray(v, dtype=np.float64).reshape(3))
        if self.lambda_t < 0:
            raise ValueError("lambda_t must be nonnegative")

    def has_translations(self) -> bool:
        return all(
            v is not None for v in (self.t1_pred, self.t2_pred, self.t1_gt, self.t2_gt)
        )


def rotation_loss(inp: LossInput) -> float:
    """Relative-rotation geodesic plus the optional anchoring term, radians."""
    rel_pred = inp.r2_pred @ inp.r1_pred.T
    rel_gt = inp.r2_gt @ inp.r1_gt.T
    loss = so3.geodesic_rad(rel_pred, rel_gt)
    if inp.anchor:
        loss += so3.geodesic_rad(inp.r1_pred, np.eye(3))
    return loss


def _vee_antisym(m: np.ndarray) -> np.ndarray:
    a = m - m.T
    return np.array([a[2, 1], a[0, 2], a[1, 0]])


def _geodesic_grad_pair(r1p, r2p, rel_gt):
    """Gradient of geodesic(R2p R1p^T, G) w.r.t. right-tangent perturbations.

    With M = R1p^T G^T R2p and theta the geodesic angle,
    d theta / d w2 =  vee(M - M^T) / (2 sin theta)  and the w1 gradient is its
    negative. Returns (g1, g2, theta, smooth).
    """
    theta = so3.geodesic_rad(r2p @ r1p.T, rel_gt)
    if theta < SMOOTH_ANGLE_EPS or math.pi - theta < SMOOTH_ANGLE_EPS:
        return np.zeros(3), np.zeros(3), theta, False
    m = r1p.T @ rel_gt.T @ r2p
    g2 = _vee_antisym(m) / (2.0 * math.sin(theta))
    return -g2, g2, theta, True


@dataclass
class RotationLossGrad:
    g1: np.ndarray  # d loss / d w1, right tangent of r1_pred
    g2: np.ndarray
    smooth: bool  # False when any term sat at a non-differentiable angle


def rotation_loss_grad(inp: LossInput) -> RotationLossGrad:
    """Analytic gradient of rotation_loss; zero subgradient at exact minima.

    Within SMOOTH_ANGLE_EPS of 0 or pi a term is flagged non-smooth and
    contributes a zero (sub)gradient.
    """
    rel_gt = inp.r2_gt @ inp.r1_gt.T
    g1, g2, _, smooth = _geodesic_grad_pair(inp.r1_pred, inp.r2_pred, rel_gt)
    if inp.anchor:
        theta_a = so3.geodesic_rad(inp.r1_pred, np.eye(3))
        if theta_a < SMOOTH_ANGLE_EPS or math.pi - theta_a < SMOOTH_ANGLE_EPS:
            smooth = False
        else:
            g1 = g1 + _vee_antisym(inp.r1_pred) / (2.0 * math.sin(theta_a))
    return RotationLossGrad(g1=g1, g2=g2, smooth=smooth)


def relative_translation(r1, t1, r2, t2) -> np.ndarray:
    """t_rel = t2 - (R2 R1^T) t1, the camera-2-frame relative translation."""
    return t2 - (r2 @ r1.T) @ t1


def translation_l1(inp: LossInput, mode: str) -> float:
    """L1 translation supervision.

    anchored_absolute: |t1_pred|_1 + |t2_pred - t2_gt|_1, with t2_gt already
    expressed in the anchored, scale-normalized GT frame. relative_scaled:
    |s * t_rel_pred - t_rel_gt|_1 with s = |t_rel_gt| / |t_rel_pred|, which
    cancels magnitude and penalizes direction only.
    """
    if mode not in TRANSLATION_MODES:
        raise ValueError(f"mode must be one of {TRANSLATION_MODES}, got {mode!r}")
    if not inp.has_translations():
        raise ValueError("translation loss needs all four translation vectors")
    if mode == "anchored_absolute":
        return float(np.abs(inp.t1_pred).sum() + np.abs(inp.t2_pred - inp.t2_gt).sum())
    t_rel_pred = relative_translation(inp.r1_pred, inp.t1_pred, inp.r2_pred, inp.t2_pred)
    t_rel_gt = relative_translation(inp.r1_gt, inp.t1_gt, inp.r2_gt, inp.t2_gt)
    s = so3.translation_scale(t_rel_pred, t_rel_gt)
    return float(np.abs(s * t_rel_pred - t_rel_gt).sum())


def total_loss(inp: LossInput, translation_mode: str | None = None) -> float:
    """rotation_loss plus lambda_t-weighted translation_l1 when requested."""
    loss = rotation_loss(inp)
    if translation_mode is not None:
        loss += inp.lambda_t * translation_l1(inp, translation_mode)
    return loss


# ---------------------------------------------------------------------------
# batch evaluation (CLI surface)


def _rotation_from_json(value, field: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape == (4,):
        return so3.quat_to_matrix(arr)
    if arr.shape == (3, 3):
        return so3.validate_rotation(arr, atol=1e-6)
    raise ValueError(f"field {field!r} must be a quaternion [w,x,y,z] or 3x3 matrix")


def loss_input_from_json_dict(d: dict) -> LossInput:
    def opt_vec(key):
        return np.asarray(d[key], dtype=np.float64) if key in d else None

    return LossInput(
        r1_pred=_rotation_from_json(d["r1_pred"], "r1_pred"),
        r2_pred=_rotation_from_json(d["r2_pred"], "r2_pred"),
        r1_gt=_rotation_from_json(d["r1_gt"], "r1_gt"),
        r2_gt=_rotation_from_json(d["r2_gt"], "r2_gt"),
        anchor=bool(d.get("anchor", False)),
        t1_pred=opt_vec("t1_pred"),
        t2_pred=opt_vec("t2_pred"),
        t1_gt=opt_vec("t1_gt"),
        t2_gt=opt_vec("t2_gt"),
        lambda_t=float(d.get("lambda_t", 1.0)),
    )


def evaluate_loss_rows(rows: list[LossInput], translation_mode: str | None = None) -> dict:
    """Per-row and mean losses for a batch of inputs."""
    out_rows = []
    for inp in rows:
        entry = {"rotation_loss": rotation_loss(inp)}
        if translation_mode is not None and inp.has_translations():
            entry["translation_l1"] = translation_l1(inp, translation_mode)
            entry["total"] = entry["rotation_loss"] + inp.lambda_t * entry["translation_l1"]
        else:
            entry["translation_l1"] = None
            entry["total"] = entry["rotation_loss"]
        out_rows.append(entry)
    n = len(out_rows)
    return {
        "rows": out_rows,
        "mean_rotation_loss": sum(r["rotation_loss"] for r in out_rows) / n if n else None,
        "mean_total_loss": sum(r["total"] for r in out_rows) / n if n else None,
        "n_rows": n,
    }
