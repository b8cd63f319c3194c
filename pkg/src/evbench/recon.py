"""Point-cloud assembly, similarity alignment and ACC/CMP metrics.

Alignment pipeline: coarse init (centroid + RMS-radius normalization with
principal-axes candidate rotations scored by one nearest-neighbor pass),
then point-to-point ICP with an each-iteration Umeyama re-fit, then
accuracy/completion statistics in meters on the full clouds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .colmap_io import PinholeCamera, SparseScene

log = logging.getLogger(__name__)


class DegenerateGeometryError(ValueError):
    pass


class EmptyCloudError(ValueError):
    pass


@dataclass
class PointCloud:
    points: np.ndarray  # (N, 3) float64
    unit: str = "model"  # "model" | "meters"
    colors: np.ndarray | None = None  # (N, 3) uint8

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.isfinite(self.points).all():
            raise ValueError("point cloud contains non-finite coordinates")
        if self.unit not in ("model", "meters"):
            raise ValueError(f"unknown unit {self.unit!r}")

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class Sim3:
    """Similarity transform x -> s * R x + t."""

    scale: float
    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return self.scale * points @ self.rotation.T + self.translation

    def inverse(self) -> "Sim3":
        r_inv = self.rotation.T
        s_inv = 1.0 / self.scale
        return Sim3(s_inv, r_inv, -s_inv * (r_inv @ self.translation))

    def compose(self, other: "Sim3") -> "Sim3":
        """self after other: (self . other)(x) = self(other(x))."""
        return Sim3(
            self.scale * other.scale,
            self.rotation @ other.rotation,
            self.scale * self.rotation @ other.translation + self.translation,
        )

    @classmethod
    def identity(cls) -> "Sim3":
        return cls(1.0, np.eye(3), np.zeros(3))


def unproject_depth(
    depth: np.ndarray,
    cam: PinholeCamera,
    rotation: np.ndarray,
    tvec: np.ndarray,
    downscale: float = 1.0,
) -> PointCloud:
    """Lift a depth map to world points: X = R^T (K^-1 (u, v, 1) d - t).

    (rotation, tvec) is the world->camera pose. The depth map may be the
    camera resolution divided by `downscale`; pixels with depth <= 0 or
    non-finite are skipped.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise ValueError(f"depth must be HxW, got shape {depth.shape}")
    expected = (round(cam.height / downscale), round(cam.width / downscale))
    if depth.shape != expected:
        raise ValueError(
            f"depth shape {depth.shape} does not match camera {cam.camera_id} "
            f"at downscale {downscale} (expected {expected})"
        )
    fx, fy = cam.fx / downscale, cam.fy / downscale
    cx, cy = cam.cx / downscale, cam.cy / downscale
    v, u = np.nonzero((depth > 0) & np.isfinite(depth))
    if v.size == 0:
        return PointCloud(np.empty((0, 3)))
    d = depth[v, u]
    rays = np.stack([(u - cx) / fx, (v - cy) / fy, np.ones_like(d)], axis=1)
    cam_pts = rays * d[:, None]
    rotation = np.asarray(rotation, dtype=np.float64)
    tvec = np.asarray(tvec, dtype=np.float64).reshape(3)
    world = (cam_pts - tvec) @ rotation  # == R^T (x - t) row-wise
    return PointCloud(world)


def scene_point_cloud(scene: SparseScene) -> PointCloud:
    """Sparse-point cloud (with colors) from a scene's 3D points."""
    ids = sorted(scene.points3d)
    if not ids:
        return PointCloud(np.empty((0, 3)))
    pts = np.array([scene.points3d[i].xyz for i in ids])
    colors = np.array([scene.points3d[i].rgb for i in ids], dtype=np.uint8)
    return PointCloud(pts, colors=colors)


def umeyama(src: np.ndarray, dst: np.ndarray, with_scale: bool = True) -> Sim3:
    """Least-squares similarity aligning corresponded src to dst.

    Minimizes sum |s R src_i + t - dst_i|^2 (Umeyama's closed form); the
    sign-correction diagonal keeps R a proper rotation when the covariance
    would prefer a reflection.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if src.shape != dst.shape:
        raise ValueError(f"correspondence shapes differ: {src.shape} vs {dst.shape}")
    n = src.shape[0]
    if n < 3:
        raise DegenerateGeometryError(f"need at least 3 correspondences, got {n}")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    src_c = src - mu_s
    dst_c = dst - mu_d
    cov = dst_c.T @ src_c / n
    if np.linalg.matrix_rank(src_c.T @ src_c / n, tol=1e-12) < 2:
        raise DegenerateGeometryError("source points are rank-deficient (collinear or coincident)")
    u, d, vt = np.linalg.svd(cov)
    s_diag = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_diag[2] = -1.0
    rotation = u @ np.diag(s_diag) @ vt
    if with_scale:
        var_s = float((src_c**2).sum()) / n
        scale = float(d @ s_diag) / var_s
        if scale <= 0:
            raise DegenerateGeometryError(f"non-positive recovered scale {scale}")
    else:
        scale = 1.0
    translation = mu_d - scale * rotation @ mu_s
    return Sim3(scale, rotation, translation)


@dataclass
class IcpParams:
    max_iters: int = 50
    rmse_tol: float = 1e-6
    gate_multiplier: float = 10.0
    with_scale: bool = True


@dataclass
class IcpResult:
    transform: Sim3
    rmse: float
    n_iters: int
    converged: bool
    no_correspondences: bool = False
    rmse_history: list[float] = field(default_factory=list)


def median_nn_spacing(points: np.ndarray, tree: cKDTree | None = None) -> float:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if points.shape[0] < 2:
        raise EmptyCloudError("need at least 2 points for nearest-neighbor spacing")
    tree = tree or cKDTree(points)
    d, _ = tree.query(points, k=2)
    return float(np.median(d[:, 1]))


def icp_refine(
    src: PointCloud | np.ndarray,
    dst: PointCloud | np.ndarray,
    init: Sim3,
    params: IcpParams | None = None,
) -> IcpResult:
    """Point-to-point ICP seeded at `init`; never returns a worse transform.

    Each iteration gates nearest-neighbor correspondences at
    gate_multiplier * median NN spacing of dst (computed once) and re-fits a
    full similarity with Umeyama. Iterations that fail to reduce the gated
    NN RMSE stop the loop with the best transform so far.
    """
    params = params or IcpParams()
    src_pts = src.points if isinstance(src, PointCloud) else np.asarray(src, dtype=np.float64)
    dst_pts = dst.points if isinstance(dst, PointCloud) else np.asarray(dst, dtype=np.float64)
    if src_pts.shape[0] == 0 or dst_pts.shape[0] == 0:
        raise EmptyCloudError("ICP needs nonempty clouds")
    tree = cKDTree(dst_pts)
    gate = params.gate_multiplier * median_nn_spacing(dst_pts, tree)

    def gated_rmse_and_pairs(transform: Sim3):
        moved = transform.apply(src_pts)
        dist, idx = tree.query(moved)
        mask = dist <= gate
        if not mask.any():
            return np.inf, None, None
        return float(np.sqrt(np.mean(dist[mask] ** 2))), mask, idx

    best = init
    best_rmse, mask, idx = gated_rmse_and_pairs(init)
    history = [best_rmse]
    if mask is None:
        log.warning("ICP: no correspondences within gate %.4g; returning init", gate)
        return IcpResult(init, np.inf, 0, False, no_correspondences=True, rmse_history=history)

    converged = False
    iters = 0
    for iters in range(1, params.max_iters + 1):
        try:
            candidate = umeyama(src_pts[mask], dst_pts[idx[mask]], with_scale=params.with_scale)
        except DegenerateGeometryError:
            break
        rmse, new_mask, new_idx = gated_rmse_and_pairs(candidate)
        if new_mask is None or rmse > best_rmse:
            break
        improvement = best_rmse - rmse
        best, best_rmse, mask, idx = candidate, rmse, new_mask, new_idx
        history.append(rmse)
        if improvement < params.rmse_tol:
            converged = True
            break
    return IcpResult(best, best_rmse, iters, converged, rmse_history=history)


def _principal_axes(points: np.ndarray) -> np.ndarray:
    cov = np.cov(points.T)
    _, vecs = np.linalg.eigh(cov)
    if np.linalg.det(vecs) < 0:
        vecs[:, 0] = -vecs[:, 0]
    return vecs


_SIGN_COMBOS = ((1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0))


def coarse_align(src: np.ndarray, dst: np.ndarray, score_cap: int = 2000) -> Sim3:
    """Correspondence-free init: centroid + RMS-radius scale, best PCA rotation.

    Principal-axes candidates (the four proper sign combinations) plus the
    identity are scored by NN RMSE on a deterministic subsample; ICP then
    refines from the winner. Needed because ICP alone cannot escape large
    frame rotations.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if src.shape[0] == 0 or dst.shape[0] == 0:
        raise EmptyCloudError("cannot align empty clouds")
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    rms_s = float(np.sqrt(np.mean(((src - mu_s) ** 2).sum(axis=1))))
    rms_d = float(np.sqrt(np.mean(((dst - mu_d) ** 2).sum(axis=1))))
    if rms_s < 1e-15 or rms_d < 1e-15:
        raise DegenerateGeometryError("cloud has zero spatial extent")
    s0 = rms_d / rms_s

    candidates = [np.eye(3)]
    if src.shape[0] >= 3 and dst.shape[0] >= 3:
        vs = _principal_axes(src)
        vd = _principal_axes(dst)
        for signs in _SIGN_COMBOS:
            candidates.append(vd @ np.diag(signs) @ vs.T)

    step = max(1, src.shape[0] // score_cap)
    probe = src[::step]
    tree = cKDTree(dst[:: max(1, dst.shape[0] // (4 * score_cap))])
    best, best_rmse = None, np.inf
    for rot in candidates:
        t0 = mu_d - s0 * rot @ mu_s
        cand = Sim3(s0, rot, t0)
        dist, _ = tree.query(cand.apply(probe))
        rmse = float(np.sqrt(np.mean(dist**2)))
        if rmse < best_rmse:
            best, best_rmse = cand, rmse
    return best


@dataclass
class ReconSummary:
    acc_mean: float
    acc_median: float
    cmp_mean: float
    cmp_median: float

    def to_json_dict(self) -> dict:
        return {
            "acc_mean": self.acc_mean,
            "acc_median": self.acc_median,
            "cmp_mean": self.cmp_mean,
            "cmp_median": self.cmp_median,
        }


def nearest_distances(query: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Exact nearest-neighbor distance from each query point to the ref cloud."""
    query = np.asarray(query, dtype=np.float64).reshape(-1, 3)
    ref = np.asarray(ref, dtype=np.float64).reshape(-1, 3)
    if query.shape[0] == 0 or ref.shape[0] == 0:
        raise EmptyCloudError("empty cloud in nearest-neighbor query")
    dist, _ = cKDTree(ref).query(query, workers=-1)
    return dist


def acc_cmp(pred: PointCloud | np.ndarray, gt: PointCloud | np.ndarray, scale_to_meters: float) -> ReconSummary:
    """Accuracy (pred->gt) and completion (gt->pred) statistics in meters."""
    if scale_to_meters <= 0:
        raise ValueError("scale_to_meters must be positive")
    pred_pts = pred.points if isinstance(pred, PointCloud) else np.asarray(pred, dtype=np.float64)
    gt_pts = gt.points if isinstance(gt, PointCloud) else np.asarray(gt, dtype=np.float64)
    acc = nearest_distances(pred_pts, gt_pts) * scale_to_meters
    cmp_ = nearest_distances(gt_pts, pred_pts) * scale_to_meters
    return ReconSummary(
        acc_mean=float(acc.mean()),
        acc_median=float(np.median(acc)),
        cmp_mean=float(cmp_.mean()),
        cmp_median=float(np.median(cmp_)),
    )


def apply_metric_scale(cloud: PointCloud, s: float) -> PointCloud:
    """Convert a model-unit cloud to meters by multiplying coordinates by s."""
    if s <= 0:
        raise ValueError("metric scale must be positive")
    if cloud.unit != "model":
        raise ValueError(f"cloud is already in {cloud.unit}")
    return PointCloud(cloud.points * s, unit="meters", colors=cloud.colors)


def _subsample(points: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    if points.shape[0] <= cap:
        return points
    idx = np.sort(rng.choice(points.shape[0], size=cap, replace=False))
    return points[idx]


@dataclass
class ReconReport:
    summary: ReconSummary
    transform: Sim3
    icp_rmse: float
    icp_iters: int
    icp_converged: bool
    no_correspondences: bool

    def to_json_dict(self) -> dict:
        return {
            "summary": self.summary.to_json_dict(),
            "alignment": {
                "scale": self.transform.scale,
                "rotation": self.transform.rotation.tolist(),
                "translation": self.transform.translation.tolist(),
                "icp_rmse": self.icp_rmse,
                "icp_iters": self.icp_iters,
                "icp_converged": self.icp_converged,
                "no_correspondences": self.no_correspondences,
            },
        }


def evaluate_recon(
    pred: PointCloud,
    gt: PointCloud,
    scale_to_meters: float,
    params: IcpParams | None = None,
    subsample_cap: int = 1_000_000,
    seed: int = 0,
) -> ReconReport:
    """Full pipeline: coarse align -> ICP -> ACC/CMP in meters.

    Alignment runs on (seeded) subsampled clouds when they exceed the cap;
    the metrics always use the full clouds.
    """
    if len(pred) == 0:
        raise EmptyCloudError("empty predicted cloud")
    if len(gt) == 0:
        raise EmptyCloudError("empty ground-truth cloud")
    rng = np.random.default_rng(seed)
    src = _subsample(pred.points, subsample_cap, rng)
    dst = _subsample(gt.points, subsample_cap, rng)
    init = coarse_align(src, dst)
    log.info("coarse init: scale %.6g", init.scale)
    icp = icp_refine(src, dst, init, params)
    log.info("ICP: rmse %.6g after %d iters (converged=%s)", icp.rmse, icp.n_iters, icp.converged)
    aligned = PointCloud(icp.transform.apply(pred.points))
    summary = acc_cmp(aligned, gt, scale_to_meters)
    log.info("ACC mean/median %.6g/%.6g m, CMP %.6g/%.6g m",
             summary.acc_mean, summary.acc_median, summary.cmp_mean, summary.cmp_median)
    return ReconReport(
        summary=summary,
        transform=icp.transform,
        icp_rmse=icp.rmse,
        icp_iters=icp.n_iters,
        icp_converged=icp.converged,
        no_correspondences=icp.no_correspondences,
    )
