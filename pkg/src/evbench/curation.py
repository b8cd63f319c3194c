"""Pair-set curation from sparse scenes.

Pipeline: mutual K-NN over camera positions -> overlap classification from
relative yaw/pitch vs. combined FoV -> optional scale-consistency filter and
match-based verification -> per-scene cap -> category balancing. Every stage
is deterministic given (scene, config, verification, seed).
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import so3
from .colmap_io import PinholeCamera, SparseScene, camera_fov_deg


class OverlapCategory(enum.Enum):
    LARGE = "Large"
    SMALL = "Small"
    NONE = "None"


@dataclass
class CurationConfig:
    k: int = 5
    max_pairs_per_scene: int = 40
    balance: bool = False
    fov_delta_max: float = 15.0
    focal_ratio_max: float = 2.5
    resolution_ratio_max: float = 3.0
    scale_filter: bool = False
    coverage_threshold: float = 0.25
    use_camera_centers: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        for name in ("fov_delta_max", "focal_ratio_max", "resolution_ratio_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class ImagePair:
    scene_id: str
    image_a: int  # < image_b, canonical unordered pair
    image_b: int
    r_rel_gt: np.ndarray  # R_b R_a^T
    t_rel_gt: np.ndarray  # t_b - R_rel t_a
    category: OverlapCategory
    yaw_deg: float
    pitch_deg: float
    verified: bool = False

    def key(self) -> tuple[str, int, int]:
        return (self.scene_id, self.image_a, self.image_b)

    def to_json_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "image_a": self.image_a,
            "image_b": self.image_b,
            "r_rel_gt": self.r_rel_gt.tolist(),
            "t_rel_gt": self.t_rel_gt.tolist(),
            "category": self.category.value,
            "yaw_deg": self.yaw_deg,
            "pitch_deg": self.pitch_deg,
            "verified": self.verified,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ImagePair":
        return cls(
            scene_id=d["scene_id"],
            image_a=int(d["image_a"]),
            image_b=int(d["image_b"]),
            r_rel_gt=np.asarray(d["r_rel_gt"], dtype=np.float64),
            t_rel_gt=np.asarray(d["t_rel_gt"], dtype=np.float64),
            category=OverlapCategory(d["category"]),
            yaw_deg=float(d["yaw_deg"]),
            pitch_deg=float(d["pitch_deg"]),
            verified=bool(d.get("verified", False)),
        )


def mutual_knn_pairs(
    scene: SparseScene, k: int, use_camera_centers: bool = True
) -> list[tuple[int, int]]:
    """Unordered image pairs where each camera is among the other's K nearest.

    Distances are Euclidean between camera centers (-R^T t), or between raw
    translation vectors when use_camera_centers is False. Distance ties break
    toward the smaller image id.
    """
    ids = sorted(scene.images)
    if len(ids) < 2:
        return []
    if use_camera_centers:
        pos = np.array([scene.images[i].center() for i in ids])
    else:
        pos = np.array([scene.images[i].tvec for i in ids])
    n = len(ids)
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    id_arr = np.array(ids)
    neighbors: list[set[int]] = []
    for i in range(n):
        order = np.lexsort((id_arr, dist[i]))
        order = order[order != i]
        neighbors.append(set(id_arr[order[:k]].tolist()))
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            if id_arr[j] in neighbors[i] and id_arr[i] in neighbors[j]:
                pairs.append((ids[i], ids[j]))
    return pairs


def classify_overlap_angles(
    yaw_deg: float, pitch_deg: float, fov_a: tuple[float, float], fov_b: tuple[float, float]
) -> OverlapCategory:
    """Case equation on |yaw|, |pitch| against combined FoV quarter/half sums.

    Large iff both angles are under the quarter-sum, None iff both exceed the
    half-sum; everything else (including boundary equalities) is Small.
    """
    g, b = abs(yaw_deg), abs(pitch_deg)
    sum_x = fov_a[0] + fov_b[0]
    sum_y = fov_a[1] + fov_b[1]
    if g < sum_x / 4.0 and b < sum_y / 4.0:
        return OverlapCategory.LARGE
    if g > sum_x / 2.0 and b > sum_y / 2.0:
        return OverlapCategory.NONE
    return OverlapCategory.SMALL


def classify_overlap(
    r_rel: np.ndarray, fov_a: tuple[float, float], fov_b: tuple[float, float]
) -> OverlapCategory:
    """Classify a relative rotation, symmetric in the two cameras.

    The Y-X-Z decomposition of R and of R^T can give different |yaw|/|pitch|
    (the Euler split is not transpose-invariant), but the pair label must not
    depend on which image comes first, so both directions are decomposed and
    the larger magnitudes are used.
    """
    y1, p1 = so3.yaw_pitch_deg(r_rel)
    y2, p2 = so3.yaw_pitch_deg(r_rel.T)
    return classify_overlap_angles(
        max(abs(y1), abs(y2)), max(abs(p1), abs(p2)), fov_a, fov_b
    )


def scale_consistent(cam_a: PinholeCamera, cam_b: PinholeCamera, cfg: CurationConfig) -> bool:
    """FoV difference, focal ratio and resolution ratio gates (all strict)."""
    fov_a = camera_fov_deg(cam_a)
    fov_b = camera_fov_deg(cam_b)
    if abs(fov_a[0] - fov_b[0]) >= cfg.fov_delta_max:
        return False
    if abs(fov_a[1] - fov_b[1]) >= cfg.fov_delta_max:
        return False
    if max(cam_a.fx, cam_b.fx) / min(cam_a.fx, cam_b.fx) >= cfg.focal_ratio_max:
        return False
    area_a = cam_a.width * cam_a.height
    area_b = cam_b.width * cam_b.height
    if max(area_a, area_b) / min(area_a, area_b) >= cfg.resolution_ratio_max:
        return False
    return True


def relative_pose(scene: SparseScene, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """GT relative pose (R_rel, t_rel) mapping camera-a coords to camera-b."""
    img_a, img_b = scene.images[a], scene.images[b]
    r_a, r_b = img_a.rotation(), img_b.rotation()
    r_rel = so3.relative_rotation(r_a, r_b)
    t_rel = img_b.tvec - r_rel @ img_a.tvec
    return r_rel, t_rel


@dataclass
class VerificationEntry:
    match_count: int = 0
    coverage: float = 0.0


VerificationTable = dict[tuple[str, str], VerificationEntry]


def load_verification_table(path: str | Path) -> VerificationTable:
    """CSV with header image_a,image_b,match_count,coverage (image names)."""
    table: VerificationTable = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"image_a", "image_b", "match_count", "coverage"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"verification table needs columns {sorted(required)}")
        for row in reader:
            key = tuple(sorted((row["image_a"], row["image_b"])))
            table[key] = VerificationEntry(int(row["match_count"]), float(row["coverage"]))
    return table


def load_exclusion_list(path: str | Path) -> set[tuple[str, str, str]]:
    """One `scene_id,image_a,image_b` per line (image names, unordered)."""
    out = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ValueError(f"exclusion list line {lineno}: expected scene_id,image_a,image_b")
        out.add((parts[0], *sorted(parts[1:])))
    return out


def _subsample(items: list, size: int, rng: np.random.Generator) -> list:
    if len(items) <= size:
        return list(items)
    idx = rng.choice(len(items), size=size, replace=False)
    return [items[i] for i in sorted(idx.tolist())]


def balance_categories(pairs: list[ImagePair], seed: int) -> list[ImagePair]:
    """Subsample every category down to the smallest category count."""
    buckets = {cat: [p for p in pairs if p.category is cat] for cat in OverlapCategory}
    m = min(len(b) for b in buckets.values())
    rng = np.random.default_rng(seed)
    out = []
    for cat in OverlapCategory:  # fixed order so the rng stream is reproducible
        out.extend(_subsample(buckets[cat], m, rng))
    out.sort(key=lambda p: p.key())
    return out


def curate(
    scene: SparseScene,
    scene_id: str,
    cfg: CurationConfig,
    verification: VerificationTable | None = None,
    exclusions: set[tuple[str, str, str]] | None = None,
) -> list[ImagePair]:
    """Build the curated pair list for one scene.

    With a verification table, None pairs with any matches are dropped and
    Large/Small labels are kept only when the pair's spatial match coverage
    agrees with the label (Large iff coverage >= cfg.coverage_threshold);
    pairs passing those checks are marked verified.
    """
    candidates = mutual_knn_pairs(scene, cfg.k, cfg.use_camera_centers)
    pairs: list[ImagePair] = []
    for a, b in sorted(candidates):
        cam_a = scene.cameras[scene.images[a].camera_id]
        cam_b = scene.cameras[scene.images[b].camera_id]
        if cfg.scale_filter and not scale_consistent(cam_a, cam_b, cfg):
            continue
        r_rel, t_rel = relative_pose(scene, a, b)
        yaw, pitch = so3.yaw_pitch_deg(r_rel)
        category = classify_overlap_angles(yaw, pitch, camera_fov_deg(cam_a), camera_fov_deg(cam_b))
        verified = False
        if verification is not None:
            name_key = tuple(sorted((scene.images[a].name, scene.images[b].name)))
            entry = verification.get(name_key, VerificationEntry())
            if category is OverlapCategory.NONE:
                if entry.match_count > 0:
                    continue
            elif category is OverlapCategory.LARGE:
                if entry.coverage < cfg.coverage_threshold:
                    continue
            else:
                if entry.coverage >= cfg.coverage_threshold:
                    continue
            verified = True
        if exclusions:
            name_key = (scene_id, *sorted((scene.images[a].name, scene.images[b].name)))
            if name_key in exclusions:
                continue
        pairs.append(ImagePair(scene_id, a, b, r_rel, t_rel, category, yaw, pitch, verified))
    rng = np.random.default_rng(cfg.seed)
    pairs = _subsample(pairs, cfg.max_pairs_per_scene, rng)
    if cfg.balance:
        pairs = balance_categories(pairs, cfg.seed)
    return pairs


def write_pairs_jsonl(pairs: list[ImagePair], path: str | Path) -> None:
    with open(path, "w") as f:
        for p in pairs:
            f.write(json.dumps(p.to_json_dict(), sort_keys=True) + "\n")


def read_pairs_jsonl(path: str | Path) -> list[ImagePair]:
    pairs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            pairs.append(ImagePair.from_json_dict(json.loads(line)))
        except (KeyError, ValueError) as e:
            raise ValueError(f"{path}: line {lineno}: {e}") from None
    return pairs
