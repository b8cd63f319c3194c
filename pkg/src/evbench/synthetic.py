"""Synthetic scene builders for demos, tests and service fixtures.

The scenes are small but structurally complete: consistent observation /
track cross-links, valid poses, one shared pinhole camera.
"""

from __future__ import annotations

import math

import numpy as np

from . import so3
from .colmap_io import CameraModelType, ImageRecord, PinholeCamera, Point3D, SparseScene


def pinhole_camera(
    camera_id: int = 1, width: int = 640, height: int = 480, fx: float = 500.0, fy: float | None = None
) -> PinholeCamera:
    fy = fx if fy is None else fy
    return PinholeCamera(
        camera_id, CameraModelType.PINHOLE, width, height, (fx, fy, width / 2.0, height / 2.0)
    )


def pose_from_center(rotation: np.ndarray, center) -> tuple[np.ndarray, np.ndarray]:
    """world->camera (qvec, tvec) for a camera at `center`."""
    tvec = -rotation @ np.asarray(center, dtype=np.float64)
    return so3.matrix_to_quat(rotation), tvec


def random_scene(
    rng: np.random.Generator,
    n_images: int = 8,
    n_points: int = 40,
    obs_prob: float = 0.6,
    centers: np.ndarray | None = None,
    rotations: list[np.ndarray] | None = None,
) -> SparseScene:
    """Random scene with internally consistent tracks and observations."""
    cam = pinhole_camera()
    images: dict[int, ImageRecord] = {}
    obs_lists: dict[int, list] = {}
    if centers is None:
        centers = rng.uniform(-5, 5, size=(n_images, 3))
    for i in range(n_images):
        image_id = i + 1
        rotation = rotations[i] if rotations is not None else so3.random_rotation(rng)
        qvec, tvec = pose_from_center(rotation, centers[i])
        images[image_id] = ImageRecord(
            image_id, f"img_{image_id:04d}.jpg", cam.camera_id, qvec, tvec,
            np.empty((0, 2)), np.empty(0, dtype=np.int64),
        )
        obs_lists[image_id] = []
    points: dict[int, Point3D] = {}
    for j in range(n_points):
        point_id = 100 + j
        xyz = rng.uniform(-10, 10, size=3)
        rgb = rng.integers(0, 256, size=3).astype(np.uint8)
        track = []
        for i in range(n_images):
            if rng.random() >= obs_prob:
                continue
            image_id = i + 1
            idx = len(obs_lists[image_id])
            obs_lists[image_id].append((rng.uniform(0, 640), rng.uniform(0, 480), point_id))
            track.append((image_id, idx))
        points[point_id] = Point3D(point_id, xyz, rgb, float(rng.uniform(0, 2)), track)
    for image_id, obs in obs_lists.items():
        if rng.random() < 0.5:  # some unregistered observations
            obs.append((rng.uniform(0, 640), rng.uniform(0, 480), -1))
        img = images[image_id]
        if obs:
            xys = np.array([(x, y) for x, y, _ in obs])
            pids = np.array([p for _, _, p in obs], dtype=np.int64)
        else:
            xys, pids = np.empty((0, 2)), np.empty(0, dtype=np.int64)
        images[image_id] = ImageRecord(
            img.image_id, img.name, img.camera_id, img.qvec, img.tvec, xys, pids
        )
    return SparseScene(cameras={cam.camera_id: cam}, images=images, points3d=points)


def ring_scene(n_images: int = 8, radius: float = 4.0, n_points: int = 30, seed: int = 0) -> SparseScene:
    """Cameras on a circle in the xz plane, all looking at the origin."""
    rng = np.random.default_rng(seed)
    centers = []
    rotations = []
    for i in range(n_images):
        ang = 2.0 * math.pi * i / n_images
        centers.append([radius * math.sin(ang), 0.0, radius * math.cos(ang)])
        rotations.append(so3.rot_y(math.degrees(ang)).T)
    return random_scene(
        rng, n_images=n_images, n_points=n_points,
        centers=np.array(centers), rotations=rotations,
    )
