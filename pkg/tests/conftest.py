import numpy as np
import pytest

from evbench import so3
from evbench.colmap_io import ImageRecord, Point3D, SparseScene
from evbench.synthetic import pinhole_camera, pose_from_center, random_scene, ring_scene


def make_camera(camera_id=1, width=640, height=480, fx=500.0, fy=None, model="PINHOLE"):
    if model == "PINHOLE":
        return pinhole_camera(camera_id, width, height, fx, fy)
    if model == "SIMPLE_PINHOLE":
        from evbench.colmap_io import CameraModelType, PinholeCamera

        return PinholeCamera(
            camera_id, CameraModelType.SIMPLE_PINHOLE, width, height,
            (fx, width / 2.0, height / 2.0),
        )
    raise ValueError(model)


def make_scene(rng, n_images=8, n_points=40, obs_prob=0.6, centers=None, rotations=None):
    return random_scene(rng, n_images, n_points, obs_prob, centers, rotations)


def make_ring_scene(n_images=8, radius=4.0, n_points=30, seed=0):
    return ring_scene(n_images, radius, n_points, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def small_scene():
    """Deterministic 2-image, 3-point scene; images share exactly points {107, 109}."""
    cam = make_camera()
    q1, t1 = pose_from_center(np.eye(3), [0.0, 0.0, -4.0])
    q2, t2 = pose_from_center(so3.rot_y(30.0), [1.0, 0.0, -4.0])
    img1 = ImageRecord(
        1, "a.jpg", 1, q1, t1,
        np.array([[10.0, 20.0], [30.0, 40.0], [50.0, 60.0]]),
        np.array([107, 108, 109], dtype=np.int64),
    )
    img2 = ImageRecord(
        2, "b.jpg", 1, q2, t2,
        np.array([[11.0, 21.0], [31.0, 41.0], [51.0, 61.0]]),
        np.array([107, 109, -1], dtype=np.int64),
    )
    points = {
        107: Point3D(107, np.array([0.0, 0.0, 1.0]), np.array([255, 0, 0], dtype=np.uint8),
                     0.5, [(1, 0), (2, 0)]),
        108: Point3D(108, np.array([1.0, 1.0, 2.0]), np.array([0, 255, 0], dtype=np.uint8),
                     0.7, [(1, 1)]),
        109: Point3D(109, np.array([-1.0, 0.5, 3.0]), np.array([0, 0, 255], dtype=np.uint8),
                     0.9, [(1, 2), (2, 1)]),
    }
    return SparseScene(cameras={1: cam}, images={1: img1, 2: img2}, points3d=points)
