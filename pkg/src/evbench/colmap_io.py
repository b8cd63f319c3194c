"""Reader/writer for COLMAP sparse models (binary and text).

On-disk contract (matching COLMAP's read_write_model layout):

cameras.bin   u64 count; per camera: i32 id, i32 model_id, u64 width,
              u64 height, f64 params[num_params(model)]
images.bin    u64 count; per image: i32 id, 4*f64 qvec (scalar-first,
              world->camera), 3*f64 tvec, i32 camera_id, NUL-terminated
              name, u64 n_obs, per obs: f64 x, f64 y, i64 point3D_id
points3D.bin  u64 count; per point: u64 id, 3*f64 xyz, 3*u8 rgb,
              f64 error, u64 track_len, per entry: i32 image_id,
              i32 point2D_idx

All integers little-endian. The text variant is the standard three-file
layout with '#' comment headers; floats are printed at full round-trip
precision so text conversion is lossless.

Readers are total: any byte string either parses into a scene satisfying
all invariants or raises a ColmapParseError subclass naming the byte
offset / line number. Writers order records by id, so a second write of
the same scene is byte-identical.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .so3 import quat_to_matrix

QUAT_NORM_TOL = 1e-6


class CameraModelType(enum.Enum):
    SIMPLE_PINHOLE = 0
    PINHOLE = 1
    SIMPLE_RADIAL = 2
    RADIAL = 3
    OPENCV = 4


PARAM_COUNTS = {
    CameraModelType.SIMPLE_PINHOLE: 3,
    CameraModelType.PINHOLE: 4,
    CameraModelType.SIMPLE_RADIAL: 4,
    CameraModelType.RADIAL: 5,
    CameraModelType.OPENCV: 8,
}

_MODEL_BY_ID = {m.value: m for m in CameraModelType}
_MODEL_BY_NAME = {m.name: m for m in CameraModelType}


class ColmapParseError(ValueError):
    """Base for structured parse failures; `location` is a byte offset or line."""

    def __init__(self, message: str, location: str | None = None, path: str | None = None):
        self.location = location
        self.path = path
        where = f" [{path or ''}{' @ ' if location else ''}{location or ''}]" if (location or path) else ""
        super().__init__(message + where)


class TruncatedFileError(ColmapParseError):
    pass


class UnknownCameraModelError(ColmapParseError):
    pass


class DuplicateIdError(ColmapParseError):
    pass


class DanglingReferenceError(ColmapParseError):
    pass


@dataclass(frozen=True)
class PinholeCamera:
    camera_id: int
    model: CameraModelType
    width: int
    height: int
    params: tuple[float, ...]

    def __post_init__(self):
        expected = PARAM_COUNTS[self.model]
        if len(self.params) != expected:
            raise ValueError(
                f"camera {self.camera_id}: model {self.model.name} needs "
                f"{expected} params, got {len(self.params)}"
            )
        if self.width < 1 or self.height < 1:
            raise ValueError(f"camera {self.camera_id}: non-positive dimensions")
        if not all(np.isfinite(p) for p in self.params):
            raise ValueError(f"camera {self.camera_id}: non-finite params")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"camera {self.camera_id}: focal length must be positive")

    @property
    def fx(self) -> float:
        return self.params[0]

    @property
    def fy(self) -> float:
        if self.model in (CameraModelType.PINHOLE, CameraModelType.OPENCV):
            return self.params[1]
        return self.params[0]

    @property
    def cx(self) -> float:
        if self.model in (CameraModelType.PINHOLE, CameraModelType.OPENCV):
            return self.params[2]
        return self.params[1]

    @property
    def cy(self) -> float:
        if self.model in (CameraModelType.PINHOLE, CameraModelType.OPENCV):
            return self.params[3]
        return self.params[2]


@dataclass
class ImageRecord:
    image_id: int
    name: str
    camera_id: int
    qvec: np.ndarray  # (4,) scalar-first, world->camera
    tvec: np.ndarray  # (3,)
    xys: np.ndarray  # (N, 2) pixel observations
    point3d_ids: np.ndarray  # (N,) int64, -1 = no 3D point

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.qvec)

    def center(self) -> np.ndarray:
        """Camera center C = -R^T t in world coordinates."""
        return -self.rotation().T @ self.tvec

    def n_registered(self) -> int:
        return int(np.count_nonzero(self.point3d_ids >= 0))


@dataclass
class Point3D:
    point_id: int
    xyz: np.ndarray  # (3,)
    rgb: np.ndarray  # (3,) uint8
    error: float
    track: list[tuple[int, int]] = field(default_factory=list)  # (image_id, point2D_idx)


@dataclass
class SparseScene:
    cameras: dict[int, PinholeCamera] = field(default_factory=dict)
    images: dict[int, ImageRecord] = field(default_factory=dict)
    points3d: dict[int, Point3D] = field(default_factory=dict)
    scale_to_meters: float | None = None


# ---------------------------------------------------------------------------
# binary parsing


class _Cursor:
    """Byte reader that raises TruncatedFileError instead of under-reading."""

    def __init__(self, data: bytes, path: str | None):
        self.data = data
        self.pos = 0
        self.path = path

    def read(self, fmt: str):
        size = struct.calcsize("<" + fmt)
        if self.pos + size > len(self.data):
            raise TruncatedFileError(
                f"need {size} bytes for '{fmt}', {len(self.data) - self.pos} remain",
                location=f"byte {self.pos}",
                path=self.path,
            )
        out = struct.unpack_from("<" + fmt, self.data, self.pos)
        self.pos += size
        return out

    def read_cstring(self) -> str:
        end = self.data.find(b"\x00", self.pos)
        if end < 0:
            raise TruncatedFileError(
                "unterminated string", location=f"byte {self.pos}", path=self.path
            )
        raw = self.data[self.pos : end]
        self.pos = end + 1
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ColmapParseError(
                f"image name is not valid UTF-8: {e}", location=f"byte {self.pos}", path=self.path
            ) from None

    def require(self, nbytes: int, what: str):
        if self.pos + nbytes > len(self.data):
            raise TruncatedFileError(
                f"{what} needs {nbytes} bytes, {len(self.data) - self.pos} remain",
                location=f"byte {self.pos}",
                path=self.path,
            )

    def expect_eof(self):
        if self.pos != len(self.data):
            raise ColmapParseError(
                f"{len(self.data) - self.pos} trailing bytes after last record",
                location=f"byte {self.pos}",
                path=self.path,
            )


def parse_cameras_bin(data: bytes, path: str | None = None) -> dict[int, PinholeCamera]:
    cur = _Cursor(data, path)
    (n,) = cur.read("Q")
    cameras: dict[int, PinholeCamera] = {}
    for _ in range(n):
        at = cur.pos
        camera_id, model_id, width, height = cur.read("iiQQ")
        if model_id not in _MODEL_BY_ID:
            raise UnknownCameraModelError(
                f"unknown camera model id {model_id}", location=f"byte {at}", path=path
            )
        model = _MODEL_BY_ID[model_id]
        params = cur.read("d" * PARAM_COUNTS[model])
        if camera_id in cameras:
            raise DuplicateIdError(f"duplicate camera id {camera_id}", location=f"byte {at}", path=path)
        try:
            cameras[camera_id] = PinholeCamera(camera_id, model, width, height, tuple(params))
        except ValueError as e:
            raise ColmapParseError(str(e), location=f"byte {at}", path=path) from None
    cur.expect_eof()
    return cameras


def parse_images_bin(data: bytes, path: str | None = None) -> dict[int, ImageRecord]:
    cur = _Cursor(data, path)
    (n,) = cur.read("Q")
    images: dict[int, ImageRecord] = {}
    for _ in range(n):
        at = cur.pos
        vals = cur.read("idddddddi")
        image_id = vals[0]
        qvec = np.array(vals[1:5])
        tvec = np.array(vals[5:8])
        camera_id = vals[8]
        name = cur.read_cstring()
        (n_obs,) = cur.read("Q")
        cur.require(24 * n_obs, f"{n_obs} observations")
        obs = cur.read("ddq" * n_obs)
        xys = np.array(obs, dtype=np.float64).reshape(-1, 3)[:, :2] if n_obs else np.empty((0, 2))
        pids = np.array(obs[2::3], dtype=np.int64) if n_obs else np.empty(0, dtype=np.int64)
        if image_id in images:
            raise DuplicateIdError(f"duplicate image id {image_id}", location=f"byte {at}", path=path)
        _check_image_values(image_id, qvec, tvec, xys, pids, f"byte {at}", path)
        images[image_id] = ImageRecord(image_id, name, camera_id, qvec, tvec, xys, pids)
    cur.expect_eof()
    return images


def parse_points_bin(data: bytes, path: str | None = None) -> dict[int, Point3D]:
    cur = _Cursor(data, path)
    (n,) = cur.read("Q")
    points: dict[int, Point3D] = {}
    for _ in range(n):
        at = cur.pos
        vals = cur.read("QdddBBBd")
        point_id = vals[0]
        xyz = np.array(vals[1:4])
        rgb = np.array(vals[4:7], dtype=np.uint8)
        error = vals[7]
        (track_len,) = cur.read("Q")
        cur.require(8 * track_len, f"{track_len} track entries")
        raw = cur.read("ii" * track_len)
        track = [(raw[2 * i], raw[2 * i + 1]) for i in range(track_len)]
        if point_id in points:
            raise DuplicateIdError(f"duplicate point id {point_id}", location=f"byte {at}", path=path)
        _check_point_values(point_id, xyz, error, f"byte {at}", path)
        points[point_id] = Point3D(point_id, xyz, rgb, float(error), track)
    cur.expect_eof()
    return points


def _check_image_values(image_id, qvec, tvec, xys, pids, location, path):
    if not (np.isfinite(qvec).all() and np.isfinite(tvec).all() and np.isfinite(xys).all()):
        raise ColmapParseError(
            f"image {image_id}: non-finite pose or observation values", location=location, path=path
        )
    norm = float(np.linalg.norm(qvec))
    if abs(norm - 1.0) > QUAT_NORM_TOL:
        raise ColmapParseError(
            f"image {image_id}: quaternion norm {norm:.9f} not within {QUAT_NORM_TOL} of 1",
            location=location,
            path=path,
        )
    if pids.size and int(pids.min()) < -1:
        raise ColmapParseError(
            f"image {image_id}: point3D id below -1", location=location, path=path
        )


def _check_point_values(point_id, xyz, error, location, path):
    if not (np.isfinite(xyz).all() and np.isfinite(error)):
        raise ColmapParseError(f"point {point_id}: non-finite values", location=location, path=path)


# ---------------------------------------------------------------------------
# text parsing


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def _to_int(tok: str, lineno: int, path: str | None) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ColmapParseError(f"expected integer, got {tok!r}", f"line {lineno}", path) from None


def _to_float(tok: str, lineno: int, path: str | None) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ColmapParseError(f"expected number, got {tok!r}", f"line {lineno}", path) from None


def parse_cameras_txt(text: str, path: str | None = None) -> dict[int, PinholeCamera]:
    cameras: dict[int, PinholeCamera] = {}
    for lineno, line in _content_lines(text):
        toks = line.split()
        if len(toks) < 4:
            raise ColmapParseError("camera line needs id, model, width, height", f"line {lineno}", path)
        camera_id = _to_int(toks[0], lineno, path)
        if toks[1] not in _MODEL_BY_NAME:
            raise UnknownCameraModelError(f"unknown camera model {toks[1]!r}", f"line {lineno}", path)
        model = _MODEL_BY_NAME[toks[1]]
        width = _to_int(toks[2], lineno, path)
        height = _to_int(toks[3], lineno, path)
        params = tuple(_to_float(t, lineno, path) for t in toks[4:])
        if len(params) != PARAM_COUNTS[model]:
            raise ColmapParseError(
                f"model {model.name} needs {PARAM_COUNTS[model]} params, got {len(params)}",
                f"line {lineno}",
                path,
            )
        if camera_id in cameras:
            raise DuplicateIdError(f"duplicate camera id {camera_id}", f"line {lineno}", path)
        try:
            cameras[camera_id] = PinholeCamera(camera_id, model, width, height, params)
        except ValueError as e:
            raise ColmapParseError(str(e), f"line {lineno}", path) from None
    return cameras


def parse_images_txt(text: str, path: str | None = None) -> dict[int, ImageRecord]:
    images: dict[int, ImageRecord] = {}
    lines = text.splitlines()
    i = 0
    n_lines = len(lines)
    while i < n_lines:
        raw = lines[i].strip()
        if not raw or raw.startswith("#"):
            i += 1
            continue
        lineno = i + 1
        toks = raw.split()
        if len(toks) != 10:
            raise ColmapParseError(
                f"image header needs 10 fields, got {len(toks)}", f"line {lineno}", path
            )
        image_id = _to_int(toks[0], lineno, path)
        qvec = np.array([_to_float(t, lineno, path) for t in toks[1:5]])
        tvec = np.array([_to_float(t, lineno, path) for t in toks[5:8]])
        camera_id = _to_int(toks[8], lineno, path)
        name = toks[9]
        if i + 1 >= n_lines:
            raise TruncatedFileError(
                f"image {image_id} is missing its observations line", f"line {lineno}", path
            )
        obs_toks = lines[i + 1].split()
        if len(obs_toks) % 3 != 0:
            raise ColmapParseError(
                "observations line length is not a multiple of 3", f"line {lineno + 1}", path
            )
        n_obs = len(obs_toks) // 3
        xys = np.array(
            [[_to_float(obs_toks[3 * k], lineno + 1, path),
              _to_float(obs_toks[3 * k + 1], lineno + 1, path)] for k in range(n_obs)]
        ).reshape(-1, 2) if n_obs else np.empty((0, 2))
        pids = np.array(
            [_to_int(obs_toks[3 * k + 2], lineno + 1, path) for k in range(n_obs)], dtype=np.int64
        ) if n_obs else np.empty(0, dtype=np.int64)
        if image_id in images:
            raise DuplicateIdError(f"duplicate image id {image_id}", f"line {lineno}", path)
        _check_image_values(image_id, qvec, tvec, xys, pids, f"line {lineno}", path)
        images[image_id] = ImageRecord(image_id, name, camera_id, qvec, tvec, xys, pids)
        i += 2
    return images


def parse_points_txt(text: str, path: str | None = None) -> dict[int, Point3D]:
    points: dict[int, Point3D] = {}
    for lineno, line in _content_lines(text):
        toks = line.split()
        if len(toks) < 8 or (len(toks) - 8) % 2 != 0:
            raise ColmapParseError(
                "point line needs 8 fields plus (image_id, point2D_idx) pairs", f"line {lineno}", path
            )
        point_id = _to_int(toks[0], lineno, path)
        xyz = np.array([_to_float(t, lineno, path) for t in toks[1:4]])
        rgb_vals = [_to_int(t, lineno, path) for t in toks[4:7]]
        if any(v < 0 or v > 255 for v in rgb_vals):
            raise ColmapParseError("rgb values must be in [0, 255]", f"line {lineno}", path)
        error = _to_float(toks[7], lineno, path)
        track = [
            (_to_int(toks[8 + 2 * k], lineno, path), _to_int(toks[9 + 2 * k], lineno, path))
            for k in range((len(toks) - 8) // 2)
        ]
        if point_id in points:
            raise DuplicateIdError(f"duplicate point id {point_id}", f"line {lineno}", path)
        _check_point_values(point_id, xyz, error, f"line {lineno}", path)
        points[point_id] = Point3D(point_id, xyz, np.array(rgb_vals, dtype=np.uint8), error, track)
    return points


# ---------------------------------------------------------------------------
# scene assembly and validation


def validate_scene(scene: SparseScene) -> None:
    """Check cross-table invariants; raises DanglingReferenceError on failure.

    - every image references an existing camera
    - every observation with point3D_id >= 0 references an existing point
    - every track entry points back to an observation of that point
    - camera centers are finite
    """
    for img in scene.images.values():
        if img.camera_id not in scene.cameras:
            raise DanglingReferenceError(
                f"image {img.image_id} references missing camera {img.camera_id}"
            )
        if not np.isfinite(img.center()).all():
            raise ColmapParseError(f"image {img.image_id} has a non-finite camera center")
        for pid in img.point3d_ids[img.point3d_ids >= 0]:
            if int(pid) not in scene.points3d:
                raise DanglingReferenceError(
                    f"image {img.image_id} observes missing point {int(pid)}"
                )
    for pt in scene.points3d.values():
        for image_id, idx in pt.track:
            img = scene.images.get(image_id)
            if img is None:
                raise DanglingReferenceError(
                    f"point {pt.point_id} track references missing image {image_id}"
                )
            if idx < 0 or idx >= len(img.point3d_ids):
                raise DanglingReferenceError(
                    f"point {pt.point_id} track references observation {idx} "
                    f"out of range for image {image_id}"
                )
            if int(img.point3d_ids[idx]) != pt.point_id:
                raise DanglingReferenceError(
                    f"point {pt.point_id} track entry ({image_id}, {idx}) does not "
                    f"point back to it (observation has id {int(img.point3d_ids[idx])})"
                )


def parse_scene_bytes(
    cameras: bytes | str,
    images: bytes | str,
    points: bytes | str,
    fmt: str,
    paths: tuple[str, str, str] = ("cameras", "images", "points3D"),
) -> SparseScene:
    """Assemble and validate a scene from raw file contents."""
    if fmt == "binary":
        scene = SparseScene(
            cameras=parse_cameras_bin(cameras, paths[0]),
            images=parse_images_bin(images, paths[1]),
            points3d=parse_points_bin(points, paths[2]),
        )
    elif fmt == "text":
        scene = SparseScene(
            cameras=parse_cameras_txt(cameras, paths[0]),
            images=parse_images_txt(images, paths[1]),
            points3d=parse_points_txt(points, paths[2]),
        )
    else:
        raise ValueError(f"unknown format {fmt!r}")
    validate_scene(scene)
    return scene


def _model_files(path: Path, ext: str) -> tuple[Path, Path, Path]:
    return path / f"cameras{ext}", path / f"images{ext}", path / f"points3D{ext}"


def read_sparse_model(path: str | Path, fmt: str = "auto") -> SparseScene:
    """Read a COLMAP sparse model directory ('binary', 'text' or 'auto')."""
    path = Path(path)
    if fmt == "auto":
        if all(p.exists() for p in _model_files(path, ".bin")):
            fmt = "binary"
        elif all(p.exists() for p in _model_files(path, ".txt")):
            fmt = "text"
        else:
            raise FileNotFoundError(f"no complete .bin or .txt model found in {path}")
    ext = ".bin" if fmt == "binary" else ".txt"
    files = _model_files(path, ext)
    for p in files:
        if not p.exists():
            raise FileNotFoundError(f"missing model file {p}")
    if fmt == "binary":
        contents = tuple(p.read_bytes() for p in files)
    else:
        contents = tuple(p.read_text() for p in files)
    return parse_scene_bytes(*contents, fmt=fmt, paths=tuple(str(p) for p in files))


# ---------------------------------------------------------------------------
# writers


def _fmt_float(x: float) -> str:
    return repr(float(x))


def dump_cameras_bin(cameras: dict[int, PinholeCamera]) -> bytes:
    out = [struct.pack("<Q", len(cameras))]
    for cam in (cameras[k] for k in sorted(cameras)):
        out.append(struct.pack("<iiQQ", cam.camera_id, cam.model.value, cam.width, cam.height))
        out.append(struct.pack(f"<{len(cam.params)}d", *cam.params))
    return b"".join(out)


def dump_images_bin(images: dict[int, ImageRecord]) -> bytes:
    out = [struct.pack("<Q", len(images))]
    for img in (images[k] for k in sorted(images)):
        out.append(struct.pack("<idddddddi", img.image_id, *img.qvec, *img.tvec, img.camera_id))
        out.append(img.name.encode("utf-8") + b"\x00")
        out.append(struct.pack("<Q", len(img.point3d_ids)))
        for (x, y), pid in zip(img.xys, img.point3d_ids):
            out.append(struct.pack("<ddq", x, y, int(pid)))
    return b"".join(out)


def dump_points_bin(points: dict[int, Point3D]) -> bytes:
    out = [struct.pack("<Q", len(points))]
    for pt in (points[k] for k in sorted(points)):
        out.append(struct.pack("<QdddBBBd", pt.point_id, *pt.xyz, *pt.rgb, pt.error))
        out.append(struct.pack("<Q", len(pt.track)))
        for image_id, idx in pt.track:
            out.append(struct.pack("<ii", image_id, idx))
    return b"".join(out)


def _check_text_name(name: str):
    if not name or any(c.isspace() for c in name):
        raise ValueError(
            f"image name {name!r} cannot be represented in the text format "
            "(empty or contains whitespace)"
        )


def dump_cameras_txt(cameras: dict[int, PinholeCamera]) -> str:
    lines = [
        "# Camera list with one line of data per camera:",
        "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]",
        f"# Number of cameras: {len(cameras)}",
    ]
    for cam in (cameras[k] for k in sorted(cameras)):
        parts = [str(cam.camera_id), cam.model.name, str(cam.width), str(cam.height)]
        parts += [_fmt_float(p) for p in cam.params]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def dump_images_txt(images: dict[int, ImageRecord]) -> str:
    n_obs = sum(len(img.point3d_ids) for img in images.values())
    mean_obs = n_obs / len(images) if images else 0
    lines = [
        "# Image list with two lines of data per image:",
        "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME",
        "#   POINTS2D[] as (X, Y, POINT3D_ID)",
        f"# Number of images: {len(images)}, mean observations per image: {_fmt_float(mean_obs)}",
    ]
    for img in (images[k] for k in sorted(images)):
        _check_text_name(img.name)
        head = [str(img.image_id)]
        head += [_fmt_float(v) for v in img.qvec]
        head += [_fmt_float(v) for v in img.tvec]
        head += [str(img.camera_id), img.name]
        lines.append(" ".join(head))
        obs = []
        for (x, y), pid in zip(img.xys, img.point3d_ids):
            obs += [_fmt_float(x), _fmt_float(y), str(int(pid))]
        lines.append(" ".join(obs))
    return "\n".join(lines) + "\n"


def dump_points_txt(points: dict[int, Point3D]) -> str:
    n_track = sum(len(pt.track) for pt in points.values())
    mean_track = n_track / len(points) if points else 0
    lines = [
        "# 3D point list with one line of data per point:",
        "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)",
        f"# Number of points: {len(points)}, mean track length: {_fmt_float(mean_track)}",
    ]
    for pt in (points[k] for k in sorted(points)):
        parts = [str(pt.point_id)]
        parts += [_fmt_float(v) for v in pt.xyz]
        parts += [str(int(v)) for v in pt.rgb]
        parts.append(_fmt_float(pt.error))
        for image_id, idx in pt.track:
            parts += [str(image_id), str(idx)]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def write_sparse_model(scene: SparseScene, path: str | Path, fmt: str) -> None:
    """Write cameras/images/points3D files; records are ordered by id."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if fmt == "binary":
        files = _model_files(path, ".bin")
        files[0].write_bytes(dump_cameras_bin(scene.cameras))
        files[1].write_bytes(dump_images_bin(scene.images))
        files[2].write_bytes(dump_points_bin(scene.points3d))
    elif fmt == "text":
        files = _model_files(path, ".txt")
        files[0].write_text(dump_cameras_txt(scene.cameras))
        files[1].write_text(dump_images_txt(scene.images))
        files[2].write_text(dump_points_txt(scene.points3d))
    else:
        raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# queries


def camera_fov_deg(cam: PinholeCamera) -> tuple[float, float]:
    """Horizontal and vertical field of view in degrees, each in (0, 180)."""
    fov_x = 2.0 * np.degrees(np.arctan(cam.width / (2.0 * cam.fx)))
    fov_y = 2.0 * np.degrees(np.arctan(cam.height / (2.0 * cam.fy)))
    return float(fov_x), float(fov_y)


def shared_points(scene: SparseScene, a: int, b: int) -> int:
    """Number of 3D points observed by both images; symmetric in (a, b)."""
    for image_id in (a, b):
        if image_id not in scene.images:
            raise KeyError(f"unknown image id {image_id}")
    ids_a = scene.images[a].point3d_ids
    ids_b = scene.images[b].point3d_ids
    set_a = set(ids_a[ids_a >= 0].tolist())
    if a == b:
        return len(set_a)
    set_b = set(ids_b[ids_b >= 0].tolist())
    return len(set_a & set_b)


def scenes_equal(a: SparseScene, b: SparseScene) -> bool:
    """Field-exact comparison of two scenes (used by round-trip checks)."""
    if set(a.cameras) != set(b.cameras) or set(a.images) != set(b.images):
        return False
    if set(a.points3d) != set(b.points3d):
        return False
    for k, ca in a.cameras.items():
        if ca != b.cameras[k]:
            return False
    for k, ia in a.images.items():
        ib = b.images[k]
        if ia.name != ib.name or ia.camera_id != ib.camera_id:
            return False
        if not (
            np.array_equal(ia.qvec, ib.qvec)
            and np.array_equal(ia.tvec, ib.tvec)
            and np.array_equal(ia.xys, ib.xys)
            and np.array_equal(ia.point3d_ids, ib.point3d_ids)
        ):
            return False
    for k, pa in a.points3d.items():
        pb = b.points3d[k]
        if pa.error != pb.error or pa.track != pb.track:
            return False
        if not (np.array_equal(pa.xyz, pb.xyz) and np.array_equal(pa.rgb, pb.rgb)):
            return False
    return True
