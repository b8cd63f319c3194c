"""HTTP service backing the annotation UI.

Endpoints:
    GET  /api/scenes                         -> [{id, n_images, annotated}]
    GET  /api/scenes/{id}/cloud?max_points=N -> binary .evbt stream (Nx6 f32:
                                                xyz + rgb in [0, 1]; seeded
                                                uniform downsampling)
    GET  /api/scenes/{id}/images             -> {"images": [{image_id, name, url?}]}
    GET  /api/scenes/{id}/files/{name}       -> raw image file when present
    POST /api/scenes/{id}/annotation         -> stored AnnotationRecord JSON
    GET  /...                                -> static assets (annotator UI)

Reads are concurrent; annotation writes are serialized per scene by the
store. The store is the only mutable state.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from .annotations import AnnotationRecord, AnnotationStore, AnnotationValidationError
from .colmap_io import SparseScene, read_sparse_model
from .tensor_io import tensor_to_bytes

log = logging.getLogger(__name__)

_MODEL_SUBDIRS = ("", "sparse", "sparse/0")


def _find_model_dir(scene_dir: Path) -> Path | None:
    for sub in _MODEL_SUBDIRS:
        candidate = scene_dir / sub if sub else scene_dir
        if (candidate / "cameras.bin").exists() or (candidate / "cameras.txt").exists():
            return candidate
    return None


def discover_scenes(root: str | Path) -> dict[str, Path]:
    """Scene id -> sparse model directory, for every scene under root."""
    root = Path(root)
    scenes: dict[str, Path] = {}
    direct = _find_model_dir(root)
    if direct is not None:
        scenes[root.name] = direct
        return scenes
    for child in sorted(p for p in root.iterdir() if p.is_dir()):
        model = _find_model_dir(child)
        if model is not None:
            scenes[child.name] = model
    return scenes


class ServiceState:
    def __init__(
        self,
        scene_root: str | Path,
        state_dir: str | Path,
        static_dir: str | Path | None = None,
        max_points: int = 100_000,
        downsample_seed: int = 0,
    ):
        self.scene_dirs = discover_scenes(scene_root)
        self.store = AnnotationStore(state_dir)
        self.static_dir = Path(static_dir) if static_dir else None
        self.max_points = max_points
        self.downsample_seed = downsample_seed
        self._cache: dict[str, SparseScene] = {}
        self._cache_lock = threading.Lock()

    def scene(self, scene_id: str) -> SparseScene:
        with self._cache_lock:
            if scene_id not in self._cache:
                self._cache[scene_id] = read_sparse_model(self.scene_dirs[scene_id])
            return self._cache[scene_id]

    def scene_listing(self) -> list[dict]:
        annotated = self.store.annotated_ids()
        out = []
        for scene_id in sorted(self.scene_dirs):
            out.append(
                {
                    "id": scene_id,
                    "n_images": len(self.scene(scene_id).images),
                    "annotated": scene_id in annotated,
                }
            )
        return out

    def cloud_payload(self, scene_id: str, max_points: int | None) -> bytes:
        scene = self.scene(scene_id)
        ids = sorted(scene.points3d)
        pts = np.array([scene.points3d[i].xyz for i in ids], dtype=np.float32).reshape(-1, 3)
        rgb = (
            np.array([scene.points3d[i].rgb for i in ids], dtype=np.float32).reshape(-1, 3) / 255.0
        )
        cap = self.max_points if max_points is None else max_points
        if cap < pts.shape[0]:
            rng = np.random.default_rng(self.downsample_seed)
            keep = np.sort(rng.choice(pts.shape[0], size=cap, replace=False))
            pts, rgb = pts[keep], rgb[keep]
        return tensor_to_bytes(np.hstack([pts, rgb]).astype(np.float32))

    def image_manifest(self, scene_id: str) -> dict:
        scene = self.scene(scene_id)
        images_dir = self.scene_dirs[scene_id] / "images"
        if not images_dir.is_dir():
            images_dir = self.scene_dirs[scene_id].parent / "images"
        rows = []
        for image_id in sorted(scene.images):
            name = scene.images[image_id].name
            row = {"image_id": image_id, "name": name}
            if images_dir.is_dir() and (images_dir / name).is_file():
                row["url"] = f"/api/scenes/{scene_id}/files/{name}"
            rows.append(row)
        return {"images": rows}

    def image_file(self, scene_id: str, name: str) -> Path | None:
        scene = self.scene(scene_id)
        if name not in {img.name for img in scene.images.values()}:
            return None
        for base in (self.scene_dirs[scene_id] / "images", self.scene_dirs[scene_id].parent / "images"):
            path = base / name
            if path.is_file():
                return path
        return None


class _Handler(BaseHTTPRequestHandler):
    state: ServiceState  # injected by make_handler

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, code: int, body: bytes, content_type: str):
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, code: int, payload):
        self._send(code, json.dumps(payload, sort_keys=True).encode(), "application/json")

    def do_GET(self):
        try:
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            if parts[:2] == ["api", "scenes"]:
                self._api_get(parts, parse_qs(url.query))
            else:
                self._static(url.path)
        except BrokenPipeError:
            pass
        except Exception:
            log.exception("GET %s failed", self.path)
            self._send_json(500, {"error": "internal error"})

    def _api_get(self, parts: list[str], query: dict):
        if len(parts) == 2:
            self._send_json(200, self.state.scene_listing())
            return
        scene_id = parts[2]
        if scene_id not in self.state.scene_dirs:
            self._send_json(404, {"error": f"unknown scene {scene_id!r}"})
            return
        tail = parts[3:]
        if tail == ["cloud"]:
            try:
                max_points = int(query["max_points"][0]) if "max_points" in query else None
                if max_points is not None and max_points < 1:
                    raise ValueError
            except ValueError:
                self._send_json(400, {"error": "max_points must be a positive integer"})
                return
            self._send(200, self.state.cloud_payload(scene_id, max_points), "application/octet-stream")
        elif tail == ["images"]:
            self._send_json(200, self.state.image_manifest(scene_id))
        elif tail == ["annotation"]:
            record = self.state.store.latest(scene_id)
            if record is None:
                self._send_json(404, {"error": "no annotation yet"})
            else:
                self._send_json(200, record.to_json_dict())
        elif len(tail) == 2 and tail[0] == "files":
            path = self.state.image_file(scene_id, tail[1])
            if path is None:
                self._send_json(404, {"error": "no such image file"})
            else:
                ctype = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
                self._send(200, path.read_bytes(), ctype)
        else:
            self._send_json(404, {"error": "unknown endpoint"})

    def _static(self, path: str):
        if self.state.static_dir is None:
            self._send_json(404, {"error": "no static assets configured"})
            return
        rel = path.lstrip("/") or "index.html"
        target = (self.state.static_dir / rel).resolve()
        base = self.state.static_dir.resolve()
        if not str(target).startswith(str(base)) or not target.is_file():
            self._send_json(404, {"error": "not found"})
            return
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), ctype)

    def do_POST(self):
        try:
            parts = [p for p in urlparse(self.path).path.split("/") if p]
            if len(parts) != 4 or parts[:2] != ["api", "scenes"] or parts[3] != "annotation":
                self._send_json(404, {"error": "unknown endpoint"})
                return
            scene_id = parts[2]
            if scene_id not in self.state.scene_dirs:
                self._send_json(404, {"error": f"unknown scene {scene_id!r}"})
                return
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length)
            try:
                payload = json.loads(raw)
                payload["scene_id"] = scene_id
                record = AnnotationRecord.from_json_dict(payload)
            except (json.JSONDecodeError, AnnotationValidationError) as e:
                self._send_json(400, {"error": str(e)})
                return
            try:
                stored = self.state.store.save(record)
            except OSError as e:
                log.exception("annotation write failed")
                self._send_json(500, {"error": f"storage failure: {e}"})
                return
            self._send_json(200, stored.to_json_dict())
        except BrokenPipeError:
            pass
        except Exception:
            log.exception("POST %s failed", self.path)
            self._send_json(500, {"error": "internal error"})


def make_handler(state: ServiceState):
    return type("AnnotationHandler", (_Handler,), {"state": state})


def create_server(state: ServiceState, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), make_handler(state))
