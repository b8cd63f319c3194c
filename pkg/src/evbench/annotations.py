"""Annotation records and their flat-file store.

One JSON file per scene holds the latest record (written atomically: temp
file + rename); every accepted record is also appended to history.jsonl.
Last write wins per scene, history keeps everything.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

SCALE_REL_TOL = 1e-9


class AnnotationValidationError(ValueError):
    pass


@dataclass
class AnnotationRecord:
    scene_id: str
    quality: str  # "good" | "bad"
    annotator: str
    line: tuple[np.ndarray, np.ndarray] | None = None  # model-unit endpoints
    measured_meters: float | None = None
    scale_to_meters: float | None = None
    timestamp: str = ""

    def line_length(self) -> float | None:
        if self.line is None:
            return None
        return float(np.linalg.norm(self.line[1] - self.line[0]))

    def validate(self) -> None:
        if self.quality not in ("good", "bad"):
            raise AnnotationValidationError(f"quality must be 'good' or 'bad', got {self.quality!r}")
        if not self.scene_id:
            raise AnnotationValidationError("scene_id must be nonempty")
        has_line = self.line is not None
        has_measure = self.measured_meters is not None
        if self.quality == "good" and not (has_line and has_measure):
            raise AnnotationValidationError("a 'good' annotation needs a line and a measurement")
        if has_measure and self.measured_meters <= 0:
            raise AnnotationValidationError("measured_meters must be positive")
        if has_line:
            p0, p1 = self.line
            if not (np.isfinite(p0).all() and np.isfinite(p1).all()):
                raise AnnotationValidationError("line endpoints must be finite")
            if self.line_length() < 1e-12:
                raise AnnotationValidationError("line endpoints must be distinct")
        if has_line != has_measure:
            raise AnnotationValidationError("line and measured_meters must come together")
        if has_line and has_measure:
            expected = self.measured_meters / self.line_length()
            if self.scale_to_meters is None:
                self.scale_to_meters = expected
            elif abs(self.scale_to_meters - expected) > SCALE_REL_TOL * max(1.0, abs(expected)):
                raise AnnotationValidationError(
                    f"scale_to_meters {self.scale_to_meters} inconsistent with "
                    f"measured/length = {expected}"
                )

    def to_json_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "quality": self.quality,
            "annotator": self.annotator,
            "line": [p.tolist() for p in self.line] if self.line is not None else None,
            "measured_meters": self.measured_meters,
            "scale_to_meters": self.scale_to_meters,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AnnotationRecord":
        try:
            line = d.get("line")
            if line is not None:
                if len(line) != 2:
                    raise AnnotationValidationError("line must hold exactly two endpoints")
                line = tuple(np.asarray(p, dtype=np.float64).reshape(3) for p in line)
            measured = d.get("measured_meters")
            scale = d.get("scale_to_meters")
            rec = cls(
                scene_id=str(d["scene_id"]),
                quality=str(d["quality"]),
                annotator=str(d.get("annotator", "")),
                line=line,
                measured_meters=None if measured is None else float(measured),
                scale_to_meters=None if scale is None else float(scale),
                timestamp=str(d.get("timestamp", "")),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, AnnotationValidationError):
                raise
            raise AnnotationValidationError(f"malformed annotation record: {e}") from None
        rec.validate()
        return rec


class AnnotationStore:
    """Per-scene latest records plus an append-only history log.

    Writes are serialized per scene; the latest-record file is replaced
    atomically so a crash mid-write never leaves a corrupt store.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, scene_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(scene_id, threading.Lock())

    def _scene_path(self, scene_id: str) -> Path:
        safe = scene_id.replace(os.sep, "_").replace("\x00", "_")
        return self.root / f"{safe}.json"

    @property
    def history_path(self) -> Path:
        return self.root / "history.jsonl"

    def save(self, record: AnnotationRecord) -> AnnotationRecord:
        record.validate()
        if not record.timestamp:
            record.timestamp = datetime.now(timezone.utc).isoformat()
        payload = json.dumps(record.to_json_dict(), sort_keys=True)
        with self._lock(record.scene_id):
            with open(self.history_path, "a") as f:
                f.write(payload + "\n")
                f.flush()
                os.fsync(f.fileno())
            fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
            try:
                with os.fdopen(fd, "w") as f:
                    f.write(payload)
                    f.flush()
                    os.fsync(f.fileno())
                os.replace(tmp, self._scene_path(record.scene_id))
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
        return record

    def latest(self, scene_id: str) -> AnnotationRecord | None:
        path = self._scene_path(scene_id)
        if not path.exists():
            return None
        return AnnotationRecord.from_json_dict(json.loads(path.read_text()))

    def history(self, scene_id: str) -> list[AnnotationRecord]:
        if not self.history_path.exists():
            return []
        out = []
        for line in self.history_path.read_text().splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            if d.get("scene_id") == scene_id:
                out.append(AnnotationRecord.from_json_dict(d))
        return out

    def annotated_ids(self) -> set[str]:
        out = set()
        for path in self.root.glob("*.json"):
            try:
                out.add(json.loads(path.read_text())["scene_id"])
            except (json.JSONDecodeError, KeyError):
                continue
        return out
