"""Relative-pose evaluation: per-pair errors and aggregate metrics.

Predictions are consumed as absolute per-image poses (world->camera, the
prediction's own reference frame); relative quantities are formed
internally, so the evaluator is agnostic to each model's frame convention.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import so3
from .curation import ImagePair, OverlapCategory

DEFAULT_THRESHOLDS = (15.0, 30.0)
DEFAULT_AUC_MAX = 30


class EmptyInputError(ValueError):
    pass


class MissingPredictionError(ValueError):
    pass


class PredictionFormatError(ValueError):
    pass


@dataclass
class PairPrediction:
    scene_id: str
    image_a: int
    image_b: int
    q_a: np.ndarray  # (4,) scalar-first
    t_a: np.ndarray  # (3,)
    q_b: np.ndarray
    t_b: np.ndarray

    def key(self) -> tuple[str, int, int]:
        return (self.scene_id, self.image_a, self.image_b)

    def relative(self) -> tuple[np.ndarray, np.ndarray]:
        r_a = so3.quat_to_matrix(self.q_a)
        r_b = so3.quat_to_matrix(self.q_b)
        r_rel = r_b @ r_a.T
        t_rel = self.t_b - r_rel @ self.t_a
        return r_rel, t_rel

    def to_json_dict(self) -> dict:
        return {
            "scene": self.scene_id,
            "image_a": self.image_a,
            "image_b": self.image_b,
            "qa": self.q_a.tolist(),
            "ta": self.t_a.tolist(),
            "qb": self.q_b.tolist(),
            "tb": self.t_b.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PairPrediction":
        def vec(key, n):
            v = np.asarray(d[key], dtype=np.float64)
            if v.shape != (n,):
                raise PredictionFormatError(f"field {key!r} must have {n} components")
            if not np.isfinite(v).all():
                raise PredictionFormatError(f"field {key!r} has non-finite values")
            return v

        try:
            return cls(
                scene_id=str(d["scene"]),
                image_a=int(d["image_a"]),
                image_b=int(d["image_b"]),
                q_a=vec("qa", 4),
                t_a=vec("ta", 3),
                q_b=vec("qb", 4),
                t_b=vec("tb", 3),
            )
        except KeyError as e:
            raise PredictionFormatError(f"missing field {e.args[0]!r}") from None


@dataclass
class PoseErrorRecord:
    scene_id: str
    image_a: int
    image_b: int
    category: OverlapCategory
    rot_err_deg: float
    trans_err_deg: float | None = None
    excluded_reason: str | None = None

    def key(self) -> tuple[str, int, int]:
        return (self.scene_id, self.image_a, self.image_b)


@dataclass
class MetricSummary:
    mre_deg: float
    ra: dict[float, float]
    mte_deg: float | None
    ta: dict[float, float] | None
    auc: float | None
    n_pairs: int
    n_excluded: int

    def to_json_dict(self) -> dict:
        return {
            "MRE": self.mre_deg,
            "RA": {str(k): v for k, v in sorted(self.ra.items())},
            "MTE": self.mte_deg,
            "TA": {str(k): v for k, v in sorted(self.ta.items())} if self.ta is not None else None,
            "AUC": self.auc,
            "n_pairs": self.n_pairs,
            "n_excluded": self.n_excluded,
        }


def pair_errors(pred: PairPrediction, gt: ImagePair) -> PoseErrorRecord:
    """Geodesic rotation error and angular translation error for one pair."""
    if pred.key() != gt.key():
        raise ValueError(f"prediction {pred.key()} does not match pair {gt.key()}")
    r_rel_pred, t_rel_pred = pred.relative()
    rot_err = so3.geodesic_deg(r_rel_pred, gt.r_rel_gt)
    trans_err = None
    reason = None
    try:
        trans_err = so3.translation_angle_deg(t_rel_pred, gt.t_rel_gt)
    except so3.DegenerateInputError:
        if float(np.linalg.norm(gt.t_rel_gt)) < 1e-12:
            reason = "degenerate_gt_translation"
        else:
            reason = "degenerate_pred_translation"
    return PoseErrorRecord(
        gt.scene_id, gt.image_a, gt.image_b, gt.category, rot_err, trans_err, reason
    )


def summarize(
    records: list[PoseErrorRecord], thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
) -> MetricSummary:
    """MRE + RA_tau over all records; MTE/TA over records with translation.

    Accuracies use strict inequality (err < tau); the median of an even count
    is the mean of the two middle values.
    """
    if not records:
        raise EmptyInputError("summarize needs at least one record")
    rot = np.array([r.rot_err_deg for r in records])
    trans = np.array([r.trans_err_deg for r in records if r.trans_err_deg is not None])
    ra = {float(t): float(np.count_nonzero(rot < t)) / rot.size for t in thresholds}
    mte = float(np.median(trans)) if trans.size else None
    ta = (
        {float(t): float(np.count_nonzero(trans < t)) / trans.size for t in thresholds}
        if trans.size
        else None
    )
    return MetricSummary(
        mre_deg=float(np.median(rot)),
        ra=ra,
        mte_deg=mte,
        ta=ta,
        auc=None,
        n_pairs=len(records),
        n_excluded=sum(1 for r in records if r.trans_err_deg is None),
    )


def auc_at(records: list[PoseErrorRecord], tau_max: int = DEFAULT_AUC_MAX) -> float:
    """Mean accuracy of max(rot, trans) error over integer thresholds 1..tau_max."""
    for r in records:
        if r.trans_err_deg is None:
            raise ValueError(f"record {r.key()} has no translation error; filter before auc_at")
    if not records:
        raise EmptyInputError("auc_at needs at least one record")
    worst = np.array([max(r.rot_err_deg, r.trans_err_deg) for r in records])
    total = 0.0
    for tau in range(1, tau_max + 1):
        total += float(np.count_nonzero(worst < tau)) / worst.size
    return total / tau_max


@dataclass
class EvalReport:
    buckets: dict[str, MetricSummary | None]
    records: list[PoseErrorRecord]
    unmatched: list[tuple[str, int, int]]
    row_errors: list[str]

    def to_json_dict(self) -> dict:
        return {
            "buckets": {
                k: (v.to_json_dict() if v is not None else None)
                for k, v in sorted(self.buckets.items())
            },
            "unmatched": [list(k) for k in self.unmatched],
            "row_errors": self.row_errors,
        }


def evaluate_pairs(
    pairs: list[ImagePair],
    predictions: list[PairPrediction],
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
    auc_max: int = DEFAULT_AUC_MAX,
    strict: bool = True,
    workers: int = 1,
    row_errors: list[str] | None = None,
) -> EvalReport:
    """Per-category and overall metric summaries for a pair set.

    Every pair must have a prediction: missing ones are listed in the
    unmatched report (an error in strict mode). Evaluation order is fixed by
    the canonical pair key, so results are identical for any worker count.
    """
    by_key: dict[tuple[str, int, int], PairPrediction] = {}
    errors = list(row_errors or [])
    for p in predictions:
        if p.key() in by_key:
            errors.append(f"duplicate prediction for pair {p.key()}")
            continue
        by_key[p.key()] = p
    if errors and strict:
        raise PredictionFormatError("; ".join(errors))

    unmatched = sorted(gt.key() for gt in pairs if gt.key() not in by_key)
    if unmatched and strict:
        raise MissingPredictionError(
            f"{len(unmatched)} pairs lack predictions, first: {unmatched[0]}"
        )
    matched = sorted(
        (gt for gt in pairs if gt.key() in by_key), key=lambda g: g.key()
    )
    jobs = [(by_key[gt.key()], gt) for gt in matched]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda j: pair_errors(*j), jobs))
    else:
        records = [pair_errors(*j) for j in jobs]
    records.sort(key=lambda r: r.key())

    buckets: dict[str, MetricSummary | None] = {}
    groups = {"all": records}
    for cat in OverlapCategory:
        groups[cat.value] = [r for r in records if r.category is cat]
    for name, group in groups.items():
        if not group:
            buckets[name] = None
            continue
        summary = summarize(group, thresholds)
        with_trans = [r for r in group if r.trans_err_deg is not None]
        if with_trans:
            summary.auc = auc_at(with_trans, auc_max)
        buckets[name] = summary
    return EvalReport(buckets=buckets, records=records, unmatched=unmatched, row_errors=errors)


def read_predictions_jsonl(
    path: str | Path, permissive: bool = False
) -> tuple[list[PairPrediction], list[str]]:
    """Parse a prediction file; in permissive mode malformed rows are collected."""
    preds: list[PairPrediction] = []
    errors: list[str] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            preds.append(PairPrediction.from_json_dict(json.loads(line)))
        except (json.JSONDecodeError, PredictionFormatError, ValueError) as e:
            msg = f"line {lineno}: {e}"
            if not permissive:
                raise PredictionFormatError(f"{path}: {msg}") from None
            errors.append(msg)
    return preds, errors


def write_per_pair_csv(records: list[PoseErrorRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["scene_id", "image_a", "image_b", "category", "rot_err_deg", "trans_err_deg", "excluded_reason"]
        )
        for r in records:
            writer.writerow(
                [
                    r.scene_id,
                    r.image_a,
                    r.image_b,
                    r.category.value,
                    repr(r.rot_err_deg),
                    "" if r.trans_err_deg is None else repr(r.trans_err_deg),
                    r.excluded_reason or "",
                ]
            )
