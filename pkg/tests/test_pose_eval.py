import json
import math
from pathlib import Path

import numpy as np
import pytest

from evbench import pose_eval, so3
from evbench.curation import ImagePair, OverlapCategory, read_pairs_jsonl
from evbench.pose_eval import (
    MissingPredictionError,
    PairPrediction,
    PoseErrorRecord,
    auc_at,
    evaluate_pairs,
    pair_errors,
    read_predictions_jsonl,
    summarize,
)

FIXTURES = Path(__file__).parent / "fixtures"


def make_pair(rng, scene="s", a=1, b=2, category=OverlapCategory.LARGE):
    r_a, r_b = so3.random_rotation(rng), so3.random_rotation(rng)
    t_a = rng.uniform(-2, 2, 3)
    r_rel = r_b @ r_a.T
    t_rel = rng.standard_normal(3)
    t_b = t_rel + r_rel @ t_a
    yaw, pitch = so3.yaw_pitch_deg(r_rel)
    pair = ImagePair(scene, a, b, r_rel, t_rel, category, yaw, pitch)
    absolute = (r_a, t_a, r_b, t_b)
    return pair, absolute


def perfect_prediction(pair, absolute):
    r_a, t_a, r_b, t_b = absolute
    return PairPrediction(
        pair.scene_id, pair.image_a, pair.image_b,
        so3.matrix_to_quat(r_a), t_a, so3.matrix_to_quat(r_b), t_b,
    )


def rec(rot, trans=None, key=(("s", 1, 2)), category=OverlapCategory.LARGE):
    scene, a, b = key
    return PoseErrorRecord(scene, a, b, category, rot, trans)


class TestPairErrors:
    def test_perfect_prediction(self, rng):
        pair, absolute = make_pair(rng)
        r = pair_errors(perfect_prediction(pair, absolute), pair)
        assert r.rot_err_deg == pytest.approx(0.0, abs=1e-6)
        assert r.trans_err_deg == pytest.approx(0.0, abs=1e-5)
        assert r.excluded_reason is None

    def test_known_rotation_offset(self, rng):
        pair, (r_a, t_a, r_b, t_b) = make_pair(rng)
        pred = PairPrediction(
            "s", 1, 2,
            so3.matrix_to_quat(r_a), t_a,
            so3.matrix_to_quat(so3.rot_z(30.0) @ r_b), t_b,
        )
        # composing the offset changes the relative translation too; only the
        # rotation error is pinned here
        assert pair_errors(pred, pair).rot_err_deg == pytest.approx(30.0, abs=1e-6)

    def test_antiparallel_translation_is_zero(self, rng):
        pair, (r_a, t_a, r_b, t_b) = make_pair(rng)
        r_rel = pair.r_rel_gt
        t_b_flipped = -pair.t_rel_gt + r_rel @ t_a
        pred = PairPrediction(
            "s", 1, 2, so3.matrix_to_quat(r_a), t_a, so3.matrix_to_quat(r_b), t_b_flipped
        )
        assert pair_errors(pred, pair).trans_err_deg == pytest.approx(0.0, abs=1e-5)

    def test_degenerate_prediction_excluded(self, rng):
        pair, (r_a, t_a, r_b, _) = make_pair(rng)
        t_b_zero_rel = pair.r_rel_gt @ t_a  # predicted relative translation = 0
        pred = PairPrediction(
            "s", 1, 2, so3.matrix_to_quat(r_a), t_a, so3.matrix_to_quat(r_b), t_b_zero_rel
        )
        r = pair_errors(pred, pair)
        assert r.trans_err_deg is None
        assert r.excluded_reason == "degenerate_pred_translation"

    def test_key_mismatch_rejected(self, rng):
        pair, absolute = make_pair(rng)
        pred = perfect_prediction(pair, absolute)
        pred.image_b = 99
        with pytest.raises(ValueError):
            pair_errors(pred, pair)


class TestSummarize:
    def test_worked_example(self):
        records = [rec(e) for e in (5.0, 20.0, 10.0, 40.0)]
        s = summarize(records)
        assert s.mre_deg == 15.0
        assert s.ra[15.0] == 0.5
        assert s.ra[30.0] == 0.75

    def test_single_perfect_record(self):
        s = summarize([rec(0.0, 0.0)])
        assert s.mre_deg == 0.0
        assert all(v == 1.0 for v in s.ra.values())
        assert s.mte_deg == 0.0

    def test_strict_threshold(self):
        s = summarize([rec(15.0)])
        assert s.ra[15.0] == 0.0

    def test_exclusions_counted(self):
        s = summarize([rec(1.0, 2.0), rec(3.0, None)])
        assert s.n_excluded == 1
        assert s.mte_deg == 2.0

    def test_empty_raises(self):
        with pytest.raises(pose_eval.EmptyInputError):
            summarize([])

    def test_permutation_invariance(self, rng):
        records = [rec(float(e), float(t)) for e, t in rng.uniform(0, 90, (31, 2))]
        s1 = summarize(records)
        s2 = summarize(list(reversed(records)))
        assert s1 == s2

    def test_ra_monotone(self, rng):
        records = [rec(float(e)) for e in rng.uniform(0, 180, 50)]
        s = summarize(records, thresholds=(5.0, 10.0, 20.0, 40.0, 80.0, 160.0))
        vals = [s.ra[t] for t in sorted(s.ra)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))


class TestAuc:
    def test_all_zero(self):
        assert auc_at([rec(0.0, 0.0)] * 3, 30) == 1.0

    def test_all_beyond(self):
        assert auc_at([rec(40.0, 50.0)], 30) == 0.0

    def test_single_pair_fraction(self):
        # max error 10.5 passes thresholds 11..30 -> 20/30
        assert auc_at([rec(10.5, 3.0)], 30) == pytest.approx(20.0 / 30.0)
        assert auc_at([rec(3.0, 10.5)], 30) == pytest.approx(20.0 / 30.0)

    def test_requires_translation(self):
        with pytest.raises(ValueError):
            auc_at([rec(1.0, None)], 30)

    def test_bounded_by_accuracies(self, rng):
        records = [rec(float(e), float(t)) for e, t in rng.uniform(0, 60, (40, 2))]
        s = summarize(records, thresholds=(30.0,))
        a = auc_at(records, 30)
        assert a <= min(s.ra[30.0], s.ta[30.0]) + 1e-12


class TestEvaluatePairs:
    def build_set(self, rng, n=12):
        pairs, preds = [], []
        cats = list(OverlapCategory)
        for i in range(n):
            pair, absolute = make_pair(rng, a=2 * i + 1, b=2 * i + 2, category=cats[i % 3])
            pairs.append(pair)
            preds.append(perfect_prediction(pair, absolute))
        return pairs, preds

    def test_all_perfect(self, rng):
        pairs, preds = self.build_set(rng)
        report = evaluate_pairs(pairs, preds)
        for name in ("all", "Large", "Small", "None"):
            s = report.buckets[name]
            assert s.mre_deg == pytest.approx(0.0, abs=1e-6)
            assert all(v == 1.0 for v in s.ra.values())
            assert s.auc == pytest.approx(1.0)

    def test_missing_prediction_strict(self, rng):
        pairs, preds = self.build_set(rng)
        with pytest.raises(MissingPredictionError):
            evaluate_pairs(pairs, preds[:-1])
        report = evaluate_pairs(pairs, preds[:-1], strict=False)
        assert report.unmatched == [pairs[-1].key()]

    def test_thread_counts_agree_bitwise(self, rng):
        pairs, preds = self.build_set(rng, n=30)
        reports = [evaluate_pairs(pairs, preds, workers=w) for w in (1, 4, 8)]
        blobs = [json.dumps(r.to_json_dict(), sort_keys=True) for r in reports]
        assert blobs[0] == blobs[1] == blobs[2]

    def test_input_order_irrelevant(self, rng):
        pairs, preds = self.build_set(rng, n=10)
        r1 = evaluate_pairs(pairs, preds)
        r2 = evaluate_pairs(list(reversed(pairs)), list(reversed(preds)))
        assert json.dumps(r1.to_json_dict()) == json.dumps(r2.to_json_dict())

    def test_global_frame_invariance(self, rng):
        pairs, preds = self.build_set(rng, n=8)
        g = so3.random_rotation(rng)
        rotated = [
            PairPrediction(
                p.scene_id, p.image_a, p.image_b,
                so3.matrix_to_quat(so3.quat_to_matrix(p.q_a) @ g), p.t_a,
                so3.matrix_to_quat(so3.quat_to_matrix(p.q_b) @ g), p.t_b,
            )
            for p in preds
        ]
        r1 = evaluate_pairs(pairs, preds)
        r2 = evaluate_pairs(pairs, rotated)
        for a, b in zip(r1.records, r2.records):
            assert abs(a.rot_err_deg - b.rot_err_deg) < 1e-9


class TestFixtureFile:
    def test_frozen_fixture_summary(self):
        pairs = read_pairs_jsonl(FIXTURES / "pairs_100.jsonl")
        preds, _ = read_predictions_jsonl(FIXTURES / "preds_100.jsonl")
        report = evaluate_pairs(pairs, preds)
        s = report.buckets["all"]
        assert s.mre_deg == pytest.approx(15.0, abs=1e-9)
        assert s.ra[15.0] == 0.50
        assert s.ra[30.0] == 0.75
        assert s.n_pairs == 100

    def test_fixture_matches_bruteforce_recomputation(self):
        # ten-line oracle: quaternion formula + explicit sorting
        pairs = read_pairs_jsonl(FIXTURES / "pairs_100.jsonl")
        preds, _ = read_predictions_jsonl(FIXTURES / "preds_100.jsonl")
        errs = []
        for gt, pr in zip(pairs, preds):
            r_rel = so3.quat_to_matrix(pr.q_b) @ so3.quat_to_matrix(pr.q_a).T
            q = so3.matrix_to_quat(r_rel @ gt.r_rel_gt.T)
            errs.append(math.degrees(2 * math.atan2(np.linalg.norm(q[1:]), abs(q[0]))))
        errs.sort()
        report = evaluate_pairs(pairs, preds)
        assert report.buckets["all"].mre_deg == pytest.approx((errs[49] + errs[50]) / 2, abs=1e-9)
        assert report.buckets["all"].ra[15.0] == sum(e < 15 for e in errs) / 100


class TestPredictionIO:
    def test_round_trip(self, rng, tmp_path):
        _, absolute = make_pair(rng)
        pred = PairPrediction(
            "s", 1, 2, so3.matrix_to_quat(absolute[0]), absolute[1],
            so3.matrix_to_quat(absolute[2]), absolute[3],
        )
        path = tmp_path / "p.jsonl"
        path.write_text(json.dumps(pred.to_json_dict()) + "\n")
        back, errors = read_predictions_jsonl(path)
        assert not errors
        np.testing.assert_array_equal(back[0].q_a, pred.q_a)

    def test_malformed_row_strict_vs_permissive(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text('{"scene": "s", "image_a": 1}\n')
        with pytest.raises(pose_eval.PredictionFormatError):
            read_predictions_jsonl(path)
        preds, errors = read_predictions_jsonl(path, permissive=True)
        assert preds == [] and len(errors) == 1

    def test_per_pair_csv(self, tmp_path):
        records = [rec(1.5, 2.5), rec(3.0, None, key=("s", 3, 4))]
        path = tmp_path / "errors.csv"
        pose_eval.write_per_pair_csv(records, path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 3
        assert lines[1].startswith("s,1,2,Large,1.5,2.5")
