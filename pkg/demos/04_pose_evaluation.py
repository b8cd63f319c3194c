"""Relative-pose evaluation on the shipped 100-pair fixture.

The fixture was constructed so the overall numbers land exactly on
MRE = 15.00, RA15 = 0.50, RA30 = 0.75; this script reproduces them and
shows the per-overlap breakdown and AUC.
"""

from pathlib import Path

from evbench.curation import read_pairs_jsonl
from evbench.pose_eval import evaluate_pairs, read_predictions_jsonl

FIXTURES = Path(__file__).parent.parent / "tests" / "fixtures"

pairs = read_pairs_jsonl(FIXTURES / "pairs_100.jsonl")
preds, _ = read_predictions_jsonl(FIXTURES / "preds_100.jsonl")
print(f"loaded {len(pairs)} pairs and {len(preds)} predictions")

report = evaluate_pairs(pairs, preds, thresholds=(15.0, 30.0), auc_max=30)

header = f"{'bucket':8s} {'n':>4s} {'MRE':>8s} {'RA15':>6s} {'RA30':>6s} {'MTE':>8s} {'TA30':>6s} {'AUC30':>6s}"
print("\n" + header)
print("-" * len(header))
for name in ("all", "Large", "Small", "None"):
    s = report.buckets[name]
    if s is None:
        continue
    mte = f"{s.mte_deg:8.2f}" if s.mte_deg is not None else "       -"
    ta = f"{s.ta[30.0]:6.3f}" if s.ta else "     -"
    auc = f"{s.auc:6.3f}" if s.auc is not None else "     -"
    print(f"{name:8s} {s.n_pairs:4d} {s.mre_deg:8.2f} {s.ra[15.0]:6.3f} {s.ra[30.0]:6.3f} {mte} {ta} {auc}")

print("\npairs without a usable translation are excluded from TA/MTE and counted:",
      report.buckets["all"].n_excluded)
