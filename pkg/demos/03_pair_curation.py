"""Curating evaluation pairs from a sparse scene.

Shows the full pipeline on a camera ring: mutual K-NN candidate pairs,
overlap classification from relative yaw/pitch against the combined
fields of view, the scale-consistency gate, per-scene capping and
category balancing.
"""

from collections import Counter

from evbench.colmap_io import camera_fov_deg
from evbench.curation import (
    CurationConfig,
    classify_overlap_angles,
    curate,
    mutual_knn_pairs,
    scale_consistent,
)
from evbench.synthetic import pinhole_camera, ring_scene

# 12 cameras on a circle, all looking at the center: neighbors overlap a
# lot, opposite cameras not at all.
scene = ring_scene(n_images=12, n_points=60)

pairs_k2 = mutual_knn_pairs(scene, k=2)
pairs_k11 = mutual_knn_pairs(scene, k=11)
print(f"mutual K-NN pairs: K=2 -> {len(pairs_k2)}, K=11 -> {len(pairs_k11)} (all pairs)")

# The overlap label comes from a case equation on |yaw|, |pitch| vs the
# combined FoV: under the quarter-sum on both axes -> Large, above the
# half-sum on both -> None, everything else -> Small.
fov = camera_fov_deg(scene.cameras[1])
print(f"\ncamera FoV is {fov[0]:.1f} x {fov[1]:.1f} degrees")
for yaw in (10, 40, 90, 170):
    cat = classify_overlap_angles(yaw, 0.0, fov, fov)
    print(f"  yaw {yaw:4d}, pitch 0 -> {cat.value}")
print("  yaw 170, pitch 80 ->",
      classify_overlap_angles(170, 80, fov, fov).value)

# Zoom/sensor mismatches are filtered before pairing in the
# translation-heavy regime.
cfg = CurationConfig(k=11, max_pairs_per_scene=1000)
wide = pinhole_camera(camera_id=2, fx=300.0)
tele = pinhole_camera(camera_id=3, fx=900.0)
print("\nwide vs 3x-tele camera passes the scale gate:",
      scale_consistent(wide, tele, cfg))

pairs = curate(scene, "ring-demo", cfg)
print(f"\ncurated {len(pairs)} pairs:", dict(Counter(p.category.value for p in pairs)))
# the flat ring never pitches, so the None category (both angles above the
# half-sum) cannot occur here

capped = curate(scene, "ring-demo", CurationConfig(k=11, max_pairs_per_scene=10, seed=1))
print(f"with a per-scene cap of 10 (seeded subsample): {len(capped)} pairs")

# balancing subsamples every category down to the smallest one; use a scene
# with freely oriented cameras so all three categories show up
import numpy as np
from evbench.synthetic import random_scene

wild = random_scene(np.random.default_rng(5), n_images=16, n_points=40)
wild_cfg = CurationConfig(k=15, max_pairs_per_scene=1000)
raw = curate(wild, "wild-demo", wild_cfg)
print(f"\nfreely oriented scene, {len(raw)} pairs:",
      dict(Counter(p.category.value for p in raw)))
balanced = curate(wild, "wild-demo",
                  CurationConfig(k=15, max_pairs_per_scene=1000, balance=True, seed=1))
print("after balancing:", dict(Counter(p.category.value for p in balanced)))
