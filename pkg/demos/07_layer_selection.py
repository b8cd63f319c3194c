"""Backbone layer analysis: similarity curves, layer selection, attention.

Fine-tuning touches only the bias terms of a few backbone layers. For
model families whose dense head taps fixed skip connections (vggt, wm)
that set is layers {4, 11, 17, 23}. Families without such skips (pi3) get
their set from the per-layer input/output cosine-similarity curve: local
minima mark the most transformative layers, and neighbors within delta=2
whose similarity falls below mean - std/2 join them.

Reported reference outcome for the pi3-style curves measured on real
token exports: frame layers {4, 12, 13, 14, 15, 16} and global layers
{13, 14, 15}. Reproducing that requires that model's exported traces, so
it is documented here rather than asserted.
"""

import numpy as np

from evbench.repr_analysis import (
    AttentionInput,
    SimilarityCurve,
    bias_tuning_manifest,
    cross_view_attention,
    fixed_layer_set,
    select_layers,
)

print("fixed fine-tuning set for vggt / wm:", sorted(fixed_layer_set("vggt")))

# A synthetic 24-layer curve with two similarity drops.
sim = np.full(24, 0.95)
sim[4] = 0.55
sim[12:17] = [0.6, 0.35, 0.3, 0.4, 0.62]
curve = SimilarityCurve.from_values(sim)
print(f"\ncurve mean {curve.mean:.3f}, std {curve.std:.3f}, "
      f"threshold {curve.mean - curve.std / 2:.3f}")
print("selected layers (delta=2):", select_layers(curve, delta=2))

# The mask manifest external trainers consume: per selected layer, the
# bias parameters of the attention qkv/proj and both MLP linears.
rows = bias_tuning_manifest({"frame": select_layers(curve, 2), "global": [13, 14, 15]})
print(f"\nmask manifest rows: {len(rows)}; first row:")
print("  ", rows[0])

# Cross-view attention from one image-1 query onto the image-2 token grid:
# softmax over ALL keys of both images, image-2 slice summed over heads.
rng = np.random.default_rng(5)
grid_h, grid_w, heads, d_h = 4, 6, 3, 8
n = grid_h * grid_w
q = rng.standard_normal((heads, 2 * n, d_h))
k = rng.standard_normal((heads, 2 * n, d_h))
# plant a strong correspondence: query 7 attends to image-2 cell (2, 3)
target = n + 2 * grid_w + 3
for h in range(heads):
    k[h, target] = 6.0 * q[h, 7] / np.linalg.norm(q[h, 7])
amap = cross_view_attention(AttentionInput(q, k, grid_h, grid_w), query_index=7)
print(f"\nattention map shape {amap.shape}, mass at the planted cell: "
      f"{amap[2, 3] / amap.sum():.3f}")
print(np.array2string(amap / amap.sum(), precision=2, suppress_small=True))
