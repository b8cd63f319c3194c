"""Offline analysis of exported backbone tensors.

Covers the layer-similarity curves used for fine-tuning layer selection,
the fixed skip-connection layer sets, cross-view attention maps built from
exported Q/K projections, and the bias-parameter mask manifest consumed by
external trainers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .so3 import DegenerateInputError
from .tensor_io import read_tensor

LAYER_KINDS = ("frame", "global")

# skip-connection layers feeding the dense prediction head; adopted as the
# fixed fine-tuning set for the camera-token model families
FIXED_LAYERS = frozenset({4, 11, 17, 23})
FIXED_LAYER_FAMILIES = ("vggt", "wm")
CURVE_FAMILIES = ("pi3",)

# bias parameters updated per selected layer: qkv + attention output
# projection + both MLP linears
BIAS_PARAMETER_NAMES = (
    "attn.qkv.bias",
    "attn.proj.bias",
    "mlp.fc1.bias",
    "mlp.fc2.bias",
)


@dataclass
class LayerTrace:
    kind: str  # "frame" | "global"
    index: int
    t_in: np.ndarray
    t_out: np.ndarray

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"layer kind must be one of {LAYER_KINDS}, got {self.kind!r}")
        if self.t_in.shape != self.t_out.shape:
            raise ValueError(
                f"layer {self.index}: input shape {self.t_in.shape} != output {self.t_out.shape}"
            )


@dataclass
class SimilarityCurve:
    sim: np.ndarray  # one cosine similarity per layer, in [-1, 1]
    mean: float
    std: float  # sample standard deviation

    @classmethod
    def from_values(cls, values) -> "SimilarityCurve":
        sim = np.asarray(values, dtype=np.float64)
        if np.abs(sim).max(initial=0.0) > 1.0 + 1e-9:
            raise ValueError("similarity values must lie in [-1, 1]")
        std = float(np.std(sim, ddof=1)) if sim.size > 1 else 0.0
        return cls(sim=sim, mean=float(sim.mean()), std=std)


def cosine_similarity(t_in: np.ndarray, t_out: np.ndarray) -> float:
    """Cosine of the flattened tensors: (in . out) / (|in| |out|)."""
    a = np.asarray(t_in, dtype=np.float64).ravel()
    b = np.asarray(t_out, dtype=np.float64).ravel()
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("zero-norm tensor in cosine similarity")
    return float(a @ b) / (na * nb)


def layer_similarity(trace: list[LayerTrace]) -> SimilarityCurve:
    """Per-layer input/output cosine similarity for one forward pass."""
    ordered = sorted(trace, key=lambda t: t.index)
    return SimilarityCurve.from_values([cosine_similarity(t.t_in, t.t_out) for t in ordered])


def average_curves(curves: list[SimilarityCurve]) -> SimilarityCurve:
    """Elementwise mean of same-length curves from multiple image pairs."""
    if not curves:
        raise ValueError("no curves to average")
    lengths = {c.sim.size for c in curves}
    if len(lengths) != 1:
        raise ValueError(f"curves have differing lengths: {sorted(lengths)}")
    return SimilarityCurve.from_values(np.mean([c.sim for c in curves], axis=0))


def local_minima(values: np.ndarray) -> list[int]:
    """Interior points strictly lower than both neighbors; a plateau counts
    once at its leftmost index. Boundary layers are never minima."""
    v = np.asarray(values, dtype=np.float64)
    minima = []
    i = 1
    while i < v.size - 1:
        if v[i] < v[i - 1]:
            j = i
            while j + 1 < v.size and v[j + 1] == v[i]:
                j += 1
            if j < v.size - 1 and v[j + 1] > v[i]:
                minima.append(i)
            i = j + 1
        else:
            i += 1
    return minima


def select_layers(curve: SimilarityCurve | np.ndarray, delta: int = 2) -> list[int]:
    """Layers to fine-tune: local similarity minima plus low neighbors.

    Every detected minimum is selected; neighbors within `delta` of a
    minimum join it when their similarity is <= mean - std/2. Sorted
    ascending; empty when the curve has no interior minima.
    """
    if not isinstance(curve, SimilarityCurve):
        curve = SimilarityCurve.from_values(curve)
    v = curve.sim
    if v.size < 3:
        raise ValueError("curve needs at least 3 layers")
    threshold = curve.mean - curve.std / 2.0
    selected: set[int] = set()
    for i in local_minima(v):
        selected.add(i)
        for k in range(1, delta + 1):
            for j in (i - k, i + k):
                if 0 <= j < v.size and v[j] <= threshold:
                    selected.add(j)
    return sorted(selected)


def fixed_layer_set(
    model_family: str,
    curve: SimilarityCurve | np.ndarray | None = None,
    delta: int = 2,
) -> set[int]:
    """Fine-tuning layer set per model family.

    Families with dense-head skip connections (vggt, wm) use the fixed set
    {4, 11, 17, 23}; pi3 has no such skips, so its set is computed from a
    measured similarity curve via select_layers.
    """
    family = model_family.lower()
    if family in FIXED_LAYER_FAMILIES:
        return set(FIXED_LAYERS)
    if family in CURVE_FAMILIES:
        if curve is None:
            raise ValueError(f"family {model_family!r} needs a similarity curve")
        return set(select_layers(curve, delta))
    raise ValueError(f"unknown model family {model_family!r}")


@dataclass
class AttentionInput:
    q: np.ndarray  # (heads, tokens, d_h)
    k: np.ndarray  # (heads, tokens, d_h)
    grid_h: int  # token grid height per image
    grid_w: int

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64)
        self.k = np.asarray(self.k, dtype=np.float64)
        if self.q.ndim != 3 or self.k.ndim != 3:
            raise ValueError("Q and K must have shape (heads, tokens, d_h)")
        if self.q.shape[0] != self.k.shape[0] or self.q.shape[2] != self.k.shape[2]:
            raise ValueError(
                f"Q {self.q.shape} and K {self.k.shape} disagree on heads or head dim"
            )
        if self.k.shape[1] != 2 * self.tokens_per_image:
            raise ValueError(
                f"K must cover both images' tokens: expected {2 * self.tokens_per_image}, "
                f"got {self.k.shape[1]}"
            )

    @property
    def tokens_per_image(self) -> int:
        return self.grid_h * self.grid_w


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_view_attention(
    inp: AttentionInput, query_index: int, softmax_over: str = "all"
) -> np.ndarray:
    """Head-summed attention from one image-1 query onto the image-2 grid.

    Per head: softmax(q . k / sqrt(d_h)) over all keys of both images
    (softmax_over="all", the backbone's own normalization) or over image-2
    keys only ("target"); the image-2 slice is summed over heads and
    reshaped to (grid_h, grid_w).
    """
    n = inp.tokens_per_image
    if not 0 <= query_index < n:
        raise IndexError(f"query index {query_index} outside image-1 range [0, {n})")
    if softmax_over not in ("all", "target"):
        raise ValueError(f"softmax_over must be 'all' or 'target', got {softmax_over!r}")
    d_h = inp.q.shape[2]
    q = inp.q[:, query_index, :]  # (heads, d_h)
    logits = np.einsum("hd,htd->ht", q, inp.k) / np.sqrt(d_h)  # (heads, 2n)
    if softmax_over == "all":
        weights = _softmax(logits)[:, n:]
    else:
        weights = _softmax(logits[:, n:])
    return weights.sum(axis=0).reshape(inp.grid_h, inp.grid_w)


# ---------------------------------------------------------------------------
# manifests


def load_trace_manifest(path: str | Path) -> dict[str, list[LayerTrace]]:
    """JSON manifest {"layers": [{index, kind, input, output}, ...]} with
    .evbt paths relative to the manifest; returns traces grouped by kind."""
    path = Path(path)
    spec = json.loads(path.read_text())
    out: dict[str, list[LayerTrace]] = {}
    for entry in spec["layers"]:
        trace = LayerTrace(
            kind=entry["kind"],
            index=int(entry["index"]),
            t_in=read_tensor(path.parent / entry["input"]),
            t_out=read_tensor(path.parent / entry["output"]),
        )
        out.setdefault(trace.kind, []).append(trace)
    for traces in out.values():
        traces.sort(key=lambda t: t.index)
    return out


def bias_tuning_manifest(layers_by_kind: dict[str, list[int]]) -> list[dict]:
    """Selected-layer x bias-parameter mask rows for external trainers."""
    rows = []
    for kind in sorted(layers_by_kind):
        if kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {kind!r}")
        for layer in sorted(layers_by_kind[kind]):
            rows.append(
                {"layer": int(layer), "kind": kind, "parameter_names": list(BIAS_PARAMETER_NAMES)}
            )
    return rows
