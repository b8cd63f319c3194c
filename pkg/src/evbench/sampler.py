"""Graph-based greedy image sampling for scene evaluation subsets.

Nodes are registered images; edges join pairs with enough shared 3D points
and enough metric camera-center separation. Sampling starts from a seeded
random node of the largest connected component and greedily expands along
the frontier, scoring candidates by 0.8 * normalized degree +
0.2 * normalized mean distance to the selected set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .colmap_io import SparseScene

log = logging.getLogger(__name__)

DEFAULT_MIN_SHARED = 30
DEFAULT_MIN_TRANS_M = 5.0
CONNECTIVITY_WEIGHT = 0.8
DIVERSITY_WEIGHT = 0.2


class MissingScaleError(ValueError):
    """Metric threshold requested but no scale factor available."""


@dataclass
class CovisEdge:
    a: int
    b: int
    shared_count: int
    translation_m: float


@dataclass
class CovisGraph:
    nodes: list[int]
    edges: list[CovisEdge]
    adjacency: dict[int, set[int]]
    centers_m: dict[int, np.ndarray]  # camera centers, meters

    @property
    def max_degree(self) -> int:
        return max((len(v) for v in self.adjacency.values()), default=0)

    @property
    def max_edge_translation(self) -> float:
        return max((e.translation_m for e in self.edges), default=0.0)

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])


def build_covis_graph(
    scene: SparseScene,
    min_shared: int = DEFAULT_MIN_SHARED,
    min_trans_m: float = DEFAULT_MIN_TRANS_M,
    scale_to_meters: float | None = None,
) -> CovisGraph:
    """Edges: shared 3D points >= min_shared AND center distance >= min_trans_m.

    Both thresholds are inclusive. The metric threshold needs a scale factor
    (argument or scene.scale_to_meters) whenever it is positive.
    """
    scale = scale_to_meters if scale_to_meters is not None else scene.scale_to_meters
    if scale is None:
        if min_trans_m > 0:
            raise MissingScaleError(
                "min_trans_m > 0 requires scale_to_meters (argument or scene attribute)"
            )
        scale = 1.0
    if scale <= 0:
        raise ValueError("scale_to_meters must be positive")
    nodes = sorted(scene.images)
    centers = {i: scene.images[i].center() * scale for i in nodes}
    obs_sets = {}
    for i in nodes:
        pids = scene.images[i].point3d_ids
        obs_sets[i] = set(pids[pids >= 0].tolist())
    edges: list[CovisEdge] = []
    adjacency: dict[int, set[int]] = {i: set() for i in nodes}
    for ai, a in enumerate(nodes):
        for b in nodes[ai + 1 :]:
            shared = len(obs_sets[a] & obs_sets[b])
            if shared < min_shared:
                continue
            dist = float(np.linalg.norm(centers[a] - centers[b]))
            if dist < min_trans_m:
                continue
            edges.append(CovisEdge(a, b, shared, dist))
            adjacency[a].add(b)
            adjacency[b].add(a)
    return CovisGraph(nodes=nodes, edges=edges, adjacency=adjacency, centers_m=centers)


def connected_components(adjacency: dict[int, set[int]]) -> list[list[int]]:
    seen: set[int] = set()
    components = []
    for start in sorted(adjacency):
        if start in seen:
            continue
        stack = [start]
        comp = []
        seen.add(start)
        while stack:
            node = stack.pop()
            comp.append(node)
            for nxt in adjacency[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        components.append(sorted(comp))
    return components


def greedy_sample(
    graph: CovisGraph,
    n: int = 10,
    w_conn: float = CONNECTIVITY_WEIGHT,
    w_div: float = DIVERSITY_WEIGHT,
    seed: int = 0,
) -> list[int]:
    """Ordered greedy selection of up to n images.

    The first node is drawn uniformly (seeded) from the largest connected
    component; each later pick maximizes
    w_conn * degree/max_degree + w_div * mean-distance-to-selected/max-edge-translation
    over the frontier (unselected neighbors of the selected set), ties going
    to the smallest image id. Stops early with a warning when the frontier
    empties; the mean-distance term may exceed 1 for far-flung candidates.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not graph.nodes:
        raise ValueError("empty graph")
    components = connected_components(graph.adjacency)
    largest = sorted(components, key=lambda c: (-len(c), c[0]))[0]
    rng = np.random.default_rng(seed)
    selected = [int(largest[int(rng.integers(0, len(largest)))])]
    max_deg = graph.max_degree
    max_trans = graph.max_edge_translation
    while len(selected) < n:
        frontier = set()
        for node in selected:
            frontier |= graph.adjacency[node]
        frontier -= set(selected)
        if not frontier:
            log.warning(
                "greedy sampling stopped at %d of %d images (frontier empty)", len(selected), n
            )
            break
        best_node, best_score = None, -np.inf
        for cand in sorted(frontier):
            conn = graph.degree(cand) / max_deg if max_deg else 0.0
            dists = [
                float(np.linalg.norm(graph.centers_m[cand] - graph.centers_m[s]))
                for s in selected
            ]
            div = (sum(dists) / len(dists)) / max_trans if max_trans else 0.0
            score = w_conn * conn + w_div * div
            if score > best_score:
                best_node, best_score = cand, score
        selected.append(best_node)
    return selected
