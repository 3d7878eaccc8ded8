"""Stochastic graph views: the four augmentations and node-feature masking.

All functions are pure in ``(graph, ratio, rng state)``: they never mutate the
input and draw every random number from the ``numpy.random.Generator`` passed in.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Graph, canonical_edges

DEFAULT_RATIO = 0.2
DEFAULT_MASK_RATE = 0.5


class Augmentation(enum.Enum):
    NODE_DROPOUT = "node_dropout"
    EDGE_PERTURBATION = "edge_perturbation"
    ATTRIBUTE_MASKING = "attribute_masking"
    SUBGRAPH = "subgraph"


@dataclass(frozen=True)
class AugmentationSpec:
    kind: Augmentation
    ratio: float = DEFAULT_RATIO

    def __post_init__(self):
        if not 0.0 <= self.ratio < 1.0:
            raise ValueError(f"{self.kind.value}: ratio must lie in [0, 1), got {self.ratio}")
        if self.kind is Augmentation.SUBGRAPH and self.ratio == 0.0:
            raise ValueError("subgraph: ratio must be > 0")

    def apply(self, g: Graph, rng: np.random.Generator) -> Graph:
        return AUGMENTATIONS[self.kind](g, self.ratio, rng)


def default_augmentations(ratio: float = DEFAULT_RATIO) -> tuple[AugmentationSpec, ...]:
    return tuple(AugmentationSpec(k, ratio) for k in Augmentation)


def sample_augmentation(rng: np.random.Generator, choices: Sequence[AugmentationSpec] | None = None) -> AugmentationSpec:
    """Pick one configured augmentation uniformly at random."""
    choices = tuple(choices) if choices is not None else default_augmentations()
    if not choices:
        raise ValueError("no augmentations configured")
    return choices[int(rng.integers(len(choices)))]


def node_dropout(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    n_drop = min(math.floor(ratio * g.num_nodes), g.num_nodes - 1)
    if n_drop <= 0:
        return g
    drop = rng.choice(g.num_nodes, size=n_drop, replace=False)
    keep = np.setdiff1d(np.arange(g.num_nodes), drop)
    return g.induced(keep)


def edge_perturbation(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Remove ``floor(ratio*|E|)`` edges and add as many brand-new ones.

    New edges avoid self-loops and every original edge (removed ones included).
    They are drawn by rejection sampling; after ``10*|E|`` draws the rest come
    from an explicit list of the remaining non-edges. A (nearly) complete graph
    therefore ends up with ``|E| - k + min(k, #non-edges)`` edges.
    """
    m = g.num_edges
    k = math.floor(ratio * m)
    if k <= 0:
        return g
    n = g.num_nodes
    removed = rng.choice(m, size=k, replace=False)
    kept = np.delete(g.edges, removed, axis=0)
    taken = {(int(u), int(v)) for u, v in g.edges}
    added: list[tuple[int, int]] = []
    budget = 10 * m
    max_new = n * (n - 1) // 2 - m
    while len(added) < min(k, max_new) and budget > 0:
        u, v = (int(x) for x in rng.integers(n, size=2))
        budget -= 1
        if u == v:
            continue
        e = (u, v) if u < v else (v, u)
        if e in taken:
            continue
        taken.add(e)
        added.append(e)
    want = min(k, max_new)
    if len(added) < want:
        iu, ju = np.triu_indices(n, k=1)
        rest = [(int(u), int(v)) for u, v in zip(iu, ju) if (u, v) not in taken]
        pick = rng.choice(len(rest), size=want - len(added), replace=False)
        added.extend(rest[i] for i in sorted(pick))
    edges = np.concatenate([kept, np.array(added, dtype=np.int64).reshape(-1, 2)])
    return Graph(n, canonical_edges(edges), g.features, g.label)


def attribute_masking(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    k = math.floor(ratio * g.num_nodes)
    if k <= 0:
        return g
    idx = rng.choice(g.num_nodes, size=k, replace=False)
    x = g.features.copy()
    x[idx] = 0.0
    return g.with_features(x)


def subgraph(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Random-walk induced subgraph of ``ceil(ratio*n)`` nodes.

    The walk starts at a uniform node and moves to uniform neighbours; at a
    node without neighbours it restarts from a uniform visited node. It stops
    early once the start node's connected component is exhausted.
    """
    n = g.num_nodes
    target = min(math.ceil(ratio * n), n)
    nbrs = g.neighbors()
    start = int(rng.integers(n))

    # component size caps the reachable target
    seen = {start}
    stack = [start]
    while stack:
        for w in nbrs[stack.pop()]:
            w = int(w)
            if w not in seen:
                seen.add(w)
                stack.append(w)
    target = min(target, len(seen))

    visited = [start]
    in_set = {start}
    cur = start
    while len(visited) < target:
        nb = nbrs[cur]
        if len(nb) == 0:
            cur = visited[int(rng.integers(len(visited)))]
            continue
        cur = int(nb[int(rng.integers(len(nb)))])
        if cur not in in_set:
            in_set.add(cur)
            visited.append(cur)
    return g.induced(visited)


AUGMENTATIONS = {
    Augmentation.NODE_DROPOUT: node_dropout,
    Augmentation.EDGE_PERTURBATION: edge_perturbation,
    Augmentation.ATTRIBUTE_MASKING: attribute_masking,
    Augmentation.SUBGRAPH: subgraph,
}


@dataclass(frozen=True)
class MaskSpec:
    mask_rate: float = DEFAULT_MASK_RATE

    def __post_init__(self):
        if not 0.0 < self.mask_rate <= 1.0:
            raise ValueError(f"mask_rate must lie in (0, 1], got {self.mask_rate}")


def choose_masked_nodes(num_nodes: int, mask_rate: float, rng: np.random.Generator) -> np.ndarray:
    k = min(math.ceil(mask_rate * num_nodes), num_nodes)
    return np.sort(rng.choice(num_nodes, size=k, replace=False))


def feature_mask(g: Graph, spec: MaskSpec, mask_token, rng: np.random.Generator) -> tuple[Graph, np.ndarray]:
    """Overwrite the feature rows of ``ceil(mask_rate*n)`` nodes with ``mask_token``.

    Returns the masked graph and the sorted masked node indices.
    """
    idx = choose_masked_nodes(g.num_nodes, spec.mask_rate, rng)
    token = np.asarray(mask_token, dtype=np.float64).reshape(-1)
    x = g.features.copy()
    x[idx] = token
    return g.with_features(x), idx
