"""Graph containers, TUDataset text I/O, batching and fold splits."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyBatchError,
    InvalidFoldCountError,
    MalformedDatasetError,
    MissingFileError,
)

log = logging.getLogger(__name__)

DEFAULT_MAX_DEGREE = 10


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def canonical_edges(edges, num_nodes: int | None = None) -> np.ndarray:
    """Return a sorted ``(m, 2)`` array of unique ``(min, max)`` pairs without self-loops."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.sort(e, axis=1)
    e = e[e[:, 0] != e[:, 1]]
    if not e.size:
        return np.zeros((0, 2), dtype=np.int64)
    if e.min() < 0 or (num_nodes is not None and e.max() >= num_nodes):
        raise ValueError("edge endpoint out of range")
    n = int(e.max()) + 1
    keys = np.unique(e[:, 0] * n + e[:, 1])
    return np.stack([keys // n, keys % n], axis=1)


@dataclass(frozen=True, eq=False)
class Graph:
    """One undirected attributed graph.

    ``edges`` holds each undirected edge once as a canonical ``(min, max)`` pair,
    sorted lexicographically. Arrays are read-only after construction.
    """

    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    label: int | None = None

    def __post_init__(self):
        n = int(self.num_nodes)
        if n < 1:
            raise ValueError("a graph needs at least one node")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise DimensionMismatchError(
                f"features must have shape ({n}, d), got {feats.shape}"
            )
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ValueError("edges must be canonical (min, max) pairs without self-loops")
            keys = edges[:, 0] * n + edges[:, 1]
            if np.any(np.diff(keys) <= 0):
                raise ValueError("edges must be sorted and free of duplicates")
        object.__setattr__(self, "num_nodes", n)
        object.__setattr__(self, "edges", _frozen(edges.copy()))
        object.__setattr__(self, "features", _frozen(feats.copy()))
        if self.label is not None:
            object.__setattr__(self, "label", int(self.label))

    @classmethod
    def from_edges(cls, num_nodes: int, edges, features, label: int | None = None) -> "Graph":
        """Build a graph from arbitrary (possibly directed or duplicated) pairs."""
        return cls(num_nodes, canonical_edges(edges, num_nodes), features, label)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.num_nodes)

    def neighbors(self) -> list[np.ndarray]:
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.argsort(src, kind="stable")
        splits = np.cumsum(np.bincount(src, minlength=self.num_nodes))[:-1]
        return np.split(dst[order], splits)

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency, built on demand (never stored)."""
        a = np.zeros((self.num_nodes, self.num_nodes), dtype=np.int64)
        a[self.edges[:, 0], self.edges[:, 1]] = 1
        a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def with_features(self, features) -> "Graph":
        return Graph(self.num_nodes, self.edges, features, self.label)

    def induced(self, keep) -> "Graph":
        """Subgraph induced by the node indices ``keep``, relabelled in sorted order."""
        keep = np.unique(np.asarray(keep, dtype=np.int64))
        remap = np.full(self.num_nodes, -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        e = remap[self.edges]
        e = e[(e >= 0).all(axis=1)]
        return Graph(len(keep), e, self.features[keep], self.label)

    def permuted(self, perm) -> "Graph":
        """Relabel nodes so that old node ``perm[i]`` becomes new node ``i``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return Graph.from_edges(self.num_nodes, inv[self.edges], self.features[perm], self.label)

    def same_as(self, other: "Graph") -> bool:
        return (
            self.num_nodes == other.num_nodes
            and self.label == other.label
            and np.array_equal(self.edges, other.edges)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )


@dataclass(frozen=True, eq=False)
class GraphDataset:
    name: str
    graphs: tuple[Graph, ...]
    num_classes: int
    feature_dim: int
    # "node_labels", "degree", or "none" (d == 0, must be synthesized before training)
    feature_source: str = "node_labels"
    graph_label_values: tuple[int, ...] = ()
    node_label_values: tuple[int, ...] = ()
    self_loops_dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        for g in self.graphs:
            if g.feature_dim != self.feature_dim:
                raise DimensionMismatchError(
                    f"graph feature dim {g.feature_dim} != dataset feature dim {self.feature_dim}"
                )
            if g.label is not None and not 0 <= g.label < self.num_classes:
                raise ValueError(f"label {g.label} outside [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.graphs)

    def __getitem__(self, i) -> Graph:
        return self.graphs[i]

    def __iter__(self) -> Iterator[Graph]:
        return iter(self.graphs)

    @property
    def has_node_attributes(self) -> bool:
        return self.feature_dim > 0

    @property
    def labels(self) -> np.ndarray:
        return np.array([-1 if g.label is None else g.label for g in self.graphs], dtype=np.int64)

    def same_as(self, other: "GraphDataset") -> bool:
        return (
            self.name == other.name
            and self.num_classes == other.num_classes
            and self.feature_dim == other.feature_dim
            and self.feature_source == other.feature_source
            and self.graph_label_values == other.graph_label_values
            and self.node_label_values == other.node_label_values
            and len(self) == len(other)
            and all(a.same_as(b) for a, b in zip(self.graphs, other.graphs))
        )


def _read_int_lines(path: Path, cols: int) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != cols:
                raise MalformedDatasetError(
                    f"expected {cols} comma-separated value(s), got {len(parts)}",
                    file=path.name, line=lineno,
                )
            try:
                rows.append([int(p) for p in parts] + [lineno])
            except ValueError:
                raise MalformedDatasetError(
                    f"non-integer token in {text!r}", file=path.name, line=lineno
                ) from None
    return np.asarray(rows, dtype=np.int64).reshape(-1, cols + 1)


def parse_tudataset(directory, name: str) -> GraphDataset:
    """Read a dataset in TUDataset text format.

    Required files are ``<name>_A.txt``, ``<name>_graph_indicator.txt`` and
    ``<name>_graph_labels.txt``; ``<name>_node_labels.txt`` is optional. Without
    node labels the returned dataset has ``feature_dim == 0`` and
    ``feature_source == "none"``; call :func:`synthesize_degree_features`.
    """
    root = Path(directory)
    paths = {k: root / f"{name}_{k}.txt" for k in ("A", "graph_indicator", "graph_labels", "node_labels")}
    for k in ("A", "graph_indicator", "graph_labels"):
        if not paths[k].is_file():
            raise MissingFileError(f"missing required file {paths[k]}")

    glabels = _read_int_lines(paths["graph_labels"], 1)
    n_graphs = len(glabels)
    indicator = _read_int_lines(paths["graph_indicator"], 1)
    n_nodes = len(indicator)
    gid = indicator[:, 0]
    bad = np.flatnonzero((gid < 1) | (gid > n_graphs))
    if bad.size:
        i = bad[0]
        raise MalformedDatasetError(
            f"node refers to graph id {gid[i]} but only {n_graphs} graphs are labelled",
            file=paths["graph_indicator"].name, line=int(indicator[i, 1]),
        )
    gid = gid - 1
    counts = np.bincount(gid, minlength=n_graphs)
    if np.any(counts == 0):
        g = int(np.flatnonzero(counts == 0)[0])
        raise MalformedDatasetError(
            f"graph id {g + 1} has no nodes", file=paths["graph_labels"].name, line=int(glabels[g, 1])
        )
    # local index = order of appearance within the graph
    order = np.argsort(gid, kind="stable")
    local = np.empty(n_nodes, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    local[order] = np.arange(n_nodes) - np.repeat(starts, counts)

    arcs = _read_int_lines(paths["A"], 2)
    if arcs.size:
        ends = arcs[:, :2]
        bad = np.flatnonzero(((ends < 1) | (ends > n_nodes)).any(axis=1))
        if bad.size:
            i = bad[0]
            raise MalformedDatasetError(
                f"arc ({ends[i, 0]}, {ends[i, 1]}) references a node outside 1..{n_nodes}",
                file=paths["A"].name, line=int(arcs[i, 2]),
            )
        ends = ends - 1
        cross = np.flatnonzero(gid[ends[:, 0]] != gid[ends[:, 1]])
        if cross.size:
            i = cross[0]
            raise MalformedDatasetError(
                f"arc ({ends[i, 0] + 1}, {ends[i, 1] + 1}) crosses graphs",
                file=paths["A"].name, line=int(arcs[i, 2]),
            )
        loops = ends[:, 0] == ends[:, 1]
        self_loops = int(loops.sum())
        if self_loops:
            log.warning("%s: dropped %d self-loop arc(s)", name, self_loops)
        ends = ends[~loops]
    else:
        ends = np.zeros((0, 2), dtype=np.int64)
        self_loops = 0

    node_label_values: tuple[int, ...] = ()
    if paths["node_labels"].is_file():
        nl = _read_int_lines(paths["node_labels"], 1)
        if len(nl) != n_nodes:
            raise MalformedDatasetError(
                f"{len(nl)} node labels for {n_nodes} nodes", file=paths["node_labels"].name,
                line=int(nl[-1, 1]) if len(nl) else None,
            )
        values, codes = np.unique(nl[:, 0], return_inverse=True)
        node_label_values = tuple(int(v) for v in values)
        feats = np.zeros((n_nodes, len(values)))
        feats[np.arange(n_nodes), codes] = 1.0
        source = "node_labels"
    else:
        feats = np.zeros((n_nodes, 0))
        source = "none"

    gvalues, gcodes = np.unique(glabels[:, 0], return_inverse=True)

    edge_graph = gid[ends[:, 0]]
    edge_order = np.argsort(edge_graph, kind="stable")
    edge_splits = np.cumsum(np.bincount(edge_graph, minlength=n_graphs))[:-1]
    per_graph_edges = np.split(local[ends[edge_order]], edge_splits)
    node_splits = np.cumsum(counts)[:-1]
    per_graph_feats = np.split(feats[order], node_splits)

    graphs = [
        Graph.from_edges(int(counts[g]), per_graph_edges[g], per_graph_feats[g], int(gcodes[g]))
        for g in range(n_graphs)
    ]
    return GraphDataset(
        name=name,
        graphs=tuple(graphs),
        num_classes=len(gvalues),
        feature_dim=feats.shape[1],
        feature_source=source,
        graph_label_values=tuple(int(v) for v in gvalues),
        node_label_values=node_label_values,
        self_loops_dropped=self_loops,
    )


def write_tudataset(ds: GraphDataset, directory) -> None:
    """Write ``ds`` in TUDataset text format (both arc directions per edge).

    Features are written back as node labels only when they came from node
    labels; other feature sources are not representable in the format.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    offsets = np.concatenate([[0], np.cumsum([g.num_nodes for g in ds.graphs])])
    gvals = ds.graph_label_values or tuple(range(ds.num_classes))
    with open(root / f"{ds.name}_A.txt", "w", newline="\n") as fa, \
            open(root / f"{ds.name}_graph_indicator.txt", "w", newline="\n") as fi, \
            open(root / f"{ds.name}_graph_labels.txt", "w", newline="\n") as fl:
        for gi, g in enumerate(ds.graphs):
            base = offsets[gi] + 1
            for u, v in g.edges:
                fa.write(f"{u + base}, {v + base}\n{v + base}, {u + base}\n")
            fi.write(f"{gi + 1}\n" * g.num_nodes)
            fl.write(f"{gvals[g.label if g.label is not None else 0]}\n")
    if ds.feature_source == "node_labels" and ds.feature_dim:
        nvals = ds.node_label_values or tuple(range(ds.feature_dim))
        with open(root / f"{ds.name}_node_labels.txt", "w", newline="\n") as fn:
            for g in ds.graphs:
                for row in g.features:
                    fn.write(f"{nvals[int(np.argmax(row))]}\n")


def synthesize_degree_features(ds: GraphDataset, max_degree: int = DEFAULT_MAX_DEGREE) -> GraphDataset:
    """Replace node features by a one-hot of ``min(degree, max_degree)``."""
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    dim = max_degree + 1
    graphs = []
    for g in ds.graphs:
        x = np.zeros((g.num_nodes, dim))
        x[np.arange(g.num_nodes), np.minimum(g.degrees(), max_degree)] = 1.0
        graphs.append(g.with_features(x))
    return replace(ds, graphs=tuple(graphs), feature_dim=dim, feature_source="degree", node_label_values=())


@dataclass(frozen=True, eq=False)
class GraphBatch:
    """Block-diagonal packing of several graphs.

    ``segments[v]`` is the graph id of global node ``v``; ``node_offsets`` has
    ``graph_count + 1`` entries.
    """

    features: np.ndarray
    edges: np.ndarray
    segments: np.ndarray
    graph_count: int
    node_offsets: np.ndarray
    labels: np.ndarray | None = None

    @property
    def num_nodes(self) -> int:
        return int(self.node_offsets[-1])

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def arcs(self) -> tuple[np.ndarray, np.ndarray]:
        """Both directions of every edge as ``(src, dst)``, sorted by ``dst``."""
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((src, dst))
        return src[order], dst[order]

    @cached_property
    def gcn_arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Arcs plus self-loops with symmetric normalisation ``1/sqrt(deg~u deg~v)``."""
        n = self.num_nodes
        src, dst = self.arcs
        loops = np.arange(n)
        src = np.concatenate([src, loops])
        dst = np.concatenate([dst, loops])
        order = np.lexsort((src, dst))
        src, dst = src[order], dst[order]
        deg = np.bincount(dst, minlength=n).astype(np.float64)
        coef = 1.0 / np.sqrt(deg[src] * deg[dst])
        return src, dst, coef

    @cached_property
    def graph_sizes(self) -> np.ndarray:
        return np.diff(self.node_offsets)


def batch(graphs: Sequence[Graph]) -> GraphBatch:
    if len(graphs) == 0:
        raise EmptyBatchError("cannot batch an empty list of graphs")
    d = graphs[0].feature_dim
    for g in graphs:
        if g.feature_dim != d:
            raise DimensionMismatchError(f"mixed feature dims {d} and {g.feature_dim}")
    sizes = np.array([g.num_nodes for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    edges = np.concatenate(
        [g.edges + offsets[i] for i, g in enumerate(graphs)]
    ).reshape(-1, 2)
    feats = np.concatenate([g.features for g in graphs], axis=0)
    segments = np.repeat(np.arange(len(graphs)), sizes)
    labels = None
    if all(g.label is not None for g in graphs):
        labels = np.array([g.label for g in graphs], dtype=np.int64)
    return GraphBatch(
        features=_frozen(feats),
        edges=_frozen(edges.astype(np.int64)),
        segments=_frozen(segments),
        graph_count=len(graphs),
        node_offsets=_frozen(offsets),
        labels=labels,
    )


def unbatch(b: GraphBatch) -> list[Graph]:
    out = []
    edge_graph = b.segments[b.edges[:, 0]] if len(b.edges) else np.zeros(0, dtype=np.int64)
    for i in range(b.graph_count):
        lo, hi = b.node_offsets[i], b.node_offsets[i + 1]
        e = b.edges[edge_graph == i] - lo
        label = None if b.labels is None else int(b.labels[i])
        out.append(Graph(int(hi - lo), e, b.features[lo:hi], label))
    return out


@dataclass(frozen=True)
class FoldSplit:
    k: int
    assignments: np.ndarray = field(repr=False)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def folds(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(train_idx, test_idx)`` for every fold in order."""
        for f in range(self.k):
            yield np.flatnonzero(self.assignments != f), np.flatnonzero(self.assignments == f)


def kfold_split(n: int, k: int, seed: int = 0) -> FoldSplit:
    """Shuffled round-robin assignment of ``n`` items to ``k`` folds."""
    if k < 2 or k > n:
        raise InvalidFoldCountError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % k
    return FoldSplit(k, _frozen(assignments))


def resolve_data_root(root=None) -> Path:
    if root:
        return Path(root)
    env = os.environ.get("LOCALGCL_DATA_DIR")
    return Path(env) if env else Path("data")


def load_dataset(root, name: str) -> GraphDataset:
    """Parse ``name`` from ``root/name/`` if that directory exists, else from ``root`` itself."""
    root = resolve_data_root(root)
    sub = root / name
    return parse_tudataset(sub if sub.is_dir() else root, name)
