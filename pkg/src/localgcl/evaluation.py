"""Frozen-embedding evaluation: k-fold linear probe and the embedding-shift probe."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import FoldSplit, Graph, GraphDataset, batch, kfold_split
from .errors import ShapeError
from .model import ModelParams, graph_embeddings

STD_FLOOR = 1e-8


def embed_dataset(params: ModelParams, dataset: GraphDataset | list[Graph],
                  representation: str = "encoder", chunk: int = 256) -> np.ndarray:
    """Graph-level embedding of every graph (no augmentation, no masking).

    The default pools the encoder output, which is what downstream tasks use;
    ``representation="projection"`` returns the pooled projection-head vectors
    instead (see :func:`localgcl.model.graph_embeddings`).
    """
    graphs = list(dataset)
    if graphs and graphs[0].feature_dim != params.dims.in_dim:
        raise ShapeError(
            f"dataset feature dim {graphs[0].feature_dim} != model input dim {params.dims.in_dim}"
        )
    out = [graph_embeddings(params, batch(graphs[i:i + chunk]), representation)
           for i in range(0, len(graphs), chunk)]
    if not out:
        width = params.dims.hidden_dim if representation == "encoder" else params.dims.proj_dim
        return np.zeros((0, width))
    return np.concatenate(out, axis=0)


@dataclass
class EvalReport:
    dataset: str
    k: int
    seed: int
    fold_accuracies: list[float]
    mean: float
    std: float
    skipped_folds: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def line(self) -> str:
        return f"{self.dataset} {100 * self.mean:.2f}±{100 * self.std:.2f}"


def fit_logistic(x: np.ndarray, y: np.ndarray, num_classes: int, l2: float = 1e-3,
                 steps: int = 500, lr: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Multinomial logistic regression by full-batch gradient descent.

    Minimises mean cross-entropy + ``l2/2 * ||W||^2`` (bias unpenalised) from zero init.
    """
    n, d = x.shape
    w = np.zeros((d, num_classes))
    b = np.zeros(num_classes)
    onehot = np.eye(num_classes)[y]
    for _ in range(steps):
        logits = x @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        prob = np.exp(logits)
        prob /= prob.sum(axis=1, keepdims=True)
        err = (prob - onehot) / n
        w -= lr * (x.T @ err + l2 * w)
        b -= lr * err.sum(axis=0)
    return w, b


def linear_probe(embeddings, labels, k: int = 10, seed: int = 0, *, name: str = "",
                 l2: float = 1e-3, steps: int = 500, lr: float = 0.1,
                 split: FoldSplit | None = None) -> EvalReport:
    """k-fold accuracy of a standardised linear classifier on frozen embeddings.

    Folds whose training part holds a single class are skipped and listed in
    ``skipped_folds``; mean and (population) std cover the remaining folds.
    ``split`` overrides the seeded fold assignment.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or len(x) != len(y):
        raise ShapeError(f"embeddings {x.shape} vs labels {y.shape}")
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("linear_probe needs at least two classes")
    y = np.searchsorted(classes, y)
    if split is None:
        split = kfold_split(len(y), k, seed)
    elif len(split.assignments) != len(y):
        raise ShapeError(f"split covers {len(split.assignments)} items, labels {len(y)}")
    k = split.k
    accs, skipped = [], []
    for f, (tr, te) in enumerate(split.folds()):
        if len(np.unique(y[tr])) < 2:
            skipped.append(f)
            continue
        mu = x[tr].mean(axis=0)
        sd = np.maximum(x[tr].std(axis=0), STD_FLOOR)
        xtr, xte = (x[tr] - mu) / sd, (x[te] - mu) / sd
        w, b = fit_logistic(xtr, y[tr], len(classes), l2, steps, lr)
        pred = np.argmax(xte @ w + b, axis=1)
        accs.append(float(np.mean(pred == y[te])))
    mean = float(np.mean(accs)) if accs else float("nan")
    std = float(np.std(accs)) if accs else float("nan")
    return EvalReport(name, k, seed, accs, mean, std, skipped)


def evaluate(params: ModelParams, dataset: GraphDataset, k: int = 10, seeds=(0,),
             representation: str = "encoder") -> list[EvalReport]:
    emb = embed_dataset(params, dataset, representation)
    return [linear_probe(emb, dataset.labels, k, s, name=dataset.name) for s in seeds]


def pooled_summary(reports: list[EvalReport]) -> tuple[float, float]:
    """Mean and population std over the fold accuracies of all reports."""
    accs = [a for r in reports for a in r.fold_accuracies]
    return float(np.mean(accs)), float(np.std(accs))


# -- embedding-shift probe -------------------------------------------------

LOCAL_FRACTION = 0.05
GLOBAL_FRACTION = 0.3


def zero_node_features(g: Graph, fraction: float, rng: np.random.Generator) -> Graph:
    """Local perturbation: zero the features of ``ceil(fraction*n)`` nodes."""
    k = min(math.ceil(fraction * g.num_nodes), g.num_nodes)
    if k == 0:
        return g
    x = g.features.copy()
    x[rng.choice(g.num_nodes, size=k, replace=False)] = 0.0
    return g.with_features(x)


def has_disjoint_edge_pair(g: Graph) -> bool:
    e = g.edges
    for i in range(len(e)):
        a, b = e[i]
        rest = e[i + 1:]
        if np.any((rest != a).all(axis=1) & (rest != b).all(axis=1)):
            return True
    return False


def double_edge_swaps(g: Graph, fraction: float, rng: np.random.Generator,
                      max_tries_per_swap: int = 100) -> Graph:
    """Global perturbation: degree-preserving rewiring of about ``fraction`` of the edges.

    Each swap replaces ``(a, b), (c, d)`` by ``(a, d), (c, b)`` (orientation
    random) and touches two edges, so ``ceil(fraction*|E|/2)`` swaps are tried.
    """
    swaps = math.ceil(fraction * g.num_edges / 2)
    if swaps == 0:
        return g
    edges = [tuple(map(int, e)) for e in g.edges]
    present = set(edges)
    done, tries = 0, 0
    while done < swaps and tries < swaps * max_tries_per_swap:
        tries += 1
        i, j = rng.choice(len(edges), size=2, replace=False)
        a, b = edges[i]
        c, d = edges[j]
        if rng.random() < 0.5:
            c, d = d, c
        if len({a, b, c, d}) < 4:
            continue
        e1 = (min(a, d), max(a, d))
        e2 = (min(c, b), max(c, b))
        if e1 in present or e2 in present:
            continue
        present -= {edges[i], edges[j]}
        present |= {e1, e2}
        edges[i], edges[j] = e1, e2
        done += 1
    return Graph.from_edges(g.num_nodes, edges, g.features, g.label)


def cosine_distance_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``1 - cos`` per row, computed as half the squared distance of unit vectors."""
    def unit(v):
        n = np.linalg.norm(v, axis=1, keepdims=True)
        return np.where(n >= 1e-12, v / np.where(n >= 1e-12, n, 1.0), 0.0)
    ua, ub = unit(a), unit(b)
    return np.clip(0.5 * ((ua - ub) ** 2).sum(axis=1), 0.0, 2.0)


@dataclass
class ProbeReport:
    dataset: str
    local_fraction: float
    global_fraction: float
    local_shift: list[float]
    global_shift: list[float]
    local_mean: float
    global_mean: float
    skipped: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def probe_embedding_shift(params: ModelParams, dataset: GraphDataset,
                          local_fraction: float = LOCAL_FRACTION,
                          global_fraction: float = GLOBAL_FRACTION,
                          seed: int = 0) -> ProbeReport:
    """Cosine distance between each graph's embedding and that of a perturbed copy.

    Graphs without two disjoint edges cannot be rewired; they are left out of
    the global list and their indices returned in ``skipped``.
    """
    graphs = list(dataset)
    rng = np.random.default_rng(seed)
    local_v, global_v, rewired_idx, skipped = [], [], [], []
    for i, g in enumerate(graphs):
        local_v.append(zero_node_features(g, local_fraction, rng))
        if global_fraction > 0 and not has_disjoint_edge_pair(g):
            skipped.append(i)
            continue
        global_v.append(double_edge_swaps(g, global_fraction, rng))
        rewired_idx.append(i)
    base = embed_dataset(params, graphs)
    loc = cosine_distance_rows(base, embed_dataset(params, local_v))
    glo = cosine_distance_rows(base[rewired_idx], embed_dataset(params, global_v)) if global_v else np.zeros(0)
    return ProbeReport(
        dataset.name, local_fraction, global_fraction,
        [float(v) for v in loc], [float(v) for v in glo],
        float(loc.mean()) if len(loc) else 0.0,
        float(glo.mean()) if len(glo) else 0.0,
        skipped,
    )
