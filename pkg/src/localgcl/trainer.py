"""Joint contrastive + masked-reconstruction training loop and checkpoints."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import autodiff as ad
from .augment import (
    Augmentation,
    AugmentationSpec,
    MaskSpec,
    choose_masked_nodes,
    sample_augmentation,
)
from .autodiff import AdamState, Tape
from .data import Graph, GraphDataset, batch, load_dataset, synthesize_degree_features
from .errors import (
    ConfigError,
    CorruptCheckpointError,
    DivergedError,
    MissingFileError,
    UnsupportedVersionError,
)
from .model import Dims, ModelParams, decode, encode, init_params, param_shapes, project
from .objective import ContrastiveConfig, LambdaSchedule, combined_loss, lambda_at, nt_xent, recon_mse

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = "localgcl-checkpoint 1"
METRICS_FILE = "metrics.jsonl"
CHECKPOINT_FILE = "checkpoint.txt"


@dataclass
class TrainConfig:
    data_root: str | None = None  # None: $LOCALGCL_DATA_DIR, then ./data
    dataset: str = "MUTAG"
    degree_features: bool = False
    max_degree: int = 10
    backbone: str = "gin"
    hidden_dim: int = 32
    proj_dim: int = 32
    layers: int = 3
    augmentations: tuple[str, ...] = tuple(a.value for a in Augmentation)
    node_dropout: float = 0.2
    edge_perturbation: float = 0.2
    attribute_masking: float = 0.2
    subgraph: float = 0.2
    mask_rate: float = 0.5
    tau: float = 0.5
    literal_denominator: bool = False
    masked_only: bool = False
    schedule: LambdaSchedule = field(default_factory=LambdaSchedule.incremental)
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    output_dir: str | None = None

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (the contrastive loss needs negatives)")
        if not self.lr > 0:
            raise ConfigError("lr must be > 0")
        try:
            self.augmentation_specs()
            MaskSpec(self.mask_rate)
            self.contrastive()
            Dims(1, self.hidden_dim, self.proj_dim, self.layers, self.backbone)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def augmentation_specs(self) -> tuple[AugmentationSpec, ...]:
        specs = []
        for name in self.augmentations:
            try:
                kind = Augmentation(name)
            except ValueError:
                raise ConfigError(f"unknown augmentation {name!r}") from None
            specs.append(AugmentationSpec(kind, getattr(self, kind.value)))
        if not specs:
            raise ConfigError("at least one augmentation is required")
        return tuple(specs)

    def contrastive(self) -> ContrastiveConfig:
        return ContrastiveConfig(self.tau, not self.literal_denominator)


@dataclass
class MetricsRecord:
    epoch: int
    lam: float
    l_cl: float
    l_mm: float
    l_total: float
    wall_ms: float = 0.0

    def to_json(self) -> str:
        # wall time is excluded so that logs of identical runs are byte-identical
        return json.dumps({"epoch": self.epoch, "lambda": self.lam, "l_cl": self.l_cl,
                           "l_mm": self.l_mm, "l_total": self.l_total}, sort_keys=False)


def prepare_dataset(cfg: TrainConfig, ds: GraphDataset | None = None) -> GraphDataset:
    if ds is None:
        ds = load_dataset(cfg.data_root, cfg.dataset)
    if cfg.degree_features:
        ds = synthesize_degree_features(ds, cfg.max_degree)
    if ds.feature_dim == 0:
        raise ConfigError(
            f"{ds.name} has no node attributes; set data.degree_features = true"
        )
    return ds


def graph_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Independent stream for one graph in one epoch."""
    return np.random.default_rng([seed, epoch, index])


def epoch_batches(n: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Seeded shuffle cut into batches; a trailing batch of one graph joins the previous one."""
    order = np.random.default_rng([seed, epoch, 2**31]).permutation(n)
    chunks = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        last = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], last])
    return chunks


@dataclass
class StepResult:
    l_cl: float
    l_mm: float
    l_total: float
    grads: dict[str, np.ndarray]


def batch_loss(params: ModelParams, graphs: list[Graph], views: list[Graph],
               masked: list[np.ndarray], lam: float, cfg: TrainConfig) -> StepResult:
    """Loss and gradients for one batch.

    ``views`` are the augmented graphs and ``masked`` the node indices whose
    features are replaced by the learnable mask token. Original, augmented and
    masked views go through the shared encoder as a single block-diagonal batch.
    """
    n = len(graphs)
    big = batch(list(graphs) + list(views) + list(graphs))
    tape = Tape()
    p = params.bind(tape)

    # rows of the masked copy (third block) get the token instead of their features
    mask_off = big.node_offsets[2 * n]
    rows = np.concatenate([m + big.node_offsets[2 * n + i] for i, m in enumerate(masked)])
    indicator = np.zeros((big.num_nodes, 1))
    indicator[rows] = 1.0
    base = big.features * (1.0 - indicator)
    feats = ad.add(tape.constant(base), ad.matmul(indicator, p["mask_token"]))

    H = encode(big, p, params.dims, features=feats)
    emb = project(H, big, p)
    z = ad.gather_rows(emb.graph_z, np.arange(n))
    z_hat = ad.gather_rows(emb.graph_z, np.arange(n, 2 * n))
    l_cl = nt_xent(z, z_hat, cfg.contrastive())

    lo, hi = big.node_offsets[2 * n], big.node_offsets[3 * n]
    recon = decode(ad.gather_rows(emb.node_z, np.arange(lo, hi)), p)
    orig = batch(graphs)
    local_masked = rows - mask_off if cfg.masked_only else None
    l_mm = recon_mse(orig.features, recon, orig, masked_rows=local_masked)

    total = combined_loss(l_cl, l_mm, lam)
    grads = tape.backward(total)
    return StepResult(l_cl.item(), l_mm.item(), total.item(),
                      {leaf.name: g for leaf, g in grads.items()})


def make_views(graphs: list[Graph], indices, cfg: TrainConfig, epoch: int):
    specs = cfg.augmentation_specs()
    views, masked = [], []
    for g, idx in zip(graphs, indices):
        rng = graph_rng(cfg.seed, epoch, int(idx))
        views.append(sample_augmentation(rng, specs).apply(g, rng))
        masked.append(choose_masked_nodes(g.num_nodes, cfg.mask_rate, rng))
    return views, masked


def train(cfg: TrainConfig, dataset: GraphDataset | None = None,
          callback: Callable[[MetricsRecord], None] | None = None) -> tuple[ModelParams, list[MetricsRecord]]:
    """Train from scratch. Writes metrics and the final checkpoint when ``cfg.output_dir`` is set."""
    cfg.validate()
    ds = prepare_dataset(cfg, dataset)
    if len(ds) < 2:
        raise ConfigError("need at least two graphs to train")
    dims = Dims(ds.feature_dim, cfg.hidden_dim, cfg.proj_dim, cfg.layers, cfg.backbone)
    params = init_params(dims, cfg.seed)
    state = AdamState(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    out = Path(cfg.output_dir) if cfg.output_dir else None
    metrics_fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(out / METRICS_FILE, "w", newline="\n")
    records: list[MetricsRecord] = []
    try:
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            lam = lambda_at(cfg.schedule, epoch, cfg.epochs)
            sums = np.zeros(3)
            chunks = epoch_batches(len(ds), cfg.batch_size, cfg.seed, epoch)
            for chunk in chunks:
                graphs = [ds.graphs[i] for i in chunk]
                views, masked = make_views(graphs, chunk, cfg, epoch)
                res = batch_loss(params, graphs, views, masked, lam, cfg)
                if not math.isfinite(res.l_total):
                    raise DivergedError(epoch, f"loss = {res.l_total}")
                params.arrays, state = adam_step_named(params.arrays, res.grads, state)
                sums += (res.l_cl, res.l_mm, res.l_total)
            mean = sums / len(chunks)
            rec = MetricsRecord(epoch, lam, float(mean[0]), float(mean[1]), float(mean[2]),
                                (time.perf_counter() - t0) * 1e3)
            records.append(rec)
            if metrics_fh:
                metrics_fh.write(rec.to_json() + "\n")
            if callback:
                callback(rec)
            log.debug("epoch %d lambda=%.3f l_cl=%.4f l_mm=%.4f", epoch, lam, rec.l_cl, rec.l_mm)
    finally:
        if metrics_fh:
            metrics_fh.close()
    if out is not None:
        save_checkpoint(params, out / CHECKPOINT_FILE)
    return params, records


def adam_step_named(arrays, grads, state):
    new, state = ad.adam_step(arrays, grads, state)
    return {k: new[k] for k in arrays}, state


def _fmt(x: float) -> str:
    return f"{float(x).hex()} {float(x)!r}"


def save_checkpoint(params: ModelParams, path) -> None:
    """Text checkpoint: a version line, the dims, then one value per line as ``hex decimal``."""
    dims = params.dims
    lines = [
        CHECKPOINT_VERSION,
        f"dims in_dim={dims.in_dim} hidden_dim={dims.hidden_dim} proj_dim={dims.proj_dim} "
        f"layers={dims.layers} backbone={dims.backbone}",
    ]
    for name, arr in params.arrays.items():
        lines.append(f"param {name} {arr.shape[0]} {arr.shape[1]}")
        lines.extend(_fmt(v) for v in arr.ravel())
    lines.append("end")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path, expected: Dims | None = None) -> ModelParams:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise MissingFileError(f"checkpoint {path} not found") from None
    lines = text.split("\n")
    if not lines or lines[0] != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(f"{path}: expected {CHECKPOINT_VERSION!r}, got {lines[0][:40]!r}")
    try:
        head = lines[1].split()
        if head[0] != "dims":
            raise ValueError("missing dims line")
        kv = dict(item.split("=", 1) for item in head[1:])
        dims = Dims(int(kv["in_dim"]), int(kv["hidden_dim"]), int(kv["proj_dim"]),
                    int(kv["layers"]), kv["backbone"])
        shapes = param_shapes(dims)
        arrays = {}
        pos = 2
        for name, shape in shapes.items():
            tag, pname, r, c = lines[pos].split()
            if tag != "param" or pname != name or (int(r), int(c)) != shape:
                raise ValueError(f"line {pos + 1}: expected param {name} {shape}")
            pos += 1
            size = shape[0] * shape[1]
            chunk = lines[pos:pos + size]
            if len(chunk) != size:
                raise ValueError(f"{name}: truncated values")
            arrays[name] = np.array([float.fromhex(v.split()[0]) for v in chunk]).reshape(shape)
            pos += size
        if lines[pos] != "end":
            raise ValueError("missing end marker")
    except (ValueError, KeyError, IndexError) as exc:
        raise CorruptCheckpointError(f"{path}: {exc}") from None
    if expected is not None and expected != dims:
        raise CorruptCheckpointError(f"{path}: checkpoint dims {dims} do not match {expected}")
    return ModelParams(dims, arrays)
