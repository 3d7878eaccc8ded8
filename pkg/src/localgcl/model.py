"""Encoder, projection head, decoder and sum-pooling readout."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import DiffArray, Tape
from .data import GraphBatch
from .errors import ShapeError

BACKBONES = ("gin", "gcn")


@dataclass(frozen=True)
class Dims:
    in_dim: int
    hidden_dim: int = 32
    proj_dim: int = 32
    layers: int = 3
    backbone: str = "gin"

    def __post_init__(self):
        for name in ("in_dim", "hidden_dim", "proj_dim", "layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.backbone not in BACKBONES:
            raise ValueError(f"backbone must be one of {BACKBONES}, got {self.backbone!r}")


def param_shapes(dims: Dims) -> dict[str, tuple[int, int]]:
    """Name -> shape for every learnable array, in canonical order."""
    d, h, p = dims.in_dim, dims.hidden_dim, dims.proj_dim
    shapes: dict[str, tuple[int, int]] = {}
    for i in range(dims.layers):
        fan_in = d if i == 0 else h
        pre = f"encoder.{i}."
        if dims.backbone == "gin":
            shapes[pre + "w1"] = (fan_in, h)
            shapes[pre + "b1"] = (1, h)
            shapes[pre + "w2"] = (h, h)
            shapes[pre + "b2"] = (1, h)
            shapes[pre + "eps"] = (1, 1)
        else:
            shapes[pre + "w"] = (fan_in, h)
            shapes[pre + "b"] = (1, h)
    shapes["projection.w1"] = (h, h)
    shapes["projection.b1"] = (1, h)
    shapes["projection.w2"] = (h, p)
    shapes["projection.b2"] = (1, p)
    shapes["decoder.w1"] = (p, h)
    shapes["decoder.b1"] = (1, h)
    shapes["decoder.w2"] = (h, d)
    shapes["decoder.b2"] = (1, d)
    shapes["mask_token"] = (1, d)
    return shapes


@dataclass
class ModelParams:
    dims: Dims
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        expected = param_shapes(self.dims)
        if list(self.arrays) != list(expected):
            missing = set(expected) ^ set(self.arrays)
            raise ShapeError(f"parameter names do not match dims: {sorted(missing) or 'order differs'}")
        for k, shape in expected.items():
            if self.arrays[k].shape != shape:
                raise ShapeError(f"{k}: expected {shape}, got {self.arrays[k].shape}")

    def __getitem__(self, name) -> np.ndarray:
        return self.arrays[name]

    def copy(self) -> "ModelParams":
        return ModelParams(self.dims, {k: v.copy() for k, v in self.arrays.items()})

    def bind(self, tape: Tape) -> dict[str, DiffArray]:
        """Register every array as a leaf on ``tape``."""
        return {k: tape.leaf(v, name=k) for k, v in self.arrays.items()}

    def num_parameters(self) -> int:
        return sum(v.size for v in self.arrays.values())


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(dims: Dims, seed: int = 0) -> ModelParams:
    """Glorot-uniform weights, zero biases, ``eps = 0``, zero mask token."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in param_shapes(dims).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf.startswith("w"):
            b = glorot_bound(*shape)
            arrays[name] = rng.uniform(-b, b, size=shape)
        else:
            arrays[name] = np.zeros(shape)
    return ModelParams(dims, arrays)


def _mlp2(x, p, prefix: str, final_relu: bool = False):
    h = ad.relu(ad.add(ad.matmul(x, p[prefix + "w1"]), p[prefix + "b1"]))
    out = ad.add(ad.matmul(h, p[prefix + "w2"]), p[prefix + "b2"])
    return ad.relu(out) if final_relu else out


def _check_rows(H: DiffArray, b: GraphBatch, what: str):
    if H.shape[0] != b.num_nodes:
        raise ShapeError(f"{what}: {H.shape[0]} rows for a batch of {b.num_nodes} nodes")


def gin_layer(H: DiffArray, b: GraphBatch, p: dict, prefix: str) -> DiffArray:
    """``relu(MLP((1 + eps) h_v + sum_{u in N(v)} h_u))``."""
    _check_rows(H, b, "gin_layer")
    src, dst = b.arcs
    agg = ad.segment_sum(ad.gather_rows(H, src), dst, b.num_nodes)
    eps = ad.broadcast_scalar(p[prefix + "eps"], H.shape[0], H.shape[1])
    pre = ad.add(ad.add(H, ad.mul(eps, H)), agg)
    return _mlp2(pre, p, prefix, final_relu=True)


def gcn_layer(H: DiffArray, b: GraphBatch, p: dict, prefix: str) -> DiffArray:
    """``relu(W sum_{u in N(v) + v} h_u / sqrt(deg~_u deg~_v) + b)`` with ``deg~ = deg + 1``."""
    _check_rows(H, b, "gcn_layer")
    src, dst, coef = b.gcn_arcs
    msgs = ad.mul(ad.gather_rows(H, src), np.repeat(coef[:, None], H.shape[1], axis=1))
    agg = ad.segment_sum(msgs, dst, b.num_nodes)
    return ad.relu(ad.add(ad.matmul(agg, p[prefix + "w"]), p[prefix + "b"]))


LAYERS = {"gin": gin_layer, "gcn": gcn_layer}


def encode(b: GraphBatch, p: dict, dims: Dims, features: DiffArray | None = None) -> DiffArray:
    """Run the ``dims.layers`` GNN layers; returns ``(total_nodes, hidden_dim)``.

    ``features`` overrides ``b.features`` (used when node features are themselves
    differentiable, e.g. a masked view holding the learnable mask token).
    """
    tape = next(iter(p.values())).tape
    H = features if features is not None else tape.constant(b.features)
    if H.shape[1] != dims.in_dim:
        raise ShapeError(f"encode: features have {H.shape[1]} columns, model expects {dims.in_dim}")
    layer = LAYERS[dims.backbone]
    for i in range(dims.layers):
        H = layer(H, b, p, f"encoder.{i}.")
    return H


@dataclass
class Embeddings:
    node_z: DiffArray
    graph_z: DiffArray


def project(H: DiffArray, b: GraphBatch, p: dict) -> Embeddings:
    """Per-node projection head followed by per-graph sum pooling."""
    _check_rows(H, b, "project")
    node_z = _mlp2(H, p, "projection.")
    return Embeddings(node_z, ad.segment_sum(node_z, b.segments, b.graph_count))


def decode(node_z: DiffArray, p: dict) -> DiffArray:
    """Row-wise decoder MLP back to feature space (linear output)."""
    if node_z.shape[1] != p["decoder.w1"].shape[0]:
        raise ShapeError(f"decode: input has {node_z.shape[1]} columns, expected {p['decoder.w1'].shape[0]}")
    return _mlp2(node_z, p, "decoder.")


REPRESENTATIONS = ("encoder", "projection")


def graph_embeddings(params: ModelParams, b: GraphBatch, representation: str = "encoder") -> np.ndarray:
    """Sum-pooled graph embeddings for a batch, as a plain array.

    ``"encoder"`` pools the encoder output (``hidden_dim`` columns);
    ``"projection"`` pools the projection-head output, i.e. the vectors the
    contrastive loss sees during training (``proj_dim`` columns).
    """
    if representation not in REPRESENTATIONS:
        raise ValueError(f"representation must be one of {REPRESENTATIONS}")
    tape = Tape()
    p = params.bind(tape)
    H = encode(b, p, params.dims)
    if representation == "encoder":
        return ad.segment_sum(H, b.segments, b.graph_count).value
    return project(H, b, p).graph_z.value
