import numpy as np
import pytest

from conftest import random_graph
from localgcl.autodiff import Tape
from localgcl.data import Graph, batch
from localgcl.errors import ShapeError
from localgcl.model import (
    Dims,
    ModelParams,
    decode,
    encode,
    gcn_layer,
    gin_layer,
    graph_embeddings,
    init_params,
    param_shapes,
    project,
)
from modelcases import node_embeddings, permutation_errors


@pytest.mark.parametrize("backbone", ["gin", "gcn"])
def test_permutation_properties(backbone):
    rng = np.random.default_rng(4)
    params = init_params(Dims(4, 8, 6, 3, backbone), seed=1)
    for _ in range(25):
        eq, inv = permutation_errors(params, random_graph(rng, 1, 15, d=4), rng)
        assert eq <= 1e-10 and inv <= 1e-10


@pytest.mark.parametrize("backbone", ["gin", "gcn"])
def test_batching_does_not_mix_graphs(backbone):
    rng = np.random.default_rng(0)
    params = init_params(Dims(3, 5, 4, 2, backbone), seed=0)
    graphs = [random_graph(rng, 1, 8, d=3) for _ in range(5)]
    together = graph_embeddings(params, batch(graphs))
    alone = np.concatenate([graph_embeddings(params, batch([g])) for g in graphs])
    np.testing.assert_allclose(together, alone, rtol=0, atol=1e-12)
    nodes = node_embeddings(params, graphs)
    np.testing.assert_allclose(nodes[: graphs[0].num_nodes], node_embeddings(params, graphs[:1]), atol=1e-12)


def _identity_gin(h):
    # w1 = w2 = I, zero biases: the layer is relu(relu((1 + eps) x + sum neighbours))
    return {"l.w1": np.eye(h), "l.b1": np.zeros((1, h)), "l.w2": np.eye(h),
            "l.b2": np.zeros((1, h)), "l.eps": np.array([[0.5]])}


def test_gin_layer_hand_case():
    # path 0-1-2 with scalar features 1, 2, 3 and eps = 0.5
    b = batch([Graph(3, [[0, 1], [1, 2]], np.array([[1.0], [2.0], [3.0]]))])
    t = Tape()
    p = {k: t.leaf(v) for k, v in _identity_gin(1).items()}
    out = gin_layer(t.constant(b.features), b, p, "l.")
    np.testing.assert_allclose(out.value.ravel(), [1.5 + 2, 3 + 1 + 3, 4.5 + 2])


def test_gin_layer_negative_inputs_clipped():
    b = batch([Graph(2, [[0, 1]], np.array([[-5.0], [1.0]]))])
    t = Tape()
    p = {k: t.leaf(v) for k, v in _identity_gin(1).items()}
    out = gin_layer(t.constant(b.features), b, p, "l.")
    # node 0: 1.5*(-5) + 1 < 0 -> 0 ; node 1: 1.5 - 5 < 0 -> 0
    np.testing.assert_array_equal(out.value.ravel(), [0.0, 0.0])


def test_gcn_layer_hand_case():
    # path 0-1-2, deg~ = 2, 3, 2, W = I
    x = np.array([[1.0], [2.0], [3.0]])
    b = batch([Graph(3, [[0, 1], [1, 2]], x)])
    t = Tape()
    p = {"l.w": t.leaf(np.eye(1)), "l.b": t.leaf(np.zeros((1, 1)))}
    out = gcn_layer(t.constant(x), b, p, "l.").value.ravel()
    s6 = np.sqrt(6)
    want = [1 / 2 + 2 / s6, 1 / s6 + 2 / 3 + 3 / s6, 2 / s6 + 3 / 2]
    np.testing.assert_allclose(out, want, rtol=1e-14)


def test_isolated_node_gin_only_sees_itself():
    b = batch([Graph(1, [], np.array([[2.0]]))])
    t = Tape()
    p = {k: t.leaf(v) for k, v in _identity_gin(1).items()}
    np.testing.assert_allclose(gin_layer(t.constant(b.features), b, p, "l.").value, [[3.0]])


def test_param_shapes_and_init():
    dims = Dims(7, 32, 16, 3, "gin")
    shapes = param_shapes(dims)
    assert shapes["encoder.0.w1"] == (7, 32) and shapes["encoder.2.w1"] == (32, 32)
    assert shapes["decoder.w2"] == (32, 7) and shapes["mask_token"] == (1, 7)
    p = init_params(dims, seed=0)
    assert np.all(p["mask_token"] == 0) and np.all(p["encoder.1.eps"] == 0)
    bound = np.sqrt(6 / (7 + 32))
    assert np.abs(p["encoder.0.w1"]).max() <= bound
    np.testing.assert_array_equal(init_params(dims, 0)["projection.w1"], p["projection.w1"])
    assert "encoder.0.w" in param_shapes(Dims(7, backbone="gcn"))


def test_model_params_validation():
    dims = Dims(3, 4, 4, 1)
    arrays = init_params(dims).arrays
    bad = dict(arrays, **{"decoder.b2": np.zeros((1, 4))})
    with pytest.raises(ShapeError):
        ModelParams(dims, bad)
    with pytest.raises(ShapeError):
        ModelParams(dims, {k: v for k, v in arrays.items() if k != "mask_token"})
    with pytest.raises(ValueError):
        Dims(3, backbone="gat")


def test_encode_rejects_wrong_width():
    params = init_params(Dims(3, 4, 4, 1))
    t = Tape()
    with pytest.raises(ShapeError):
        encode(batch([Graph(2, [[0, 1]], np.zeros((2, 5)))]), params.bind(t), params.dims)


def test_project_and_decode_shapes(rng):
    params = init_params(Dims(3, 8, 5, 2))
    graphs = [random_graph(rng, 2, 6, d=3) for _ in range(3)]
    b = batch(graphs)
    t = Tape()
    p = params.bind(t)
    emb = project(encode(b, p, params.dims), b, p)
    assert emb.node_z.shape == (b.num_nodes, 5) and emb.graph_z.shape == (3, 5)
    assert decode(emb.node_z, p).shape == (b.num_nodes, 3)
    # pooled projection equals the summed node rows
    np.testing.assert_allclose(emb.graph_z.value[0], emb.node_z.value[: graphs[0].num_nodes].sum(0))
    assert graph_embeddings(params, b, "projection").shape == (3, 5)
    assert graph_embeddings(params, b).shape == (3, 8)


def test_projection_pooling_examples(rng):
    params = init_params(Dims(3, 6, 4, 1), 2)
    one = Graph(1, [], rng.normal(size=(1, 3)))
    g = random_graph(rng, 3, 7, d=3)
    b = batch([one, g, g])
    t = Tape()
    p = params.bind(t)
    emb = project(encode(b, p, params.dims), b, p)
    np.testing.assert_array_equal(emb.graph_z.value[0], emb.node_z.value[0])
    np.testing.assert_array_equal(emb.graph_z.value[1], emb.graph_z.value[2])
    brute = [emb.node_z.value[b.segments == i].sum(0) for i in range(3)]
    np.testing.assert_allclose(emb.graph_z.value, brute, atol=1e-12)


def test_single_layer_encode_is_the_layer(rng):
    params = init_params(Dims(3, 5, 4, 1), 0)
    b = batch([random_graph(rng, 3, 6, d=3)])
    t = Tape()
    p = params.bind(t)
    direct = gin_layer(t.constant(b.features), b, p, "encoder.0.").value
    np.testing.assert_array_equal(encode(b, p, params.dims).value, direct)
