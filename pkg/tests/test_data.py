import shutil

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXTURES, random_graph
from localgcl.data import (
    Graph,
    GraphDataset,
    batch,
    canonical_edges,
    kfold_split,
    load_dataset,
    parse_tudataset,
    synthesize_degree_features,
    unbatch,
    write_tudataset,
)
from localgcl.errors import (
    DimensionMismatchError,
    EmptyBatchError,
    InvalidFoldCountError,
    MalformedDatasetError,
    MissingFileError,
)


@pytest.fixture
def toy_dir(tmp_path):
    d = tmp_path / "TOY"
    shutil.copytree(FIXTURES / "TOY", d)
    return d


def test_toy_fixture_parses_to_expected_graphs():
    ds = parse_tudataset(FIXTURES / "TOY", "TOY")
    assert len(ds) == 3 and ds.num_classes == 2 and ds.feature_dim == 3
    assert ds.graph_label_values == (-1, 1)
    assert ds.node_label_values == (0, 1, 2)
    assert list(ds.labels) == [1, 0, 1]
    tri, pair, path = ds.graphs
    assert tri.edges.tolist() == [[0, 1], [0, 2], [1, 2]]
    assert pair.edges.tolist() == [[0, 1]]
    assert path.edges.tolist() == [[0, 1], [1, 2], [2, 3]]
    assert np.argmax(path.features, axis=1).tolist() == [1, 2, 2, 0]


def test_round_trip_is_exact(tmp_path):
    ds = parse_tudataset(FIXTURES / "TOY", "TOY")
    write_tudataset(ds, tmp_path / "out")
    again = parse_tudataset(tmp_path / "out", "TOY")
    assert again.same_as(ds)
    # and the files themselves are reproduced
    for name in ("A", "graph_indicator", "graph_labels", "node_labels"):
        assert (tmp_path / "out" / f"TOY_{name}.txt").read_text() == (FIXTURES / "TOY" / f"TOY_{name}.txt").read_text()


def test_round_trip_mutag(mutag_root, tmp_path):
    ds = load_dataset(mutag_root, "MUTAG")
    assert len(ds) == 188 and ds.feature_dim == 7 and ds.num_classes == 2
    write_tudataset(ds, tmp_path)
    assert parse_tudataset(tmp_path, "MUTAG").same_as(ds)


@pytest.mark.parametrize("fname, content, line", [
    ("TOY_A.txt", "1, 2\n2, 1\n2, x\n", 3),
    ("TOY_A.txt", "1, 2\n1, 20\n", 2),
    ("TOY_A.txt", "1, 2\n3, 4\n", 2),         # crosses graphs 1 and 2
    ("TOY_A.txt", "1, 2, 3\n", 1),
    ("TOY_graph_indicator.txt", "1\n1\n1\n2\n2\n3\n7\n3\n3\n", 7),
    ("TOY_graph_labels.txt", "1\n-1\n1\n1\n", 4),   # graph 4 has no nodes
    ("TOY_node_labels.txt", "0\n1\n", 2),
])
def test_malformed_fixtures_report_file_and_line(toy_dir, fname, content, line):
    (toy_dir / fname).write_text(content)
    with pytest.raises(MalformedDatasetError) as info:
        parse_tudataset(toy_dir, "TOY")
    assert info.value.file == fname
    assert info.value.line == line
    assert f"{fname}:{line}:" in str(info.value)


def test_missing_required_file(toy_dir):
    (toy_dir / "TOY_graph_indicator.txt").unlink()
    with pytest.raises(MissingFileError):
        parse_tudataset(toy_dir, "TOY")


def test_missing_node_labels_gives_featureless_dataset(toy_dir):
    (toy_dir / "TOY_node_labels.txt").unlink()
    ds = parse_tudataset(toy_dir, "TOY")
    assert ds.feature_dim == 0 and ds.feature_source == "none"
    deg = synthesize_degree_features(ds, max_degree=2)
    assert deg.feature_dim == 3
    # path 0-1-2-3: degrees 1,2,2,1
    assert np.argmax(deg.graphs[2].features, axis=1).tolist() == [1, 2, 2, 1]


def test_self_loops_dropped_with_warning(toy_dir, caplog):
    with open(toy_dir / "TOY_A.txt", "a") as fh:
        fh.write("4, 4\n")
    ds = parse_tudataset(toy_dir, "TOY")
    assert ds.self_loops_dropped == 1
    assert ds.graphs[1].edges.tolist() == [[0, 1]]
    assert "self-loop" in caplog.text


def test_load_dataset_env_fallback(monkeypatch, tmp_path):
    shutil.copytree(FIXTURES / "TOY", tmp_path / "TOY")
    monkeypatch.setenv("LOCALGCL_DATA_DIR", str(tmp_path))
    assert len(load_dataset(None, "TOY")) == 3


def test_graph_validation():
    x = np.zeros((3, 1))
    with pytest.raises(ValueError):
        Graph(3, [[1, 0]], x)
    with pytest.raises(ValueError):
        Graph(3, [[0, 1], [0, 1]], x)
    with pytest.raises(DimensionMismatchError):
        Graph(3, [[0, 1]], np.zeros((2, 1)))
    g = Graph.from_edges(3, [[1, 0], [0, 1], [2, 2], [2, 1]], x)
    assert g.edges.tolist() == [[0, 1], [1, 2]]
    with pytest.raises(ValueError):
        g.edges[0, 0] = 5


def test_canonical_edges_matches_set_semantics(rng):
    raw = rng.integers(0, 6, size=(30, 2))
    want = sorted({(min(a, b), max(a, b)) for a, b in raw.tolist() if a != b})
    assert canonical_edges(raw).tolist() == [list(e) for e in want]


def test_permuted_and_induced(rng):
    g = random_graph(rng, 6, 6)
    perm = rng.permutation(6)
    h = g.permuted(perm)
    np.testing.assert_array_equal(h.adjacency(), g.adjacency()[np.ix_(perm, perm)])
    np.testing.assert_array_equal(h.features, g.features[perm])
    sub = g.induced([4, 1, 2])
    np.testing.assert_array_equal(sub.adjacency(), g.adjacency()[np.ix_([1, 2, 4], [1, 2, 4])])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_batch_unbatch_round_trip(seed, count):
    rng = np.random.default_rng(seed)
    graphs = [random_graph(rng, label=int(rng.integers(2))) for _ in range(count)]
    b = batch(graphs)
    assert b.num_nodes == sum(g.num_nodes for g in graphs)
    assert b.node_offsets[0] == 0 and b.node_offsets[-1] == b.num_nodes
    # no edge leaves its block
    if len(b.edges):
        assert np.all(b.segments[b.edges[:, 0]] == b.segments[b.edges[:, 1]])
    for a, c in zip(graphs, unbatch(b)):
        assert a.same_as(c)


def test_batch_errors():
    with pytest.raises(EmptyBatchError):
        batch([])
    with pytest.raises(DimensionMismatchError):
        batch([Graph(1, [], np.zeros((1, 2))), Graph(1, [], np.zeros((1, 3)))])


def test_gcn_arc_coefficients_path():
    # path 0-1-2: deg~ = 2, 3, 2
    b = batch([Graph(3, [[0, 1], [1, 2]], np.zeros((3, 1)))])
    src, dst, coef = b.gcn_arcs
    got = {(int(s), int(d)): c for s, d, c in zip(src, dst, coef)}
    assert got[(0, 0)] == pytest.approx(1 / 2)
    assert got[(1, 1)] == pytest.approx(1 / 3)
    assert got[(0, 1)] == pytest.approx(1 / np.sqrt(6))
    assert len(got) == 7


@pytest.mark.parametrize("n, k", [(188, 10), (10, 10), (7, 2), (23, 5)])
def test_kfold_partition(n, k):
    split = kfold_split(n, k, seed=3)
    sizes = split.fold_sizes()
    assert sizes.sum() == n and sizes.max() - sizes.min() <= 1
    seen = np.concatenate([te for _, te in split.folds()])
    assert sorted(seen.tolist()) == list(range(n))
    for tr, te in split.folds():
        assert not set(tr) & set(te)
    np.testing.assert_array_equal(split.assignments, kfold_split(n, k, seed=3).assignments)


@pytest.mark.parametrize("n, k", [(5, 1), (5, 6), (5, 0)])
def test_kfold_rejects_bad_k(n, k):
    with pytest.raises(InvalidFoldCountError):
        kfold_split(n, k)


def test_dataset_rejects_mixed_dims():
    with pytest.raises(DimensionMismatchError):
        GraphDataset("x", (Graph(1, [], np.zeros((1, 2))),), 1, 3)
