import json

import numpy as np
import pytest

from conftest import toy_dataset
from localgcl.errors import ConfigError, CorruptCheckpointError, DivergedError, UnsupportedVersionError
from localgcl.model import Dims, init_params
from localgcl.objective import LambdaSchedule
from localgcl.trainer import (
    CHECKPOINT_FILE,
    METRICS_FILE,
    TrainConfig,
    batch_loss,
    epoch_batches,
    load_checkpoint,
    make_views,
    save_checkpoint,
    train,
)

SMALL = dict(hidden_dim=8, proj_dim=6, layers=2, batch_size=8)


def small_cfg(**kw):
    return TrainConfig(**{**SMALL, "epochs": 3, **kw})


def test_lambda_zero_leaves_decoder_and_token_untouched():
    ds = toy_dataset(8)
    cfg = small_cfg()
    params = init_params(Dims(3, 8, 6, 2), 0)
    graphs = list(ds.graphs)
    views, masked = make_views(graphs, range(8), cfg, 0)
    res = batch_loss(params, graphs, views, masked, 0.0, cfg)
    for name, g in res.grads.items():
        if name.startswith("decoder.") or name == "mask_token":
            assert np.all(g == 0), name
    assert any(np.any(g != 0) for n, g in res.grads.items() if n.startswith("encoder."))
    assert res.l_total == res.l_cl


def test_lambda_one_leaves_projection_head_alone_in_cl_terms():
    ds = toy_dataset(8)
    cfg = small_cfg()
    params = init_params(Dims(3, 8, 6, 2), 0)
    graphs = list(ds.graphs)
    views, masked = make_views(graphs, range(8), cfg, 0)
    res = batch_loss(params, graphs, views, masked, 1.0, cfg)
    assert res.l_total == res.l_mm
    assert np.any(res.grads["decoder.w2"] != 0)


def test_epoch_batches_cover_everything_once():
    for n, bs in [(188, 32), (33, 32), (10, 3), (5, 8)]:
        chunks = epoch_batches(n, bs, seed=1, epoch=2)
        flat = np.concatenate(chunks)
        assert sorted(flat.tolist()) == list(range(n))
        assert all(len(c) >= 2 for c in chunks)
    assert [len(c) for c in epoch_batches(33, 32, 0, 0)] == [33]
    a = epoch_batches(50, 8, 0, 0)
    assert all(np.array_equal(x, y) for x, y in zip(a, epoch_batches(50, 8, 0, 0)))
    assert not np.array_equal(np.concatenate(a), np.concatenate(epoch_batches(50, 8, 0, 1)))


def test_training_is_deterministic(tmp_path):
    ds = toy_dataset(20)
    p1, r1 = train(small_cfg(output_dir=str(tmp_path / "a")), ds)
    p2, r2 = train(small_cfg(output_dir=str(tmp_path / "b")), ds)
    for name in (METRICS_FILE, CHECKPOINT_FILE):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    p3, _ = train(small_cfg(seed=1), ds)
    assert not np.array_equal(p1["encoder.0.w1"], p3["encoder.0.w1"])


def test_metrics_log_contents(tmp_path):
    ds = toy_dataset(20)
    cfg = small_cfg(epochs=4, output_dir=str(tmp_path))
    _, records = train(cfg, ds)
    lines = (tmp_path / METRICS_FILE).read_text().splitlines()
    assert len(lines) == 4
    rows = [json.loads(s) for s in lines]
    assert [r["epoch"] for r in rows] == [0, 1, 2, 3]
    assert rows[0]["lambda"] == pytest.approx(0.1) and rows[-1]["lambda"] == pytest.approx(0.9)
    for r in rows:
        assert r["l_total"] == pytest.approx((1 - r["lambda"]) * r["l_cl"] + r["lambda"] * r["l_mm"], abs=1e-9)
    assert all(rec.wall_ms > 0 for rec in records)


def test_reconstruction_loss_decreases():
    ds = toy_dataset(24)
    _, records = train(small_cfg(epochs=30, schedule=LambdaSchedule.static(1.0), lr=0.01), ds)
    first = np.mean([r.l_mm for r in records[:3]])
    last = np.mean([r.l_mm for r in records[-3:]])
    assert last < 0.5 * first


def test_contrastive_loss_decreases():
    ds = toy_dataset(24)
    _, records = train(small_cfg(epochs=30, schedule=LambdaSchedule.static(0.0), lr=0.01), ds)
    assert np.mean([r.l_cl for r in records[-3:]]) < np.mean([r.l_cl for r in records[:3]])


def test_divergence_is_reported():
    ds = toy_dataset(12)
    # features near the float limit overflow the squared reconstruction error
    huge = type(ds)(ds.name, tuple(g.with_features(g.features * 1e200) for g in ds), 2, ds.feature_dim)
    with pytest.raises(DivergedError) as info, np.errstate(all="ignore"):
        train(small_cfg(epochs=2, schedule=LambdaSchedule.static(1.0)), huge)
    assert info.value.epoch == 0


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=1).validate()
    with pytest.raises(ConfigError):
        TrainConfig(augmentations=("rotate",)).validate()
    with pytest.raises(ConfigError):
        TrainConfig(mask_rate=0.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(backbone="gat").validate()
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0).validate()


def test_featureless_dataset_needs_degree_features():
    ds = toy_dataset(6)
    bare = type(ds)(ds.name, tuple(g.with_features(np.zeros((g.num_nodes, 0))) for g in ds), 2, 0)
    with pytest.raises(ConfigError):
        train(small_cfg(epochs=1), bare)
    params, _ = train(small_cfg(epochs=1, degree_features=True, max_degree=4), bare)
    assert params.dims.in_dim == 5


def test_checkpoint_round_trip_is_bit_exact(tmp_path, rng):
    params = init_params(Dims(5, 7, 3, 2, "gcn"), 3)
    params.arrays = {k: v + rng.normal(size=v.shape) * 1e-3 for k, v in params.arrays.items()}
    path = tmp_path / "c.txt"
    save_checkpoint(params, path)
    back = load_checkpoint(path, expected=params.dims)
    assert back.dims == params.dims
    for k in params.arrays:
        assert np.array_equal(back[k], params[k])
    save_checkpoint(back, tmp_path / "d.txt")
    assert path.read_bytes() == (tmp_path / "d.txt").read_bytes()


def test_checkpoint_corruption(tmp_path):
    params = init_params(Dims(3, 4, 4, 1))
    path = tmp_path / "c.txt"
    save_checkpoint(params, path)
    text = path.read_text()
    lines = text.splitlines()

    (tmp_path / "trunc.txt").write_text("\n".join(lines[: len(lines) // 2]) + "\n")
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(tmp_path / "trunc.txt")

    (tmp_path / "v.txt").write_text(text.replace("checkpoint 1", "checkpoint 9"))
    with pytest.raises(UnsupportedVersionError):
        load_checkpoint(tmp_path / "v.txt")

    bad = lines.copy()
    bad[3] = "zz"
    (tmp_path / "bad.txt").write_text("\n".join(bad) + "\n")
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(tmp_path / "bad.txt")

    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path, expected=Dims(3, 4, 4, 2))
