"""The autodiff tape against central finite differences.

Every primitive and the two losses are checked on random inputs; the last
block differentiates one full training step (encoder, heads, both losses).

Run from the repository root:  python demos/02_gradient_check.py
"""

import numpy as np

from localgcl import autodiff as ad
from localgcl.autodiff import Tape, gradient_check
from localgcl.data import batch, load_dataset
from localgcl.model import Dims, init_params
from localgcl.objective import ContrastiveConfig, nt_xent, recon_mse
from localgcl.trainer import TrainConfig, batch_loss, make_views

rng = np.random.default_rng(0)


def readout(y):
    # fixed random weights so that each output entry matters differently
    w = np.random.default_rng(1).normal(size=y.shape)
    return ad.sum_all(ad.mul(y, w))


cases = {
    "matmul": (lambda a, b: readout(ad.matmul(a, b)), [rng.normal(size=(3, 4)), rng.normal(size=(4, 2))]),
    "relu": (lambda a: readout(ad.relu(a)), [rng.normal(size=(4, 3)) + 0.2]),
    "exp / log": (lambda a: readout(ad.log(ad.exp(a))), [rng.normal(size=(3, 3))]),
    "row_l2_normalize": (lambda a: readout(ad.row_l2_normalize(a)), [rng.normal(size=(4, 3))]),
    "segment_sum": (lambda a: readout(ad.segment_sum(a, [0, 0, 1, 2, 2], 3)), [rng.normal(size=(5, 2))]),
    "gather_rows": (lambda a: readout(ad.gather_rows(a, [1, 1, 0])), [rng.normal(size=(3, 2))]),
    "nt_xent": (lambda z, zh: nt_xent(z, zh, ContrastiveConfig(0.5)), [rng.normal(size=(4, 6)), rng.normal(size=(4, 6))]),
}
print(f"{'case':<18} max relative error")
for name, (build, values) in cases.items():
    print(f"{name:<18} {max(gradient_check(build, values)):.2e}")

# reconstruction loss on three real molecules
ds = load_dataset("data", "MUTAG")
b = batch(ds.graphs[:3])
x = b.features
err = gradient_check(lambda r: recon_mse(x, r, b), [rng.normal(size=x.shape)])
print(f"{'recon_mse':<18} {err[0]:.2e}")

# one full step: check a handful of parameter entries by hand
cfg = TrainConfig(hidden_dim=8, proj_dim=8, layers=2)
params = init_params(Dims(ds.feature_dim, 8, 8, 2), seed=0)
params.arrays = {k: v + 0.1 * rng.normal(size=v.shape) for k, v in params.arrays.items()}  # off the ReLU kinks
graphs = list(ds.graphs[:4])
views, masked = make_views(graphs, range(4), cfg, epoch=0)
res = batch_loss(params, graphs, views, masked, 0.5, cfg)
h = 1e-5
print("\nfull step, lambda = 0.5")
for name in ("encoder.0.w1", "encoder.1.eps", "projection.w2", "decoder.b2", "mask_token"):
    ix = np.unravel_index(np.argmax(np.abs(res.grads[name])), params[name].shape)
    vals = []
    for sign in (1, -1):
        p = params.copy()
        p.arrays[name][ix] += sign * h
        vals.append(batch_loss(p, graphs, views, masked, 0.5, cfg).l_total)
    numeric = (vals[0] - vals[1]) / (2 * h)
    print(f"  d/d {name}{[int(i) for i in ix]}: tape {res.grads[name][ix]: .6e}  numeric {numeric: .6e}")

# gradients only reach what the loss touches
t = Tape()
a, unused = t.leaf(np.ones((2, 2))), t.leaf(np.ones((2, 2)))
g = t.backward(ad.sum_all(a))
print("\nunused leaf gradient is zero:", bool(np.all(g[unused] == 0)))
