"""Tour of the data layer: load MUTAG, batch a few graphs, draw augmented and masked views.

Run from the repository root:  python demos/01_data_and_views.py
"""

import numpy as np

from localgcl.augment import MaskSpec, default_augmentations, feature_mask, sample_augmentation
from localgcl.data import batch, kfold_split, load_dataset

# MUTAG ships under data/MUTAG in TUDataset text format
ds = load_dataset("data", "MUTAG")
print(f"{ds.name}: {len(ds)} graphs, {ds.num_classes} classes, {ds.feature_dim}-dim one-hot atom types")
sizes = np.array([g.num_nodes for g in ds])
print(f"nodes per graph: min {sizes.min()}, mean {sizes.mean():.1f}, max {sizes.max()}")
print("class balance:", np.bincount(ds.labels))

# a batch is one block-diagonal graph; segments say which graph each node came from
b = batch(ds.graphs[:3])
print("\nbatch of 3:", b.num_nodes, "nodes,", len(b.edges), "edges, offsets", b.node_offsets.tolist())

# every augmentation at ratio 0.2, applied to the first molecule
g = ds.graphs[0]
rng = np.random.default_rng(0)
print(f"\noriginal: {g.num_nodes} nodes, {g.num_edges} edges")
for spec in default_augmentations(0.2):
    v = spec.apply(g, rng)
    zero_rows = int((v.features.sum(axis=1) == 0).sum())
    print(f"  {spec.kind.value:<18} -> {v.num_nodes:2d} nodes, {v.num_edges:2d} edges, {zero_rows} zeroed rows")

# training picks one augmentation uniformly per graph and per epoch
kinds = [sample_augmentation(rng).kind.value for _ in range(8)]
print("\nsampled kinds:", kinds)

# feature masking: half the rows (rounded up) get the mask token
token = np.full(ds.feature_dim, -1.0)
masked, idx = feature_mask(g, MaskSpec(0.5), token, rng)
print(f"\nmasked {len(idx)} of {g.num_nodes} nodes:", idx.tolist())

# folds for the linear probe
split = kfold_split(len(ds), 10, seed=0)
print("\n10-fold sizes:", split.fold_sizes().tolist())
