"""Graph self-supervised learning with a shared GNN encoder trained on a
contrastive objective and a masked node-feature reconstruction objective."""

__version__ = "0.1.0"
