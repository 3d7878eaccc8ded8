"""Contrastive and reconstruction losses, their weighted sum, and lambda schedules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import DiffArray
from .data import GraphBatch
from .errors import InvalidLambdaError, NeedsNegativesError, ShapeError

NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class ContrastiveConfig:
    tau: float = 0.5
    # False gives the literal sum over j != i in the denominator
    include_positive_in_denominator: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")


def cosine_sim(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"cosine_sim: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < NORM_FLOOR or nb < NORM_FLOOR:
        return 0.0
    return float(a @ b / (na * nb))


def nt_xent(z: DiffArray, z_hat: DiffArray, cfg: ContrastiveConfig = ContrastiveConfig()) -> DiffArray:
    """Sum over anchors ``i`` of ``-log softmax_j(sim(z_i, z_hat_j) / tau)[i]``.

    Anchors come from ``z``, candidates from ``z_hat``; negatives are the other
    rows of the batch. The log-sum-exp subtracts each row's (constant) maximum.
    """
    if z.shape != z_hat.shape:
        raise ShapeError(f"nt_xent: {z.shape} vs {z_hat.shape}")
    n = z.shape[0]
    if n < 2:
        raise NeedsNegativesError("nt_xent needs at least two graphs per batch")
    sim = ad.scale(ad.matmul(ad.row_l2_normalize(z), ad.transpose(ad.row_l2_normalize(z_hat))), 1.0 / cfg.tau)
    eye = np.eye(n)
    keep = np.ones((n, n)) if cfg.include_positive_in_denominator else 1.0 - eye
    s = sim.value
    row_max = np.where(keep > 0, s, -np.inf).max(axis=1, keepdims=True)
    shifted = ad.exp(ad.add(sim, -np.repeat(row_max, n, axis=1)))
    denom = ad.matmul(ad.mul(shifted, keep), np.ones((n, 1)))
    lse = ad.add(ad.log(denom), row_max)
    positives = ad.sum_all(ad.mul(sim, eye))
    return ad.add(ad.sum_all(lse), ad.scale(positives, -1.0))


def recon_mse(x, x_recon: DiffArray, b: GraphBatch, masked_rows=None) -> DiffArray:
    """Sum of per-graph squared Frobenius errors divided by the number of graphs.

    ``masked_rows`` (indices or boolean mask) limits the error to those rows.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != x_recon.shape:
        raise ShapeError(f"recon_mse: target {x.shape} vs reconstruction {x_recon.shape}")
    if x.shape[0] != b.num_nodes:
        raise ShapeError(f"recon_mse: {x.shape[0]} rows for a batch of {b.num_nodes} nodes")
    diff = ad.add(x_recon, -x)
    if masked_rows is not None:
        sel = np.zeros(x.shape[0], dtype=bool)
        sel[np.asarray(masked_rows)] = True
        diff = ad.mul(diff, np.repeat(sel[:, None].astype(np.float64), x.shape[1], axis=1))
    return ad.scale(ad.sum_all(ad.mul(diff, diff)), 1.0 / b.graph_count)


def combined_loss(l_cl, l_mm, lam: float):
    """``(1 - lam) * l_cl + lam * l_mm``; accepts floats or scalar DiffArrays."""
    if not 0.0 <= lam <= 1.0:
        raise InvalidLambdaError(f"lambda must lie in [0, 1], got {lam}")
    if isinstance(l_cl, DiffArray) or isinstance(l_mm, DiffArray):
        return ad.add(ad.scale(l_cl, 1.0 - lam), ad.scale(l_mm, lam))
    return (1.0 - lam) * l_cl + lam * l_mm


SCHEDULE_KINDS = ("static", "incremental", "decremental")


@dataclass(frozen=True)
class LambdaSchedule:
    kind: str = "incremental"
    start: float = 0.1
    end: float = 0.9

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise InvalidLambdaError(f"unknown schedule kind {self.kind!r}")
        for v in (self.start, self.end):
            if not 0.0 <= v <= 1.0:
                raise InvalidLambdaError(f"lambda values must lie in [0, 1], got {v}")
        if self.kind == "static" and self.start != self.end:
            raise InvalidLambdaError("static schedule needs start == end")
        if self.kind == "incremental" and self.start > self.end:
            raise InvalidLambdaError("incremental schedule needs start <= end")
        if self.kind == "decremental" and self.start < self.end:
            raise InvalidLambdaError("decremental schedule needs start >= end")

    @classmethod
    def static(cls, value: float) -> "LambdaSchedule":
        return cls("static", value, value)

    @classmethod
    def incremental(cls, start: float = 0.1, end: float = 0.9) -> "LambdaSchedule":
        return cls("incremental", start, end)

    @classmethod
    def decremental(cls, start: float = 0.9, end: float = 0.1) -> "LambdaSchedule":
        return cls("decremental", start, end)

    def __str__(self):
        if self.kind == "static":
            return f"static({self.start:g})"
        return f"{self.kind}({self.start:g},{self.end:g})"


def lambda_at(schedule: LambdaSchedule, epoch: int, total_epochs: int) -> float:
    """Linear interpolation from ``start`` (first epoch) to ``end`` (last epoch)."""
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    if schedule.kind == "static" or total_epochs == 1:
        return schedule.start
    return schedule.start + (schedule.end - schedule.start) * epoch / (total_epochs - 1)
