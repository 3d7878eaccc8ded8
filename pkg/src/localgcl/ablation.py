"""Lambda ablations: static sweep and dynamic-strategy comparison."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import GraphDataset
from .evaluation import evaluate
from .objective import LambdaSchedule
from .trainer import TrainConfig, prepare_dataset, train

STATIC_GRID = tuple(round(0.1 * i, 1) for i in range(11))


@dataclass(frozen=True)
class RunResult:
    label: str
    schedule: LambdaSchedule
    seed: int
    accuracy: float
    std: float


def run_one(cfg: TrainConfig, schedule: LambdaSchedule, seed: int, dataset: GraphDataset,
            k: int = 10, label: str | None = None) -> RunResult:
    """Train with ``schedule`` and ``seed``, then probe with folds drawn from the same seed."""
    run_cfg = replace(cfg, schedule=schedule, seed=seed, output_dir=None)
    params, _ = train(run_cfg, dataset)
    rep = evaluate(params, dataset, k, seeds=(seed,))[0]
    return RunResult(label or str(schedule), schedule, seed, rep.mean, rep.std)


def _run_star(args):
    return run_one(*args)


def run_grid(cfg: TrainConfig, jobs_spec: list[tuple[str, LambdaSchedule]], seeds,
             dataset: GraphDataset | None = None, k: int = 10, jobs: int = 1) -> list[RunResult]:
    ds = prepare_dataset(cfg, dataset)
    # already featurised; stop train() from re-synthesising
    base = replace(cfg, degree_features=False)
    tasks = [(base, sched, int(s), ds, k, label) for label, sched in jobs_spec for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_star, tasks))
    return [run_one(*t) for t in tasks]


def summarize(results: list[RunResult]) -> list[tuple[str, float, float]]:
    """``(label, mean over seeds, population std over seeds)`` in first-seen label order."""
    labels = list(dict.fromkeys(r.label for r in results))
    out = []
    for lab in labels:
        accs = np.array([r.accuracy for r in results if r.label == lab])
        out.append((lab, float(accs.mean()), float(accs.std())))
    return out


def static_sweep(cfg: TrainConfig, seeds, dataset=None, k: int = 10, jobs: int = 1,
                 grid=STATIC_GRID) -> list[RunResult]:
    spec = [(f"{lam:.1f}", LambdaSchedule.static(lam)) for lam in grid]
    return run_grid(cfg, spec, seeds, dataset, k, jobs)


def dynamic_compare(cfg: TrainConfig, seeds, dataset=None, k: int = 10, jobs: int = 1,
                    best_static: float | None = None,
                    incremental: LambdaSchedule = LambdaSchedule.incremental(),
                    decremental: LambdaSchedule = LambdaSchedule.decremental()) -> list[RunResult]:
    spec = [("incremental", incremental), ("decremental", decremental)]
    if best_static is not None:
        spec.append((f"static-{best_static:.1f}", LambdaSchedule.static(best_static)))
    return run_grid(cfg, spec, seeds, dataset, k, jobs)


def hybrid_beats_pure(summary: list[tuple[str, float, float]], margin: float = 0.005) -> tuple[bool, float, float]:
    """Best interior static lambda vs the better of lambda=0 and lambda=1."""
    means = {lab: m for lab, m, _ in summary}
    pure = max(means["0.0"], means["1.0"])
    interior = max(m for lab, m in means.items() if lab not in ("0.0", "1.0"))
    return interior >= pure - margin, interior, pure


def best_static_lambda(summary: list[tuple[str, float, float]]) -> float:
    lab, _, _ = max(summary, key=lambda row: row[1])
    return float(lab)


def read_static_csv(path) -> list[tuple[str, float, float]]:
    with open(path, newline="") as fh:
        return [(row["lambda"], float(row["mean_acc"]), float(row["std"])) for row in csv.DictReader(fh)]


def write_summary_csv(path, summary, first_column: str) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([first_column, "mean_acc", "std"])
        for lab, mean, std in summary:
            w.writerow([lab, f"{mean:.6f}", f"{std:.6f}"])


def write_per_seed_csv(path, results: list[RunResult], first_column: str) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([first_column, "seed", "accuracy", "fold_std"])
        for r in results:
            w.writerow([r.label, r.seed, f"{r.accuracy:.6f}", f"{r.std:.6f}"])
