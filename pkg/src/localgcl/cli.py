"""Command line driver: ``localgcl {train,eval,ablate,probe}``.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .ablation import (
    best_static_lambda,
    dynamic_compare,
    hybrid_beats_pure,
    read_static_csv,
    static_sweep,
    summarize,
    write_per_seed_csv,
    write_summary_csv,
)
from .config import build_config, config_to_mapping, load_config, parse_overrides
from .data import GraphDataset, load_dataset, synthesize_degree_features
from .errors import ConfigError, DataError, LocalGCLError, NumericalError
from .evaluation import evaluate, pooled_summary, probe_embedding_shift
from .model import ModelParams
from .trainer import CHECKPOINT_FILE, METRICS_FILE, load_checkpoint, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4
MANIFEST_FILE = "manifest.json"
DEFAULT_EVAL_SEEDS = 5


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--seeds expects comma-separated integers, got {text!r}") from None


def _config_from_args(args):
    overrides = parse_overrides(args.set)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    path = args.config
    if path and str(path).endswith(".json"):
        # re-run from a manifest
        try:
            raw = json.loads(Path(path).read_text())["config"]
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from None
        raw.update(overrides)
        return build_config(raw)
    return load_config(path, overrides)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    outdir = Path(args.outdir or cfg.output_dir or f"runs/{cfg.dataset}-seed{cfg.seed}")
    cfg = replace(cfg, output_dir=str(outdir))
    dataset = load_dataset(cfg.data_root, cfg.dataset)  # fail before touching outdir
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "localgcl",
        "version": __version__,
        "seed": cfg.seed,
        "config": config_to_mapping(cfg),
        "artifacts": {"metrics": METRICS_FILE, "checkpoint": CHECKPOINT_FILE},
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    _write_json(outdir / MANIFEST_FILE, manifest)
    t0 = time.perf_counter()
    params, records = train(cfg, dataset)
    manifest["wall_clock_s"] = round(time.perf_counter() - t0, 3)
    manifest["epoch_wall_ms"] = [round(r.wall_ms, 3) for r in records]
    _write_json(outdir / MANIFEST_FILE, manifest)
    last = records[-1]
    print(f"trained {cfg.dataset}: {len(records)} epochs, final lambda={last.lam:.3f} "
          f"l_cl={last.l_cl:.4f} l_mm={last.l_mm:.4f} -> {outdir}")
    return EXIT_OK


def _dataset_for(params: ModelParams, root, name: str) -> GraphDataset:
    ds = load_dataset(root, name)
    if ds.feature_dim == 0:
        ds = synthesize_degree_features(ds, params.dims.in_dim - 1)
    return ds


def cmd_eval(args) -> int:
    if args.k < 2:
        raise ConfigError("--k must be >= 2")
    if args.seeds:
        seeds = _seeds(args.seeds)
    else:
        base = args.seed or 0
        seeds = [base + i for i in range(DEFAULT_EVAL_SEEDS)]
    params = load_checkpoint(args.checkpoint)
    ds = _dataset_for(params, args.data_root, args.dataset)
    reports = evaluate(params, ds, args.k, seeds, args.representation)
    for r in reports:
        print(f"{r.dataset:<12} seed={r.seed:<3} {100 * r.mean:6.2f}±{100 * r.std:.2f}")
    mean, std = pooled_summary(reports)
    print(f"{ds.name} {100 * mean:.2f}±{100 * std:.2f}")
    out = Path(args.out) if args.out else Path(args.checkpoint).with_name(f"eval_{ds.name}.json")
    _write_json(out, {"dataset": ds.name, "k": args.k, "mean": mean, "std": std,
                      "reports": [r.to_dict() for r in reports]})
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config_from_args(args)
    seeds = _seeds(args.seeds)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.mode == "static-sweep":
        results = static_sweep(cfg, seeds, k=args.k, jobs=args.jobs)
        summary = summarize(results)
        write_summary_csv(outdir / "ablate_static.csv", summary, "lambda")
        write_per_seed_csv(outdir / "ablate_static_seeds.csv", results, "lambda")
        for lab, m, s in summary:
            print(f"lambda={lab}  {100 * m:6.2f}±{100 * s:.2f}")
        ok, interior, pure = hybrid_beats_pure(summary)
        print(f"hybrid-beats-pure: {'PASS' if ok else 'FAIL'} "
              f"(best interior {100 * interior:.2f} vs best pure {100 * pure:.2f})")
    else:
        best = cfg.schedule.start if cfg.schedule.kind == "static" else None
        if args.static_csv:
            best = best_static_lambda(read_static_csv(args.static_csv))
        results = dynamic_compare(cfg, seeds, k=args.k, jobs=args.jobs, best_static=best)
        summary = summarize(results)
        write_summary_csv(outdir / "ablate_dynamic.csv", summary, "strategy")
        write_per_seed_csv(outdir / "ablate_dynamic_seeds.csv", results, "strategy")
        for lab, m, s in summary:
            print(f"{lab:<14} {100 * m:6.2f}±{100 * s:.2f}")
    return EXIT_OK


def cmd_probe(args) -> int:
    rows = {}
    for tag, path in (("cl", args.checkpoint_cl), ("mm", args.checkpoint_mm)):
        params = load_checkpoint(path)
        ds = _dataset_for(params, args.data_root, args.dataset)
        rows[tag] = probe_embedding_shift(params, ds, args.local_fraction, args.global_fraction,
                                          seed=args.seed or 0)
    print(f"{'model':<6}{'local':>10}{'global':>10}")
    for tag, rep in rows.items():
        print(f"{tag:<6}{rep.local_mean:>10.4f}{rep.global_mean:>10.4f}")
    out = Path(args.out) if args.out else Path(f"probe_{args.dataset}.json")
    _write_json(out, {tag: rep.to_dict() for tag, rep in rows.items()})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="localgcl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"localgcl {__version__}")
    parser.add_argument("--seed", type=int, default=None, help="global seed (overrides config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    # --seed is also accepted after the subcommand; SUPPRESS keeps the global value if absent
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="global seed (overrides config)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="self-supervised training", parents=[common])
    p.add_argument("config", nargs="?", help="config file, or a manifest.json to re-run")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--outdir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="k-fold linear probe on frozen embeddings", parents=[common])
    p.add_argument("checkpoint")
    p.add_argument("--dataset", required=True)
    p.add_argument("--data-root", default=None, help="defaults to $LOCALGCL_DATA_DIR, then ./data")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seeds", default=None, help="comma-separated fold seeds (default: five seeds from --seed, else 0-4)")
    p.add_argument("--representation", choices=("encoder", "projection"), default="encoder")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="lambda ablations", parents=[common])
    p.add_argument("config", nargs="?")
    p.add_argument("--mode", choices=("static-sweep", "dynamic-compare"), required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--outdir", default="ablation")
    p.add_argument("--static-csv", help="pick best-static lambda from a previous sweep")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("probe", help="embedding shift under local vs global perturbation", parents=[common])
    p.add_argument("checkpoint_cl")
    p.add_argument("checkpoint_mm")
    p.add_argument("--dataset", required=True)
    p.add_argument("--data-root", default=None)
    p.add_argument("--local-fraction", type=float, default=0.05)
    p.add_argument("--global-fraction", type=float, default=0.3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except LocalGCLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
