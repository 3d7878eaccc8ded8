"""Flat ``section.key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Unknown keys are errors. Every key
has a default, so an empty file is a valid configuration.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Mapping

from .errors import ConfigError
from .objective import LambdaSchedule
from .trainer import TrainConfig


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _kinds(text: str) -> tuple[str, ...]:
    return tuple(k.strip() for k in text.split(",") if k.strip())


def _opt_str(text: str) -> str | None:
    return text or None


# key -> (TrainConfig field, parser)
KEYS: dict[str, tuple[str, Callable]] = {
    "data.root": ("data_root", _opt_str),
    "data.name": ("dataset", str),
    "data.degree_features": ("degree_features", _bool),
    "data.max_degree": ("max_degree", int),
    "model.backbone": ("backbone", str),
    "model.hidden_dim": ("hidden_dim", int),
    "model.proj_dim": ("proj_dim", int),
    "model.layers": ("layers", int),
    "augment.kinds": ("augmentations", _kinds),
    "augment.node_dropout": ("node_dropout", float),
    "augment.edge_perturbation": ("edge_perturbation", float),
    "augment.attribute_masking": ("attribute_masking", float),
    "augment.subgraph": ("subgraph", float),
    "mask.rate": ("mask_rate", float),
    "tau": ("tau", float),
    "ntxent.literal_denominator": ("literal_denominator", _bool),
    "recon.masked_only": ("masked_only", _bool),
    "epochs": ("epochs", int),
    "batch_size": ("batch_size", int),
    "lr": ("lr", float),
    "adam.beta1": ("beta1", float),
    "adam.beta2": ("beta2", float),
    "adam.eps": ("adam_eps", float),
    "seed": ("seed", int),
    "output_dir": ("output_dir", _opt_str),
}
LAMBDA_KEYS = ("lambda.kind", "lambda.start", "lambda.end", "lambda.static")
ALL_KEYS = tuple(KEYS) + LAMBDA_KEYS


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in ALL_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in ALL_KEYS:
            raise ConfigError(f"unknown key {key!r} in --set")
        out[key] = value
    return out


def _schedule(raw: Mapping[str, str]) -> LambdaSchedule:
    kind = raw.get("lambda.kind", "incremental").strip().lower()
    try:
        if kind == "static":
            return LambdaSchedule.static(float(raw.get("lambda.static", "0.5")))
        if kind == "incremental":
            return LambdaSchedule.incremental(float(raw.get("lambda.start", "0.1")),
                                              float(raw.get("lambda.end", "0.9")))
        if kind == "decremental":
            return LambdaSchedule.decremental(float(raw.get("lambda.start", "0.9")),
                                              float(raw.get("lambda.end", "0.1")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"lambda.kind must be static, incremental or decremental, got {kind!r}")


def build_config(raw: Mapping[str, str]) -> TrainConfig:
    """Turn a raw key -> string mapping into a validated :class:`TrainConfig`."""
    kwargs = {}
    for key, value in raw.items():
        if key in LAMBDA_KEYS:
            continue
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        name, parse = KEYS[key]
        try:
            kwargs[name] = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    cfg = TrainConfig(schedule=_schedule(raw), **kwargs)
    cfg.validate()
    return cfg


def load_config(path=None, overrides: Mapping[str, str] | None = None) -> TrainConfig:
    raw: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        raw = parse_config_text(p.read_text(), str(p))
    raw.update(overrides or {})
    return build_config(raw)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(v)
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def config_to_mapping(cfg: TrainConfig) -> dict[str, str]:
    """Every key with its resolved value (defaults included), in :data:`ALL_KEYS` order."""
    out = {key: _fmt(getattr(cfg, name)) for key, (name, _) in KEYS.items()}
    s = cfg.schedule
    out["lambda.kind"] = s.kind
    out["lambda.start"] = repr(s.start)
    out["lambda.end"] = repr(s.end)
    out["lambda.static"] = repr(s.start)
    return out


def format_config(cfg: TrainConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config_to_mapping(cfg).items())
