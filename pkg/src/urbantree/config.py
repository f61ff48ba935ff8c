"""Run configuration: TOML file with one section per module.

Precedence is command-line overrides > config file > defaults. Every run
writes its resolved config next to its outputs.
"""

import copy
import sys

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .augment import AugmentParams
from .data.splits import DEFAULT_RATIOS
from .data.tiles import TileConfig
from .model import ModelSpec
from .optimizers import resolve_hyper
from .training import TrainConfig

DEFAULTS = {
    "seed": 0,
    "dataset": {
        "k": 6,
        "ratios": list(DEFAULT_RATIOS),
        "zoom": 20,
        "size": [200, 200],
        "maptype": "satellite",
        "format": "png",
        "parallelism": 4,
        "rate_limit": 0.0,
        "max_retries": 4,
        "crop_bottom_px": 0,
        "oversample": "",
        "columns": {},
    },
    "model": {
        "n_blocks": 1,
        "kernel_size": 3,
        "filters_per_block": [],
        "fc_width": 128,
        "dropout_rate": 0.0,
        "initializer": "he_uniform",
    },
    "optimizer": {"kind": "sgd"},
    "train": {
        "max_epochs": 100,
        "batch_size": 32,
        "class_weighting": "none",
        "eval_batch_size": 128,
    },
    "augmentation": {"enabled": False, **AugmentParams().to_config()},
    "cv": {"k": 5, "val_fraction": 0.2},
    "sweep": {"grid": {}, "cv_top": 0},
}


def _merge(base, extra):
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            _merge(base[key], val)
        else:
            base[key] = val
    return base


def parse_value(text):
    """Interpret a command-line value as a TOML scalar/array, falling back to a string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        if "," in text:
            return [parse_value(t.strip()) for t in text.split(",")]
        return text


def parse_assignment(text):
    """``"section.key=value"`` -> nested dict."""
    if "=" not in text:
        raise ValueError(f"expected key=value, got {text!r}")
    key, val = text.split("=", 1)
    out = cur = {}
    parts = key.strip().split(".")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = parse_value(val.strip())
    return out


def load_config(path=None, overrides=()):
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        with open(path, "rb") as fh:
            _merge(cfg, tomllib.load(fh))
    for ov in overrides:
        _merge(cfg, ov)
    return cfg


def dump_config(cfg):
    return tomli_w.dumps(_strip_none(cfg))


def _strip_none(d):
    return {k: _strip_none(v) if isinstance(v, dict) else v for k, v in d.items() if v is not None}


def tile_config(cfg):
    d = cfg["dataset"]
    return TileConfig(zoom=int(d["zoom"]), size=tuple(d["size"]), maptype=d["maptype"], format=d["format"])


def augment_params(cfg):
    a = cfg["augmentation"]
    return AugmentParams.from_config(a) if a.get("enabled") else None


def model_spec(cfg, input_shape, n_classes):
    m = dict(cfg["model"])
    m["filters_per_block"] = m.get("filters_per_block") or None
    # the data decides these two
    m.pop("input_shape", None)
    m.pop("n_classes", None)
    return ModelSpec(input_shape=tuple(input_shape), n_classes=int(n_classes), **m)


def train_config(cfg, input_shape, n_classes):
    """Build a :class:`TrainConfig`, filling model input shape/classes from the data.

    Also records the resolved optimizer hyperparameters and model fields back
    into ``cfg`` so the written config is complete.
    """
    spec = model_spec(cfg, input_shape, n_classes)
    opt = dict(cfg["optimizer"])
    kind = opt.pop("kind")
    hyper = resolve_hyper(kind, opt)
    t = cfg["train"]
    cfg["optimizer"] = {"kind": kind, **hyper}
    cfg["model"] = {k: v for k, v in spec.to_dict().items()}
    return TrainConfig(
        model=spec,
        optimizer=kind,
        optimizer_hyper=hyper,
        max_epochs=int(t["max_epochs"]),
        batch_size=int(t["batch_size"]),
        class_weighting=t["class_weighting"],
        seed=int(cfg["seed"]),
        augmentation=augment_params(cfg),
        eval_batch_size=int(t["eval_batch_size"]),
    )
