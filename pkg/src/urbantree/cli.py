"""Command-line entry point.

    urbantree dataset build --inventory inv.csv [--mock-tiles] --out DIR
    urbantree train --data DIR [--config cfg.toml] [--seed N] --out DIR
    urbantree eval  --checkpoint DIR/checkpoint.bin --data DIR --out DIR
    urbantree cv    --data DIR --out DIR
    urbantree sweep --data DIR --grid blocks=1,2 optimizer=sgd,adamax --out DIR
    urbantree report TABLE.csv [TABLE.csv ...] --out DIR

Exit status: 0 on success, 2 on usage errors, 3 when a live tile fetch has
no ``MAPS_API_KEY``, 1 on any other failure. Failures print a single
``error: <Type>: <message>`` line on stderr.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import config as C
from .checkpoint import Checkpoint
from .data.dataset import Dataset, build_dataset, load_split
from .data.inventory import parse_inventory, select_top_species
from .data.splits import DatasetManifest
from .data.synthetic import MockTileClient
from .data.tiles import API_KEY_ENV, MissingAPIKeyError, UrllibClient
from .metrics import RESULT_COLUMNS
from .model import compute_class_weights
from .training import (
    cross_validate,
    evaluate,
    model_label,
    read_results_csv,
    sweep,
    train,
    write_results_csv,
)

EXIT_USAGE = 2
EXIT_NO_API_KEY = 3


def _common(p):
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--set", dest="assign", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config value; repeatable")
    p.add_argument("--out", required=True, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="urbantree", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("dataset", help="dataset generation")
    ds_sub = ds.add_subparsers(dest="action", required=True)
    b = ds_sub.add_parser("build", help="clean inventory, fetch tiles, split, write manifest")
    b.add_argument("--inventory", required=True, help="inventory CSV")
    b.add_argument("--k", type=int, help="number of most frequent species to keep")
    b.add_argument("--mock-tiles", action="store_true", help="serve synthetic tiles offline")
    b.add_argument("--oversample", nargs="?", const="max", default=None,
                   help="write augmented training copies up to a per-class target (default: largest class)")
    _common(b)

    t = sub.add_parser("train", help="train one model")
    t.add_argument("--data", required=True, help="dataset directory (with manifest.jsonl)")
    t.add_argument("--epochs", type=int, help="max epochs (overrides config)")
    _common(t)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", default="test", choices=("train", "validate", "test"))
    e.add_argument("--class-weighting", choices=("none", "balanced"), default="none")
    _common(e)

    cv = sub.add_parser("cv", help="stratified k-fold cross-validation")
    cv.add_argument("--data", required=True)
    cv.add_argument("--k", type=int)
    cv.add_argument("--epochs", type=int)
    _common(cv)

    s = sub.add_parser("sweep", help="train/evaluate a parameter grid")
    s.add_argument("--data", required=True)
    s.add_argument("--grid", nargs="+", default=[], metavar="KEY=V1,V2",
                   help="grid axes, e.g. blocks=1,2 optimizer=sgd,adamax")
    s.add_argument("--cv-top", type=int, help="cross-validate the N most accurate rows")
    s.add_argument("--epochs", type=int)
    _common(s)

    r = sub.add_parser("report", help="merge results tables into one summary")
    r.add_argument("tables", nargs="+")
    r.add_argument("--out", required=True)
    return parser


def _resolve(args):
    overrides = [C.parse_assignment(a) for a in args.assign]
    if getattr(args, "seed", None) is not None:
        overrides.append({"seed": args.seed})
    if getattr(args, "epochs", None) is not None:
        overrides.append({"train": {"max_epochs": args.epochs}})
    return C.load_config(args.config, overrides)


def _write_config(out, cfg):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.toml"), "w", encoding="utf-8") as fh:
        fh.write(C.dump_config(cfg))


def _load_data(root):
    manifest = DatasetManifest.load(os.path.join(root, "manifest.jsonl"))
    return manifest, {s: load_split(manifest, root, s) for s in ("train", "validate", "test")}


def _all_originals(manifest, root):
    # augmented copies are excluded so no test fold holds a variant of a training image
    parts = [load_split(DatasetManifest([e for e in manifest.entries if e.status == "complete"],
                                        manifest.split_ratios, manifest.seed, manifest.species), root, s)
             for s in ("train", "validate", "test")]
    return Dataset(np.concatenate([p.images for p in parts]),
                   np.concatenate([p.labels for p in parts]), parts[0].class_names)


def cmd_dataset(args):
    cfg = _resolve(args)
    d = cfg["dataset"]
    if args.k is not None:
        d["k"] = args.k
    if args.oversample is not None:
        d["oversample"] = args.oversample
    d["inventory"] = os.path.abspath(args.inventory)
    d["mock_tiles"] = bool(args.mock_tiles)
    with open(args.inventory, "rb") as fh:
        inventory = fh.read()

    if args.mock_tiles:
        records, _ = parse_inventory(inventory, d["columns"])
        kept, species = select_top_species(records, int(d["k"]))
        client, api_key = MockTileClient(kept, species), "mock"
    else:
        api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise MissingAPIKeyError(f"environment variable {API_KEY_ENV} is not set")
        client = UrllibClient()

    target = d["oversample"]
    if target not in ("", "max"):
        target = int(target)
    manifest, rejections = build_dataset(
        inventory, args.out, client, k=int(d["k"]), ratios=tuple(d["ratios"]), seed=int(cfg["seed"]),
        tile_config=C.tile_config(cfg), columns=d["columns"], parallelism=int(d["parallelism"]),
        rate_limit=float(d["rate_limit"]) or None, max_retries=int(d["max_retries"]), api_key=api_key,
        oversample_target=target or None, augment_params=C.augment_params(cfg),
        crop_bottom_px=int(d["crop_bottom_px"]),
    )
    with open(os.path.join(args.out, "rejections.jsonl"), "w", encoding="utf-8") as fh:
        for rej in rejections:
            fh.write(json.dumps({"row": rej.row, "id": rej.id, "reason": rej.reason}) + "\n")
    _write_config(args.out, cfg)
    counts = manifest.species_counts()
    print(json.dumps({"records": len(manifest.entries), "rejected": len(rejections), "splits": counts}))


def cmd_train(args):
    cfg = _resolve(args)
    _, data = _load_data(args.data)
    tr = data["train"]
    tcfg = C.train_config(cfg, tr.images.shape[1:], len(tr.class_names))
    _write_config(args.out, cfg)
    ckpt, history = train(tcfg, tr, data["validate"], out_dir=args.out)
    print(json.dumps({"best_epoch": history.best_epoch, "best_val_loss": history.best_val_loss}))


def cmd_eval(args):
    cfg = _resolve(args)
    ckpt = Checkpoint.load(args.checkpoint)
    manifest = DatasetManifest.load(os.path.join(args.data, "manifest.jsonl"))
    test = load_split(manifest, args.data, args.split)
    weights = None
    if args.class_weighting == "balanced":
        train_set = load_split(manifest, args.data, "train")
        weights = compute_class_weights(train_set.class_counts()).astype(np.float32)
    report = evaluate(ckpt, test, weights)
    cfg["eval"] = {"checkpoint": os.path.abspath(args.checkpoint), "split": args.split,
                   "class_weighting": args.class_weighting}
    _write_config(args.out, cfg)
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    write_results_csv(os.path.join(args.out, "results.csv"), [(_ckpt_label(ckpt), report)])
    print(json.dumps(report.row(_ckpt_label(ckpt))))


def _ckpt_label(ckpt):
    spec = ckpt.spec
    return f"x{spec.n_blocks} Conv block ({spec.initializer})"


def cmd_cv(args):
    cfg = _resolve(args)
    if args.k is not None:
        cfg["cv"]["k"] = args.k
    manifest, _ = _load_data(args.data)
    data = _all_originals(manifest, args.data)
    tcfg = C.train_config(cfg, data.images.shape[1:], len(data.class_names))
    _write_config(args.out, cfg)
    result = cross_validate(tcfg, data, int(cfg["cv"]["k"]), float(cfg["cv"]["val_fraction"]))
    label = model_label(tcfg)
    rows = [(f"{label} fold {i + 1}", r) for i, r in enumerate(result.folds)]
    rows.append((f"{label} {len(result.folds)}-fold Cross Val", result.aggregate))
    write_results_csv(os.path.join(args.out, "cv.csv"), rows)
    print(json.dumps(result.aggregate.row(rows[-1][0])))


def _parse_grid(items, cfg_grid):
    grid = {k: (v if isinstance(v, list) else [v]) for k, v in cfg_grid.items()}
    for item in items:
        for key, val in C.parse_assignment(item).items():
            grid[key] = val if isinstance(val, list) else [val]
    return grid


def cmd_sweep(args):
    cfg = _resolve(args)
    grid = _parse_grid(args.grid, cfg["sweep"]["grid"])
    cfg["sweep"]["grid"] = grid
    if args.cv_top is not None:
        cfg["sweep"]["cv_top"] = args.cv_top
    manifest, data = _load_data(args.data)
    tr = data["train"]
    base = C.train_config(cfg, tr.images.shape[1:], len(tr.class_names))
    _write_config(args.out, cfg)

    rows = sweep(grid, base, tr, data["validate"], data["test"])
    write_results_csv(os.path.join(args.out, "results.csv"), [(r.label, r.report) for r in rows])
    with open(os.path.join(args.out, "runs.jsonl"), "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps({"model": r.label, "overrides": r.overrides,
                                 "report": r.report.to_dict() if r.ok else None,
                                 "error": r.error}) + "\n")

    top = int(cfg["sweep"]["cv_top"])
    if top > 0:
        everything = _all_originals(manifest, args.data)
        cv_rows = []
        for r in [r for r in rows if r.ok][:top]:
            result = cross_validate(r.config, everything, int(cfg["cv"]["k"]), float(cfg["cv"]["val_fraction"]))
            cv_rows.append((f"{r.label} {len(result.folds)}-fold Cross Val", result.aggregate))
        write_results_csv(os.path.join(args.out, "cv_top.csv"), cv_rows)
    print(json.dumps({"rows": len(rows), "failed": sum(not r.ok for r in rows)}))


def cmd_report(args):
    merged = []
    for path in args.tables:
        merged.extend(read_results_csv(path))

    def key(row):
        try:
            return -float(row["accuracy_pct"])
        except ValueError:
            return float("inf")

    merged.sort(key=key)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "summary.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        w.writeheader()
        w.writerows(merged)
    headers = ["Model", "Loss", "Accu (%)", "Ave Class Recall (%)", "Ave Class Precision (%)", "No Epochs"]
    lines = ["| " + " | ".join(headers) + " |", "|" + "---|" * len(headers)]
    for row in merged:
        lines.append("| " + " | ".join(row[c] for c in RESULT_COLUMNS) + " |")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(args.out, "summary.md"), "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(os.path.join(args.out, "config.toml"), "w", encoding="utf-8") as fh:
        fh.write(C.dump_config({"report": {"tables": [os.path.abspath(p) for p in args.tables]}}))
    print(text, end="")


COMMANDS = {
    "dataset": cmd_dataset,
    "train": cmd_train,
    "eval": cmd_eval,
    "cv": cmd_cv,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except MissingAPIKeyError as exc:
        print(f"error: MissingAPIKeyError: {exc}", file=sys.stderr)
        return EXIT_NO_API_KEY
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
