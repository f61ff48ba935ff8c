"""Assemble the on-disk image dataset and load splits back as arrays.

Layout under the output root::

    cache/<zoom>/<W>x<H>/<id>_<lat6>_<lon6>.png    tiles exactly as served
    dataset/<split>/<species_slug>/<id>.png         labelled copies
    manifest.jsonl
"""

import os
import re
import shutil
from collections import Counter
from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..augment import AugmentParams, augment, oversample_plan
from ..model import normalize_pixels
from ..rng import substream
from .inventory import parse_inventory, select_top_species
from .splits import DEFAULT_RATIOS, ManifestEntry, stratified_split
from .synthetic import encode_png
from .tiles import TileConfig, fetch_tiles


def species_slug(name):
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


@dataclass
class Dataset:
    images: np.ndarray  # (N, H, W, 3) float32 in [0, 1]
    labels: np.ndarray  # (N,) int64
    class_names: list

    def __len__(self):
        return len(self.labels)

    def subset(self, idx):
        return Dataset(self.images[idx], self.labels[idx], self.class_names)

    def class_counts(self):
        return np.bincount(self.labels, minlength=len(self.class_names))


def build_dataset(inventory, out_dir, client, k=6, ratios=DEFAULT_RATIOS, seed=0,
                  tile_config=None, columns=None, parallelism=4, rate_limit=None,
                  max_retries=4, api_key=None, oversample_target=None, augment_params=None,
                  crop_bottom_px=0, sleep=None):
    """Run the generator end to end and return ``(manifest, rejections)``.

    ``inventory`` is CSV bytes/text. ``oversample_target`` (``"max"`` or a
    count) additionally writes augmented training copies named ``<id>_augN``.
    """
    tile_config = tile_config or TileConfig()
    records, rejections = parse_inventory(inventory, columns)
    records, species = select_top_species(records, k)
    manifest = stratified_split(records, ratios, seed, species)

    kwargs = {} if sleep is None else {"sleep": sleep}
    statuses = fetch_tiles(records, client, os.path.join(out_dir, "cache"), tile_config,
                           parallelism=parallelism, rate_limit=rate_limit, max_retries=max_retries,
                           api_key=api_key, **kwargs)
    by_id = {s.id: s for s in statuses}

    for entry in manifest.entries:
        st = by_id[entry.id]
        if st.status == "failed":
            entry.status = "failed"
            continue
        rel = os.path.join("dataset", entry.split, species_slug(entry.species), f"{entry.id}.png")
        dest = os.path.join(out_dir, rel)
        os.makedirs(os.path.dirname(dest), exist_ok=True)
        if crop_bottom_px:
            img = np.asarray(Image.open(st.path).convert("RGB"))
            Image.fromarray(img[:-crop_bottom_px]).save(dest, format="PNG")
        else:
            shutil.copyfile(st.path, dest)
        entry.path = rel
        entry.status = "complete"

    if oversample_target is not None:
        _oversample(manifest, out_dir, oversample_target, augment_params, seed)

    manifest.save(os.path.join(out_dir, "manifest.jsonl"))
    return manifest, rejections


def _oversample(manifest, out_dir, target, params, seed):
    params = params or AugmentParams()
    train = [e for e in manifest.entries if e.split == "train" and e.status == "complete"]
    counts = Counter(e.species for e in train)
    if target == "max":
        target = max(counts.values())
    plan = oversample_plan(dict(counts), int(target))
    extra = []
    for species, copies in plan.items():
        originals = [e for e in train if e.species == species]
        for entry, n_copies in zip(originals, copies):
            img = normalize_pixels(np.asarray(Image.open(os.path.join(out_dir, entry.path)).convert("RGB")))
            for j in range(1, int(n_copies) + 1):
                aug = augment(img, params, substream(seed, "oversample", entry.id, j))
                rel = entry.path[:-4] + f"_aug{j}.png"
                with open(os.path.join(out_dir, rel), "wb") as fh:
                    fh.write(encode_png(aug))
                extra.append(ManifestEntry(f"{entry.id}_aug{j}", species, "train",
                                           entry.lat, entry.lon, rel, "augmented"))
    manifest.entries.extend(extra)


def load_split(manifest, root, split, class_names=None):
    """Load one split's usable images as a :class:`Dataset`."""
    class_names = list(class_names or manifest.species)
    index = {s: i for i, s in enumerate(class_names)}
    images, labels = [], []
    for e in manifest.entries:
        if e.split != split or e.status not in ("complete", "augmented"):
            continue
        if e.species not in index:
            raise ValueError(f"species {e.species!r} is not among the model's classes")
        img = np.asarray(Image.open(os.path.join(root, e.path)).convert("RGB"))
        images.append(img)
        labels.append(index[e.species])
    if not images:
        raise ValueError(f"split {split!r} has no usable images")
    return Dataset(normalize_pixels(np.stack(images)), np.asarray(labels, dtype=np.int64), class_names)
