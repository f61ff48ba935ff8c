"""Class-proportional train/validate/test splits, stratified k-fold, and the dataset manifest."""

import json
import math
import warnings
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from ..rng import substream

SPLITS = ("train", "validate", "test")
DEFAULT_RATIOS = (0.7, 0.2, 0.1)


def largest_remainder(n, ratios):
    """Apportion ``n`` items over ``ratios`` by the largest-remainder method.

    Ties in the fractional part go to the earlier ratio.
    """
    fr = [Fraction(r).limit_denominator(10 ** 6) for r in ratios]
    if any(f < 0 for f in fr) or sum(fr) != 1:
        raise ValueError(f"ratios must be non-negative and sum to 1, got {tuple(ratios)}")
    quotas = [f * n for f in fr]
    counts = [math.floor(q) for q in quotas]
    order = sorted(range(len(fr)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def _groups(labels):
    groups = defaultdict(list)
    for i, lab in enumerate(labels):
        groups[lab].append(i)
    return dict(sorted(groups.items(), key=lambda kv: str(kv[0])))


def stratified_split_indices(labels, ratios=DEFAULT_RATIOS, seed=0, min_per_class=3):
    """Assign each index a split number, class by class.

    Each class is shuffled with its own substream and cut into
    ``largest_remainder`` sized pieces. Classes with fewer than
    ``min_per_class`` members go entirely to split 0, with a warning.
    """
    assignment = np.zeros(len(labels), dtype=np.int64)
    for lab, idx in _groups(labels).items():
        if len(idx) < min_per_class:
            warnings.warn(f"class {lab!r} has only {len(idx)} records; all assigned to the first split")
            continue
        order = np.asarray(idx)[substream(seed, "split", str(lab)).permutation(len(idx))]
        start = 0
        for part, count in enumerate(largest_remainder(len(idx), ratios)):
            assignment[order[start:start + count]] = part
            start += count
    return assignment


def stratified_kfold_indices(labels, k=5, seed=0):
    """Fold number for each index; per-class fold sizes differ by at most one."""
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    folds = np.zeros(len(labels), dtype=np.int64)
    for lab, idx in _groups(labels).items():
        if len(idx) < k:
            raise ValueError(f"class {lab!r} has {len(idx)} members, fewer than k={k}")
        order = np.asarray(idx)[substream(seed, "kfold", str(lab)).permutation(len(idx))]
        base, rem = divmod(len(idx), k)
        start = 0
        for f in range(k):
            size = base + (1 if f < rem else 0)
            folds[order[start:start + size]] = f
            start += size
    return folds


def stratified_kfold(records, k=5, seed=0, label=lambda r: r.species):
    """Partition ``records`` into ``k`` stratified folds (lists of records)."""
    fold_of = stratified_kfold_indices([label(r) for r in records], k, seed)
    return [[r for r, f in zip(records, fold_of) if f == i] for i in range(k)]


@dataclass
class ManifestEntry:
    id: str
    species: str
    split: str
    lat: float
    lon: float
    path: str = ""
    status: str = "pending"


FIELD_ORDER = ("id", "species", "split", "lat", "lon", "path", "status")


@dataclass
class DatasetManifest:
    entries: list
    split_ratios: tuple = DEFAULT_RATIOS
    seed: int = 0
    species: list = field(default_factory=list)

    def species_counts(self):
        """``{split: {species: count}}``."""
        out = {s: Counter() for s in SPLITS}
        for e in self.entries:
            out[e.split][e.species] += 1
        return {s: dict(c) for s, c in out.items()}

    def by_split(self, split):
        return [e for e in self.entries if e.split == split]

    def dumps(self):
        header = {"ratios": list(self.split_ratios), "seed": self.seed, "species": list(self.species)}
        lines = [json.dumps(header)]
        for e in self.entries:
            d = asdict(e)
            lines.append(json.dumps({k: d[k] for k in FIELD_ORDER}))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = json.loads(lines[0])
        entries = [ManifestEntry(**json.loads(ln)) for ln in lines[1:]]
        return cls(entries, tuple(header["ratios"]), header["seed"], header.get("species", []))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def stratified_split(records, ratios=DEFAULT_RATIOS, seed=0, species=None):
    """Split tree records into a :class:`DatasetManifest` preserving per-species proportions."""
    if len(ratios) != len(SPLITS):
        raise ValueError(f"need {len(SPLITS)} ratios, got {len(ratios)}")
    assignment = stratified_split_indices([r.species for r in records], ratios, seed)
    entries = [
        ManifestEntry(r.id, r.species, SPLITS[a], r.latitude, r.longitude)
        for r, a in zip(records, assignment)
    ]
    if species is None:
        species = sorted({r.species for r in records})
    return DatasetManifest(entries, tuple(ratios), seed, list(species))
