"""Tree inventory parsing, cleaning and species selection."""

import csv
import io
import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass

# Camden tree inventory column names
CAMDEN_COLUMNS = {
    "id": "Identifier",
    "species": "Common Name",
    "latitude": "Latitude",
    "longitude": "Longitude",
    "height": "Height In Metres",
    "spread": "Spread In Metres",
    "dbh": "Diameter In Centimetres At Breast Height",
    "maturity": "Maturity",
}
REQUIRED = ("species", "latitude", "longitude")

VACANT_PATTERN = re.compile(r"\bvacant\b", re.IGNORECASE)
UNKNOWN_SPECIES = {"", "unknown", "not known", "unidentified", "n/a", "na", "none", "-"}


@dataclass(frozen=True)
class TreeRecord:
    id: str
    species: str
    latitude: float
    longitude: float
    height: float = None
    spread: float = None
    dbh: float = None
    maturity: str = None


@dataclass(frozen=True)
class Rejection:
    row: int
    id: str
    reason: str


def canonical_species(name):
    """Trim, collapse internal whitespace and title-case."""
    return " ".join(str(name).split()).title()


def _parse_float(text):
    text = (text or "").strip()
    if not text:
        return None
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(text)
    return value


def parse_inventory(data, columns=None, delimiter=","):
    """Parse delimiter-separated inventory text into clean :class:`TreeRecord` rows.

    ``data`` may be bytes or str. ``columns`` maps field names (``id``,
    ``species``, ``latitude``, ...) to header names and overrides the Camden
    defaults. Returns ``(records, rejections)``; every input row lands in
    exactly one of the two lists.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    colmap = dict(CAMDEN_COLUMNS)
    colmap.update(columns or {})

    reader = csv.DictReader(io.StringIO(data), delimiter=delimiter)
    header = reader.fieldnames or []
    missing = [colmap[f] for f in REQUIRED if colmap[f] not in header]
    if missing:
        raise ValueError(f"inventory is missing required columns: {', '.join(missing)}")

    def cell(row, fieldname):
        col = colmap.get(fieldname)
        return (row.get(col) or "").strip() if col in header else ""

    records, rejections = [], []
    for n, row in enumerate(reader, start=1):
        rid = cell(row, "id") or f"row{n}"
        raw_species = cell(row, "species")

        try:
            lat = _parse_float(cell(row, "latitude"))
            lon = _parse_float(cell(row, "longitude"))
        except ValueError:
            rejections.append(Rejection(n, rid, "malformed location"))
            continue
        if lat is None or lon is None:
            rejections.append(Rejection(n, rid, "missing location"))
            continue
        if not (-90 <= lat <= 90 and -180 <= lon <= 180):
            rejections.append(Rejection(n, rid, "location out of range"))
            continue
        if VACANT_PATTERN.search(raw_species):
            rejections.append(Rejection(n, rid, "vacant plot"))
            continue
        if canonical_species(raw_species).lower() in UNKNOWN_SPECIES:
            rejections.append(Rejection(n, rid, "unknown species"))
            continue

        try:
            extras = {f: _parse_float(cell(row, f)) for f in ("height", "spread", "dbh")}
        except ValueError:
            rejections.append(Rejection(n, rid, "malformed numeric attribute"))
            continue
        records.append(TreeRecord(
            id=rid,
            species=canonical_species(raw_species),
            latitude=lat,
            longitude=lon,
            maturity=cell(row, "maturity") or None,
            **extras,
        ))
    return records, rejections


def rank_species(records):
    """Species ordered by descending frequency, ties by name."""
    counts = Counter(r.species for r in records)
    return sorted(counts, key=lambda s: (-counts[s], s))


def select_top_species(records, k=6):
    """Keep records of the ``k`` most frequent species.

    Returns ``(kept records, ranked species list)``.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    ranked = rank_species(records)
    if len(ranked) < k:
        warnings.warn(f"only {len(ranked)} distinct species available, fewer than k={k}")
    top = ranked[:k]
    keep = set(top)
    return [r for r in records if r.species in keep], top
