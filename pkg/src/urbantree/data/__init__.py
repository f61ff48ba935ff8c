"""Dataset generation: inventory cleaning, tiles, splits, and on-disk datasets."""

from .dataset import Dataset, build_dataset, load_split, species_slug
from .inventory import TreeRecord, canonical_species, parse_inventory, select_top_species
from .splits import (
    DatasetManifest,
    ManifestEntry,
    largest_remainder,
    stratified_kfold,
    stratified_kfold_indices,
    stratified_split,
    stratified_split_indices,
)
from .tiles import (
    HTTPStatusError,
    MissingAPIKeyError,
    TileConfig,
    build_tile_request,
    cache_path,
    fetch_tiles,
    ground_resolution,
)
