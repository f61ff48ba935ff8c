"""
Inventory to results table, offline
===================================

A synthetic inventory goes through cleaning, species selection, tile
fetching from a mock server, stratified splitting, training and evaluation.
The real tile service is swapped for ``MockTileClient``, so no API key or
network is needed.
"""

import tempfile

from urbantree.data.dataset import build_dataset, load_split
from urbantree.data.inventory import parse_inventory, select_top_species
from urbantree.data.synthetic import CAMDEN_TOP6, MockTileClient, make_inventory_csv
from urbantree.data.tiles import TileConfig, ground_resolution
from urbantree.model import ModelSpec
from urbantree.training import TrainConfig, evaluate, model_label, train

counts = dict(zip(CAMDEN_TOP6, [40, 34, 30, 26, 22, 18]))
counts["Horse Chestnut"] = 8
text, planted = make_inventory_csv(counts, n_missing_location=4, n_vacant=3, n_unknown=2, seed=1)

records, rejected = parse_inventory(text)
kept, species = select_top_species(records, 6)
print(f"{len(records)} clean rows, {len(rejected)} rejected, top species: {species}")
print(f"a 200 px tile at zoom 20 covers {200 * ground_resolution(51.54, 20):.1f} m")

# %%
# Fetch and split. Tiles are 24x24 here to keep training quick.
out = tempfile.mkdtemp(prefix="urbantree-")
client = MockTileClient(kept, species)
manifest, _ = build_dataset(text, out, client, k=6, seed=1, tile_config=TileConfig(size=(24, 24)),
                            api_key="mock")
print(f"{len(client.requests)} tiles fetched into {out}")
for split, per_species in manifest.species_counts().items():
    print(f"  {split:9s} {sum(per_species.values()):4d}")

again = MockTileClient(kept, species)
build_dataset(text, out, again, k=6, seed=1, tile_config=TileConfig(size=(24, 24)), api_key="mock")
print(f"second build requested {len(again.requests)} tiles")

# %%
# Train, keep the epoch with the lowest validation loss, and score the test split.
train_set, val_set, test_set = (load_split(manifest, out, s) for s in ("train", "validate", "test"))
cfg = TrainConfig(ModelSpec(n_blocks=2, input_shape=(24, 24, 3), filters_per_block=[8, 16], fc_width=32,
                            initializer="he_normal"),
                  optimizer="adamax", max_epochs=10, seed=1)
ckpt, history = train(cfg, train_set, val_set)
report = evaluate(ckpt, test_set)
print(f"best epoch {history.best_epoch}, val loss {history.best_val_loss:.4f}")
print(report.row(model_label(cfg)))
