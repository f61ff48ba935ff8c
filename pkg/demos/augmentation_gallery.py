"""
Augmentation draws
==================

Rotation, shifts, flip, zoom and brightness each take one draw from the
generator, in a fixed order. The same seed therefore reproduces the same
image, and the identity setting returns the input bit for bit.
"""

import numpy as np

from urbantree.augment import AugmentParams, augment, oversample_plan
from urbantree.data.synthetic import render_pattern
from urbantree.rng import substream

img = render_pattern(2, 6, (32, 32), substream(0, "img"))
params = AugmentParams()
print(params)

for i in range(4):
    out = augment(img, params, substream(7, "augment", 0, i))
    diff = np.abs(out - img).mean()
    print(f"draw {i}: mean |change| {diff:.3f}, range [{out.min():.2f}, {out.max():.2f}]")

same = augment(img, params, substream(7, "augment", 0, 0))
print("seeded draw repeats:", np.array_equal(same, augment(img, params, substream(7, "augment", 0, 0))))
print("identity is a no-op:", augment(img, AugmentParams.identity(), substream(1)).tobytes() == img.tobytes())

# %%
# Oversampling tops each class up to a common target. Copies are spread
# evenly over the originals, the first ones taking the remainder.
plan = oversample_plan({"Ash": 30, "London Plane": 100, "Silver Birch": 45}, 100)
for species, copies in plan.items():
    print(f"{species:13s} {len(copies):3d} originals, {copies.sum():3d} copies, "
          f"per original {sorted(set(copies.tolist()))}")
