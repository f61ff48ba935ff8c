"""Seeded image augmentation: rotation, shifts, horizontal flip, zoom, brightness."""

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class AugmentParams:
    rotation_max: float = 40.0
    width_shift: float = 0.2
    height_shift: float = 0.2
    hflip_prob: float = 0.5
    zoom_range: tuple = (0.8, 1.2)
    brightness_range: tuple = (0.8, 1.2)

    def __post_init__(self):
        object.__setattr__(self, "zoom_range", tuple(float(z) for z in self.zoom_range))
        object.__setattr__(self, "brightness_range", tuple(float(b) for b in self.brightness_range))
        if self.rotation_max < 0:
            raise ValueError("rotation_max must be non-negative")
        for name in ("width_shift", "height_shift"):
            if not 0 <= getattr(self, name) <= 0.5:
                raise ValueError(f"{name} must be in [0, 0.5]")
        if not 0 <= self.hflip_prob <= 1:
            raise ValueError("hflip_prob must be in [0, 1]")
        for name in ("zoom_range", "brightness_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must be positive (min, max), got {(lo, hi)}")

    @classmethod
    def identity(cls):
        return cls(0.0, 0.0, 0.0, 0.0, (1.0, 1.0), (1.0, 1.0))

    @classmethod
    def from_config(cls, cfg):
        """Build from config keys ``rotation``, ``width_shift``, ``height_shift``,
        ``horizontal_flip``, ``zoom`` and ``brightness``.

        ``horizontal_flip`` may be a bool (probability 0.5 when true) or a
        probability; ``zoom`` may be a scalar ``z`` meaning ``(1 - z, 1 + z)``.
        """
        d = cls()
        flip = cfg.get("horizontal_flip", d.hflip_prob)
        if isinstance(flip, bool):
            flip = 0.5 if flip else 0.0
        zoom = cfg.get("zoom", d.zoom_range)
        if np.isscalar(zoom):
            zoom = (1 - zoom, 1 + zoom)
        return cls(
            rotation_max=float(cfg.get("rotation", d.rotation_max)),
            width_shift=float(cfg.get("width_shift", d.width_shift)),
            height_shift=float(cfg.get("height_shift", d.height_shift)),
            hflip_prob=float(flip),
            zoom_range=tuple(zoom),
            brightness_range=tuple(cfg.get("brightness", d.brightness_range)),
        )

    def to_config(self):
        d = asdict(self)
        return {
            "rotation": d["rotation_max"],
            "width_shift": d["width_shift"],
            "height_shift": d["height_shift"],
            "horizontal_flip": d["hflip_prob"],
            "zoom": list(d["zoom_range"]),
            "brightness": list(d["brightness_range"]),
        }


def augment(image, params, rng):
    """Return a randomly transformed copy of an ``(H, W, C)`` image in [0, 1].

    One value is drawn per transform, always in the same order, so a given
    generator state fully determines the result.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] == 0 or image.shape[1] == 0:
        raise ValueError(f"expected a non-empty (H, W, C) image, got shape {image.shape}")
    H, W = image.shape[:2]

    angle = rng.uniform(-params.rotation_max, params.rotation_max)
    ty = rng.uniform(-params.height_shift, params.height_shift) * H
    tx = rng.uniform(-params.width_shift, params.width_shift) * W
    flip = rng.random() < params.hflip_prob
    zoom = rng.uniform(*params.zoom_range)
    brightness = rng.uniform(*params.brightness_range)

    out = image
    if angle != 0 or tx != 0 or ty != 0 or zoom != 1:
        out = _warp(out, math.radians(angle), ty, tx, zoom)
    if flip:
        out = out[:, ::-1, :]
    if brightness != 1:
        out = out * np.asarray(brightness, dtype=out.dtype)
    return np.clip(out, 0, 1)


def _warp(image, theta, ty, tx, zoom):
    # forward map: scale about centre, rotate, translate. affine_transform
    # wants the inverse (output coordinate -> input coordinate).
    H, W = image.shape[:2]
    centre = np.array([(H - 1) / 2.0, (W - 1) / 2.0])
    c, s = math.cos(theta), math.sin(theta)
    inv_rot = np.array([[c, s], [-s, c]]) / zoom
    offset = centre - inv_rot @ (centre + np.array([ty, tx]))
    matrix = np.eye(3)
    matrix[:2, :2] = inv_rot
    return ndimage.affine_transform(
        image, matrix, offset=np.append(offset, 0.0), order=1, mode="reflect"
    )


def apportion_evenly(total, n):
    """Split ``total`` over ``n`` slots: ``total // n`` each, the remainder to the first slots."""
    base, rem = divmod(int(total), int(n))
    return np.array([base + (1 if i < rem else 0) for i in range(n)], dtype=np.int64)


def oversample_plan(train_counts, target):
    """Augmented copies to make per original so every class reaches ``target``.

    ``train_counts`` maps class -> count. Returns class -> int array of
    length ``count`` whose sum is ``target - count``.
    """
    if not train_counts:
        return {}
    biggest = max(train_counts.values())
    if target < biggest:
        raise ValueError(f"target {target} is below the largest class count {biggest}")
    plan = {}
    for cls, count in train_counts.items():
        if count <= 0:
            raise ValueError(f"class {cls!r} has no originals to augment")
        plan[cls] = apportion_evenly(target - count, count)
    return plan
