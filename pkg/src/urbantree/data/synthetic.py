"""Synthetic stand-ins for the real inventory and tile service.

:class:`MockTileClient` answers tile URLs offline with a class-dependent
texture, so the whole dataset/train/eval workflow can run without network
access or an API key.
"""

import colorsys
import csv
import io
import threading
from urllib.parse import parse_qs, urlparse

import numpy as np
from PIL import Image

from ..rng import substream
from .inventory import CAMDEN_COLUMNS

CAMDEN_TOP6 = ("London Plane", "Common Lime", "Ash", "Sycamore", "Norway Maple", "Silver Birch")


def render_pattern(class_index, n_classes, size, rng, noise=0.08):
    """Float image ``(H, W, 3)`` in [0, 1] with a per-class hue and stripe orientation."""
    H, W = size
    hue = class_index / n_classes
    base = np.array(colorsys.hsv_to_rgb(hue, 0.7, 0.75))
    angle = np.pi * class_index / n_classes
    freq = 2 * np.pi * (2 + class_index % 3) / max(H, W)
    yy, xx = np.mgrid[0:H, 0:W]
    phase = rng.uniform(0, 2 * np.pi)
    stripes = np.sin(freq * (np.cos(angle) * xx + np.sin(angle) * yy) + phase)
    img = base * (0.8 + 0.2 * rng.uniform(0.8, 1.2)) + 0.15 * stripes[..., None]
    img = img + rng.normal(0, noise, size=(H, W, 3))
    return np.clip(img, 0, 1)


def make_pattern_dataset(n_per_class, n_classes=6, size=(16, 16), seed=0):
    """``(images float32 (N, H, W, 3), labels int64 (N,))``, classes interleaved."""
    images, labels = [], []
    for i in range(n_per_class):
        for c in range(n_classes):
            images.append(render_pattern(c, n_classes, size, substream(seed, "pattern", c, i)))
            labels.append(c)
    return np.asarray(images, dtype=np.float32), np.asarray(labels, dtype=np.int64)


def encode_png(image):
    """Float [0, 1] or uint8 image to PNG bytes."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.round(np.clip(arr, 0, 1) * 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data):
    return np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))


class MockTileClient:
    """Offline tile server keyed by request centre.

    ``species`` maps each ``"lat6,lon6"`` centre to a class index. Records
    are rendered with :func:`render_pattern`; unknown centres get a grey tile.
    ``script`` optionally queues exceptions to raise before serving, e.g. an
    HTTP 429 on the first call.
    """

    def __init__(self, records=(), species=(), script=()):
        index = {s: i for i, s in enumerate(species)}
        self.n_classes = max(len(index), 1)
        self.classes = {}
        for r in records:
            self.classes[f"{r.latitude:.6f},{r.longitude:.6f}"] = index.get(r.species)
        self.script = list(script)
        self.requests = []
        self._lock = threading.Lock()

    def get(self, url):
        with self._lock:
            self.requests.append(url)
            if self.script:
                exc = self.script.pop(0)
                if exc is not None:
                    raise exc
        q = parse_qs(urlparse(url).query)
        centre = q["center"][0]
        w, h = (int(v) for v in q["size"][0].split("x"))
        cls = self.classes.get(centre)
        if cls is None:
            return encode_png(np.full((h, w, 3), 0.5))
        return encode_png(render_pattern(cls, self.n_classes, (h, w), substream(0, "tile", centre)))


def make_inventory_csv(species_counts, n_missing_location=0, n_vacant=0, n_unknown=0,
                       seed=0, centre=(51.5414, -0.1425)):
    """Camden-schema CSV text with the given clean species counts plus planted bad rows.

    Returns ``(csv text, ids of planted bad rows)``.
    """
    rng = substream(seed, "inventory")
    cols = CAMDEN_COLUMNS
    header = [cols["id"], cols["species"], cols["latitude"], cols["longitude"],
              cols["height"], cols["spread"], cols["dbh"], cols["maturity"]]
    rows, bad = [], []
    n = 0

    def coords():
        return (f"{centre[0] + rng.uniform(-0.01, 0.01):.6f}",
                f"{centre[1] + rng.uniform(-0.01, 0.01):.6f}")

    def add(species, lat, lon):
        nonlocal n
        n += 1
        rid = f"T{n:05d}"
        rows.append([rid, species, lat, lon, f"{rng.uniform(3, 25):.1f}",
                     f"{rng.uniform(2, 15):.1f}", f"{rng.uniform(10, 90):.0f}", "Mature"])
        return rid

    for species, count in species_counts.items():
        for _ in range(count):
            add(species, *coords())
    for _ in range(n_missing_location):
        bad.append(add("Ash", "", ""))
    for _ in range(n_vacant):
        bad.append(add("Vacant Plot", *coords()))
    for _ in range(n_unknown):
        bad.append(add("Unknown", *coords()))

    order = rng.permutation(len(rows))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for i in order:
        writer.writerow(rows[i])
    return buf.getvalue(), bad
