"""Custom CNN family: N conv blocks, a hidden FC layer and a K-way output.

    INPUT -> [[CONV -> RELU] * 2 -> MAXPOOL (-> DROPOUT)] * N
          -> FLATTEN -> FC -> RELU (-> DROPOUT) -> FC

with N in 1..6. Dropout layers exist only when ``dropout_rate > 0``.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import layers
from .initializers import InitializerKind, fan_of, initialize
from .rng import substream

MAX_BLOCKS = 6


def default_filters(n_blocks):
    return [min(32 * 2 ** i, 256) for i in range(n_blocks)]


@dataclass
class ModelSpec:
    n_blocks: int = 1
    kernel_size: int = 3
    filters_per_block: list = None
    fc_width: int = 128
    dropout_rate: float = 0.0
    initializer: InitializerKind = field(default_factory=lambda: InitializerKind("he_uniform"))
    input_shape: tuple = (200, 200, 3)
    n_classes: int = 6

    def __post_init__(self):
        if not isinstance(self.n_blocks, (int, np.integer)) or not 1 <= self.n_blocks <= MAX_BLOCKS:
            raise ValueError(f"n_blocks must be an integer in 1..{MAX_BLOCKS}, got {self.n_blocks}")
        self.n_blocks = int(self.n_blocks)
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be a positive odd integer, got {self.kernel_size}")
        if self.filters_per_block is None:
            self.filters_per_block = default_filters(self.n_blocks)
        self.filters_per_block = [int(f) for f in self.filters_per_block]
        if len(self.filters_per_block) != self.n_blocks or min(self.filters_per_block) < 1:
            raise ValueError(
                f"filters_per_block needs {self.n_blocks} positive entries, got {self.filters_per_block}"
            )
        if not 0 <= self.dropout_rate < 1:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        self.initializer = InitializerKind.parse(self.initializer)
        self.input_shape = tuple(int(s) for s in self.input_shape)
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValueError(f"input_shape must be (H, W, C), got {self.input_shape}")
        if self.n_classes < 2 or self.fc_width < 1:
            raise ValueError("need n_classes >= 2 and fc_width >= 1")

    def to_dict(self):
        d = asdict(self)
        d["initializer"] = str(self.initializer)
        d["input_shape"] = list(self.input_shape)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class Layer:
    name: str
    weights: np.ndarray
    bias: np.ndarray


def shape_trace(spec):
    """Walk the layer sequence, returning ``[(layer name, output shape), ...]``.

    Raises ``ValueError`` if pooling would shrink the image below 1x1.
    """
    h, w, c = spec.input_shape
    trace = [("input", (h, w, c))]
    for b, filters in enumerate(spec.filters_per_block, start=1):
        trace.append((f"block{b}_conv1", (h, w, filters)))
        trace.append((f"block{b}_conv2", (h, w, filters)))
        if h < 2 or w < 2:
            raise ValueError(
                f"{spec.input_shape[:2]} input collapses below 1x1 after {b} poolings "
                f"(n_blocks={spec.n_blocks})"
            )
        h, w, c = h // 2, w // 2, filters
        trace.append((f"block{b}_pool", (h, w, c)))
    trace.append(("flatten", (h * w * c,)))
    trace.append(("fc1", (spec.fc_width,)))
    trace.append(("fc2", (spec.n_classes,)))
    return trace


def layer_shapes(spec):
    """``[(name, weight shape, bias shape)]`` for every trainable layer."""
    trace = dict(shape_trace(spec))
    k = spec.kernel_size
    out = []
    cin = spec.input_shape[2]
    for b, filters in enumerate(spec.filters_per_block, start=1):
        out.append((f"block{b}_conv1", (k, k, cin, filters), (filters,)))
        out.append((f"block{b}_conv2", (k, k, filters, filters), (filters,)))
        cin = filters
    flat = trace["flatten"][0]
    out.append(("fc1", (flat, spec.fc_width), (spec.fc_width,)))
    out.append(("fc2", (spec.fc_width, spec.n_classes), (spec.n_classes,)))
    return out


def count_parameters(spec):
    return sum(int(np.prod(w)) + int(np.prod(b)) for _, w, b in layer_shapes(spec))


def build(spec, seed=0, dtype=np.float32):
    """Initialise weights with ``spec.initializer`` and zero biases.

    Layer ``i`` draws from its own substream ``(seed, "init", i)``.
    """
    params = []
    for i, (name, wshape, bshape) in enumerate(layer_shapes(spec)):
        fan_of(wshape)  # validates rank
        w = initialize(spec.initializer, wshape, substream(seed, "init", i))
        params.append(Layer(name, w.astype(dtype), np.zeros(bshape, dtype=dtype)))
    return params


def flat_params(params):
    out = []
    for layer in params:
        out.extend([layer.weights, layer.bias])
    return out


def with_flat_params(params, arrays):
    return [Layer(l.name, arrays[2 * i], arrays[2 * i + 1]) for i, l in enumerate(params)]


def normalize_pixels(images):
    """8-bit pixels to floats in [0, 1]."""
    return np.asarray(images, dtype=np.float32) / np.float32(255.0)


def _check_input(spec, x):
    x = np.asarray(x)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4 or tuple(x.shape[1:]) != spec.input_shape:
        raise layers.ShapeError(f"expected images of shape {spec.input_shape}, got {x.shape[1:]}")
    return x


def forward_with_cache(spec, params, x, training=False, rng=None):
    x = _check_input(spec, x)
    rate = spec.dropout_rate
    use_dropout = training and rate > 0
    if use_dropout and rng is None:
        raise ValueError("training with dropout needs an rng")
    caches = []
    h = x
    for b in range(spec.n_blocks):
        for j in range(2):
            layer = params[2 * b + j]
            io = layers.conv2d(h, layer.weights, layer.bias)
            caches.append(("conv", io.cache))
            io = layers.relu(io.output)
            caches.append(("relu", io.cache))
            h = io.output
        io = layers.maxpool2d(h)
        caches.append(("pool", io.cache))
        h = io.output
        if use_dropout:
            io = layers.dropout(h, rate, rng, training=True)
            caches.append(("dropout", io.cache))
            h = io.output
    caches.append(("flatten", h.shape))
    h = h.reshape(h.shape[0], -1)
    fc1, fc2 = params[-2], params[-1]
    io = layers.dense(h, fc1.weights, fc1.bias)
    caches.append(("dense", io.cache))
    io = layers.relu(io.output)
    caches.append(("relu", io.cache))
    h = io.output
    if use_dropout:
        io = layers.dropout(h, rate, rng, training=True)
        caches.append(("dropout", io.cache))
        h = io.output
    io = layers.dense(h, fc2.weights, fc2.bias)
    caches.append(("dense", io.cache))
    return io.output, caches


def forward(spec, params, x, training=False, rng=None):
    """Logits of shape ``(batch, n_classes)``."""
    return forward_with_cache(spec, params, x, training, rng)[0]


def backward(caches, dlogits):
    """Gradients in :func:`flat_params` order."""
    grads = []
    d = dlogits
    for kind, cache in reversed(caches):
        if kind in ("conv", "dense"):
            backward_fn = layers.conv2d_backward if kind == "conv" else layers.dense_backward
            d, dw, db = backward_fn(d, cache)
            grads.append((dw, db))
        elif kind == "relu":
            d = layers.relu_backward(d, cache)
        elif kind == "pool":
            d = layers.maxpool2d_backward(d, cache)
        elif kind == "dropout":
            d = layers.dropout_backward(d, cache)
        elif kind == "flatten":
            d = d.reshape(cache)
    out = []
    for dw, db in reversed(grads):
        out.extend([dw, db])
    return out


def loss_and_grads(spec, params, x, y, class_weights=None, training=True, rng=None):
    """Mean weighted cross-entropy over the batch, its parameter gradients, and the logits."""
    logits, caches = forward_with_cache(spec, params, x, training, rng)
    loss, dlogits = layers.softmax_cross_entropy(logits, y, class_weights)
    return loss, backward(caches, dlogits), logits


def compute_class_weights(class_counts):
    """Balanced weights ``total / (K * count[c])``."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.ndim != 1 or len(counts) == 0:
        raise ValueError("class_counts must be a non-empty 1-D list")
    if (counts <= 0).any():
        zero = np.flatnonzero(counts <= 0).tolist()
        raise ValueError(f"cannot weight classes with no samples: {zero}")
    return counts.sum() / (len(counts) * counts)
