"""Forward/backward pairs for the layer primitives of the conv-block template.

Arrays are plain ``numpy.ndarray`` in height x width x channel layout. Every
image op accepts either a single ``(H, W, C)`` image or a ``(B, H, W, C)``
batch; dense and loss ops accept ``(n,)`` or ``(B, n)``. A forward returns a
:class:`LayerIO` whose ``cache`` must be handed back to the matching backward.

Computation happens in the dtype of the inputs: float32 for training,
float64 when checking gradients.
"""

from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


@dataclass
class LayerIO:
    output: np.ndarray
    cache: Any


def _as_batch(x, rank):
    x = np.asarray(x)
    if x.ndim == rank:
        return x[None], True
    if x.ndim == rank + 1:
        return x, False
    raise ShapeError(f"expected rank {rank} or {rank + 1} input, got shape {x.shape}")


# -- convolution ------------------------------------------------------------

def _im2col(xpad, k):
    # (B, H+k-1, W+k-1, C) -> (B*H*W, k*k*C), column order (ki, kj, c)
    win = sliding_window_view(xpad, (k, k), axis=(1, 2))  # B, H, W, C, k, k
    B, H, W, C = win.shape[:4]
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(B * H * W, k * k * C)


def conv2d(x, kernels, bias):
    """Stride-1 convolution with "same" zero padding.

    ``kernels`` has shape ``(k, k, Cin, Cout)`` with odd ``k``; ``bias`` has
    shape ``(Cout,)``. The output keeps the spatial size of the input.
    """
    xb, squeeze = _as_batch(x, 3)
    kernels = np.asarray(kernels)
    bias = np.asarray(bias)
    if kernels.ndim != 4 or kernels.shape[0] != kernels.shape[1]:
        raise ShapeError(f"kernels must be (k, k, Cin, Cout), got {kernels.shape}")
    k, _, cin, cout = kernels.shape
    if k % 2 == 0:
        raise ShapeError(f"kernel size must be odd, got {k}")
    if xb.shape[-1] != cin:
        raise ShapeError(
            f"input has {xb.shape[-1]} channels but kernels expect Cin={cin} "
            f"(input {xb.shape[1:]}, kernels {kernels.shape})"
        )
    if bias.shape != (cout,):
        raise ShapeError(f"bias must have shape ({cout},), got {bias.shape}")

    B, H, W, _ = xb.shape
    p = k // 2
    xpad = np.pad(xb, ((0, 0), (p, p), (p, p), (0, 0)))
    cols = _im2col(xpad, k)
    out = (cols @ kernels.reshape(k * k * cin, cout) + bias).reshape(B, H, W, cout)
    # cols are rebuilt in backward; caching them costs k*k times the input
    return LayerIO(out[0] if squeeze else out, (xpad, kernels, squeeze))


def conv2d_backward(dout, cache):
    """Return ``(d_input, d_kernels, d_bias)``."""
    xpad, kernels, squeeze = cache
    k, _, cin, cout = kernels.shape
    dout = np.asarray(dout)
    if squeeze:
        dout = dout[None]
    B, H, W, _ = dout.shape
    dflat = dout.reshape(B * H * W, cout)

    cols = _im2col(xpad, k)
    dkernels = (cols.T @ dflat).reshape(k, k, cin, cout)
    dbias = dflat.sum(axis=0)

    dcols = (dflat @ kernels.reshape(k * k * cin, cout).T).reshape(B, H, W, k, k, cin)
    dxpad = np.zeros_like(xpad)
    for i in range(k):
        for j in range(k):
            dxpad[:, i:i + H, j:j + W, :] += dcols[:, :, :, i, j, :]
    p = k // 2
    dx = dxpad[:, p:p + H, p:p + W, :]
    return (dx[0] if squeeze else dx), dkernels, dbias


# -- activations ------------------------------------------------------------

def relu(x):
    x = np.asarray(x)
    return LayerIO(np.maximum(x, 0), x > 0)


def relu_backward(dout, cache):
    # subgradient at exactly 0 is taken as 0
    return dout * cache


# -- pooling ----------------------------------------------------------------

def maxpool2d(x):
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped."""
    xb, squeeze = _as_batch(x, 3)
    B, H, W, C = xb.shape
    if H < 2 or W < 2:
        raise ShapeError(f"maxpool2d needs H, W >= 2, got {(H, W)}")
    H2, W2 = H // 2, W // 2
    win = (
        xb[:, :2 * H2, :2 * W2, :]
        .reshape(B, H2, 2, W2, 2, C)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(B, H2, W2, C, 4)
    )
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return LayerIO(out[0] if squeeze else out, (xb.shape, arg, squeeze))


def maxpool2d_backward(dout, cache):
    shape, arg, squeeze = cache
    B, H, W, C = shape
    H2, W2 = H // 2, W // 2
    dout = np.asarray(dout)
    if squeeze:
        dout = dout[None]
    # ties route to the first maximum only
    dwin = (np.arange(4) == arg[..., None]) * dout[..., None]
    dx = np.zeros(shape, dtype=dout.dtype)
    dx[:, :2 * H2, :2 * W2, :] = (
        dwin.reshape(B, H2, W2, C, 2, 2)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(B, 2 * H2, 2 * W2, C)
    )
    return dx[0] if squeeze else dx


# -- fully connected --------------------------------------------------------

def dense(x, weights, bias):
    xb, squeeze = _as_batch(x, 1)
    weights = np.asarray(weights)
    if weights.ndim != 2 or xb.shape[1] != weights.shape[0]:
        raise ShapeError(
            f"input length {xb.shape[1]} does not match weight rows "
            f"(weights {np.shape(weights)})"
        )
    if np.shape(bias) != (weights.shape[1],):
        raise ShapeError(f"bias must have shape ({weights.shape[1]},), got {np.shape(bias)}")
    out = xb @ weights + bias
    return LayerIO(out[0] if squeeze else out, (xb, weights, squeeze))


def dense_backward(dout, cache):
    """Return ``(d_input, d_weights, d_bias)``."""
    xb, weights, squeeze = cache
    dout = np.asarray(dout)
    if squeeze:
        dout = dout[None]
    dx = dout @ weights.T
    return (dx[0] if squeeze else dx), xb.T @ dout, dout.sum(axis=0)


# -- regularisation ---------------------------------------------------------

def dropout(x, rate, rng=None, training=True):
    """Inverted dropout: survivors are scaled by ``1 / (1 - rate)``.

    At inference, or with ``rate == 0``, the input is returned unchanged.
    """
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = np.asarray(x)
    if not training or rate == 0:
        return LayerIO(x, None)
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    keep = rng.random(x.shape) >= rate
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.dtype)
    mask = keep * scale
    return LayerIO(x * mask, mask)


def dropout_backward(dout, cache):
    return dout if cache is None else dout * cache


# -- loss -------------------------------------------------------------------

def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, target, class_weights=None):
    """Weighted categorical cross-entropy and its gradient w.r.t. the logits.

    For a single example ``loss = -w[t] * log softmax(logits)[t]``. With a
    batch ``(B, K)`` of logits and ``B`` targets the loss is the mean of the
    per-example losses, and the gradient is scaled by ``1 / B`` accordingly.
    """
    logits = np.asarray(logits)
    single = logits.ndim == 1
    lb = logits[None] if single else logits
    t = np.atleast_1d(np.asarray(target))
    B, K = lb.shape
    if K < 2:
        raise ShapeError(f"need at least 2 classes, got {K}")
    if t.shape != (B,):
        raise ShapeError(f"expected {B} targets, got shape {t.shape}")
    if t.dtype.kind not in "iu" or t.min() < 0 or t.max() >= K:
        raise ValueError(f"target class out of range [0, {K}): {t.tolist()}")

    if class_weights is None:
        w = np.ones(B, dtype=lb.dtype)
    else:
        class_weights = np.asarray(class_weights, dtype=lb.dtype)
        if class_weights.shape != (K,):
            raise ShapeError(f"class_weights must have shape ({K},), got {class_weights.shape}")
        w = class_weights[t]

    z = lb - lb.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    logp_t = z[np.arange(B), t] - logsumexp
    losses = -w * logp_t

    grad = np.exp(z - logsumexp[:, None])
    grad[np.arange(B), t] -= 1
    grad *= (w / B)[:, None]
    if single:
        return losses[0], grad[0]
    return losses.mean(), grad


def per_example_cross_entropy(logits, target, class_weights=None):
    """Per-example weighted losses for a ``(B, K)`` batch (no gradient)."""
    lb = np.atleast_2d(logits)
    t = np.atleast_1d(target)
    z = lb - lb.max(axis=1, keepdims=True)
    logp_t = z[np.arange(len(t)), t] - np.log(np.exp(z).sum(axis=1))
    w = 1.0 if class_weights is None else np.asarray(class_weights, dtype=lb.dtype)[t]
    return -w * logp_t
