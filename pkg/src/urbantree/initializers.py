"""Kernel initializers, selectable by name (``he_normal``, ``lecun_uniform``, ...)."""

import math
import re
from dataclasses import dataclass

import numpy as np

KINDS = (
    "constant",
    "random_normal",
    "truncated_normal",
    "glorot_normal",
    "glorot_uniform",
    "he_normal",
    "he_uniform",
    "lecun_normal",
    "lecun_uniform",
)

# name -> (distribution, scale, fan mode); variance = scale / fan, "avg" fan = (in + out) / 2
_VARIANCE_SCALED = {
    "glorot_normal": ("normal", 1.0, "avg"),
    "glorot_uniform": ("uniform", 1.0, "avg"),
    "he_normal": ("normal", 2.0, "in"),
    "he_uniform": ("uniform", 2.0, "in"),
    "lecun_normal": ("normal", 1.0, "in"),
    "lecun_uniform": ("uniform", 1.0, "in"),
}


@dataclass(frozen=True)
class InitializerKind:
    """An initializer and its parameters.

    ``value`` is used by ``constant``; ``mean``/``stddev`` by
    ``random_normal`` and ``truncated_normal``.
    """

    name: str
    value: float = 0.0
    mean: float = 0.0
    stddev: float = 0.05

    def __post_init__(self):
        if self.name not in KINDS:
            raise ValueError(f"unknown initializer {self.name!r}; choose from {', '.join(KINDS)}")
        if self.stddev <= 0:
            raise ValueError(f"stddev must be positive, got {self.stddev}")

    @classmethod
    def parse(cls, text):
        """Parse ``"he_normal"``, ``"constant(0.5)"`` or ``"random_normal(0, 0.1)"``.

        Keyword form also works: ``"truncated_normal(mean=0, stddev=0.1)"``.
        """
        if isinstance(text, cls):
            return text
        m = re.fullmatch(r"\s*([a-z_]+)\s*(?:\((.*)\))?\s*", str(text))
        if not m:
            raise ValueError(f"cannot parse initializer {text!r}")
        name, argtext = m.group(1), m.group(2)
        if not argtext or not argtext.strip():
            return cls(name)
        fields = {"constant": ["value"]}.get(name, ["mean", "stddev"])
        kwargs = {}
        for i, part in enumerate(a.strip() for a in argtext.split(",")):
            if "=" in part:
                key, val = (s.strip() for s in part.split("=", 1))
            elif i < len(fields):
                key, val = fields[i], part
            else:
                raise ValueError(f"too many arguments in {text!r}")
            kwargs[key] = float(val)
        return cls(name, **kwargs)

    def __str__(self):
        if self.name == "constant":
            return f"constant({self.value!r})"
        if self.name in ("random_normal", "truncated_normal"):
            return f"{self.name}({self.mean!r}, {self.stddev!r})"
        return self.name


def fan_of(shape, layer_kind=None):
    """Return ``(fan_in, fan_out)`` for a conv ``(k, k, Cin, Cout)`` or dense ``(n, m)`` shape."""
    shape = tuple(int(s) for s in shape)
    if layer_kind is None:
        layer_kind = {4: "conv", 2: "dense"}.get(len(shape))
    if layer_kind == "conv" and len(shape) == 4:
        receptive = shape[0] * shape[1]
        return receptive * shape[2], receptive * shape[3]
    if layer_kind == "dense" and len(shape) == 2:
        return shape[0], shape[1]
    raise ValueError(f"unsupported shape {shape} for layer kind {layer_kind!r}")


def target_std(kind, shape):
    """Closed-form standard deviation (normal) or bound (uniform) for ``kind``."""
    kind = InitializerKind.parse(kind)
    dist, scale, mode = _VARIANCE_SCALED[kind.name]
    fan_in, fan_out = fan_of(shape)
    fan = fan_in if mode == "in" else (fan_in + fan_out) / 2.0
    variance = scale / fan
    if dist == "normal":
        return math.sqrt(variance)
    return math.sqrt(3.0 * variance)


def initialize(kind, shape, rng):
    """Sample a float64 array of ``shape`` from ``kind`` using generator ``rng``."""
    kind = InitializerKind.parse(kind)
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise ValueError(f"invalid shape {shape}")

    if kind.name == "constant":
        return np.full(shape, kind.value, dtype=np.float64)
    if kind.name == "random_normal":
        return rng.normal(kind.mean, kind.stddev, size=shape)
    if kind.name == "truncated_normal":
        return _truncated_normal(rng, kind.mean, kind.stddev, shape)

    dist = _VARIANCE_SCALED[kind.name][0]
    s = target_std(kind, shape)
    if dist == "normal":
        return rng.normal(0.0, s, size=shape)
    return rng.uniform(-s, s, size=shape)


def _truncated_normal(rng, mean, stddev, shape):
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return mean + stddev * out
