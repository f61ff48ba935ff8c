"""First-order update rules as pure state transitions.

``apply_step`` never mutates its arguments: it returns new parameters and a
new :class:`OptimizerState`. The epsilon term is added outside the square
root for every rule except Adadelta, whose update ratio needs it inside.
"""

from dataclasses import dataclass, field, replace

import numpy as np

DEFAULTS = {
    "sgd": {"learning_rate": 0.01},
    "adam": {"learning_rate": 0.002, "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-7},
    "nadam": {"learning_rate": 0.002, "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-7},
    "adamax": {"learning_rate": 0.002, "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-7},
    "adagrad": {"learning_rate": 0.05, "epsilon": 1e-7},
    "rmsprop": {"learning_rate": 0.001, "rho": 0.9, "epsilon": 1e-7},
    "adadelta": {"learning_rate": 1.0, "rho": 0.95, "epsilon": 1e-7},
}

SLOTS = {
    "sgd": (),
    "adam": ("m", "v"),
    "nadam": ("m", "v"),
    "adamax": ("m", "u"),
    "adagrad": ("accumulator",),
    "rmsprop": ("accumulator",),
    "adadelta": ("accumulator", "delta_accumulator"),
}

KINDS = tuple(DEFAULTS)


@dataclass(frozen=True)
class OptimizerState:
    kind: str
    hyper: dict
    step: int = 0
    slots: dict = field(default_factory=dict)


def resolve_hyper(kind, hyper=None):
    """Defaults for ``kind`` overlaid with ``hyper``; unknown keys are rejected."""
    if kind not in DEFAULTS:
        raise ValueError(f"unknown optimizer {kind!r}; choose from {', '.join(KINDS)}")
    merged = dict(DEFAULTS[kind])
    for key, val in (hyper or {}).items():
        if key not in merged:
            raise ValueError(f"{kind} has no hyperparameter {key!r}")
        merged[key] = float(val)
    if merged["learning_rate"] < 0:
        raise ValueError(f"learning rate must be non-negative, got {merged['learning_rate']}")
    for key in ("beta1", "beta2", "rho"):
        if key in merged and not 0 <= merged[key] < 1:
            raise ValueError(f"{key} must be in [0, 1), got {merged[key]}")
    if merged.get("epsilon", 0) < 0:
        raise ValueError("epsilon must be non-negative")
    return merged


def init_state(kind, hyper=None, shape=(), dtype=np.float64):
    hyper = resolve_hyper(kind, hyper)
    slots = {name: np.zeros(shape, dtype=dtype) for name in SLOTS[kind]}
    return OptimizerState(kind, hyper, 0, slots)


def apply_step(state, params, grads):
    """Return ``(new_params, new_state)`` after one update."""
    params = np.asarray(params)
    g = np.asarray(grads)
    if g.shape != params.shape:
        raise ValueError(f"gradient shape {g.shape} does not match parameter shape {params.shape}")
    for name, buf in state.slots.items():
        if buf.shape != params.shape:
            raise ValueError(f"slot {name!r} has shape {buf.shape}, parameters {params.shape}")

    h = state.hyper
    t = state.step + 1
    lr = h["learning_rate"]
    s = state.slots
    kind = state.kind

    if kind == "sgd":
        return params - lr * g, replace(state, step=t)

    if kind in ("adam", "nadam"):
        b1, b2, eps = h["beta1"], h["beta2"], h["epsilon"]
        m = b1 * s["m"] + (1 - b1) * g
        v = b2 * s["v"] + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        if kind == "nadam":
            m_hat = b1 * m_hat + (1 - b1) * g / (1 - b1 ** t)
        new = params - lr * m_hat / (np.sqrt(v_hat) + eps)
        return new, replace(state, step=t, slots={"m": m, "v": v})

    if kind == "adamax":
        b1, b2, eps = h["beta1"], h["beta2"], h["epsilon"]
        m = b1 * s["m"] + (1 - b1) * g
        u = np.maximum(b2 * s["u"], np.abs(g))
        new = params - (lr / (1 - b1 ** t)) * m / (u + eps)
        return new, replace(state, step=t, slots={"m": m, "u": u})

    if kind in ("adagrad", "rmsprop"):
        eps = h["epsilon"]
        if kind == "adagrad":
            acc = s["accumulator"] + g * g
        else:
            acc = h["rho"] * s["accumulator"] + (1 - h["rho"]) * g * g
        new = params - lr * g / (np.sqrt(acc) + eps)
        return new, replace(state, step=t, slots={"accumulator": acc})

    if kind == "adadelta":
        rho, eps = h["rho"], h["epsilon"]
        acc = rho * s["accumulator"] + (1 - rho) * g * g
        update = np.sqrt(s["delta_accumulator"] + eps) / np.sqrt(acc + eps) * g
        dacc = rho * s["delta_accumulator"] + (1 - rho) * update * update
        new = params - lr * update
        return new, replace(state, step=t, slots={"accumulator": acc, "delta_accumulator": dacc})

    raise ValueError(f"unknown optimizer {kind!r}")


class Optimizer:
    """Holds one :class:`OptimizerState` per parameter tensor of a model."""

    def __init__(self, kind, hyper=None, params=()):
        self.kind = kind
        self.hyper = resolve_hyper(kind, hyper)
        self.states = [init_state(kind, self.hyper, p.shape, p.dtype) for p in params]

    def step(self, params, grads):
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            new, self.states[i] = apply_step(self.states[i], p, g.astype(p.dtype, copy=False))
            out.append(new.astype(p.dtype, copy=False))
        return out
