"""Central finite-difference checks for analytic gradients.

Checks run in float64. For layer ops the scalar objective is a fixed random
projection ``sum(R * forward(...))``, so ``R`` is the upstream gradient fed to
the backward pass.
"""

import numpy as np

from . import layers
from .rng import substream

LAYER_OPS = {
    "conv2d": (layers.conv2d, layers.conv2d_backward),
    "relu": (layers.relu, layers.relu_backward),
    "maxpool2d": (layers.maxpool2d, layers.maxpool2d_backward),
    "dense": (layers.dense, layers.dense_backward),
}


class NonFiniteError(FloatingPointError):
    def __init__(self, message, coordinate=None):
        super().__init__(message if coordinate is None else f"{message} at {coordinate}")
        self.coordinate = coordinate


def _check_epsilon(epsilon):
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must be in [1e-7, 1e-3], got {epsilon}")


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def numerical_gradient(f, x, epsilon=1e-6):
    """Central-difference gradient of scalar ``f`` at ``x`` (perturbs ``x`` in place)."""
    _check_epsilon(epsilon)
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + epsilon
        fp = float(f(x))
        x[idx] = orig - epsilon
        fm = float(f(x))
        x[idx] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError("non-finite objective while differencing", idx)
        grad[idx] = (fp - fm) / (2 * epsilon)
    return grad


def grad_check(func, x, epsilon=1e-6):
    """Max relative error between ``func``'s analytic gradient and central differences.

    ``func(x)`` must return ``(value, grad)``.
    """
    x = np.array(x, dtype=np.float64)
    _, analytic = func(x)
    analytic = np.asarray(analytic, dtype=np.float64)
    bad = np.argwhere(~np.isfinite(analytic))
    if len(bad):
        raise NonFiniteError("non-finite analytic gradient", tuple(bad[0]))
    numeric = numerical_gradient(lambda z: func(z)[0], x, epsilon)
    return relative_error(analytic, numeric)


def layer_grad_check(op, args, epsilon=1e-6, seed=0):
    """Check every array argument of a layer op; return ``{arg index: max rel error}``.

    ``op`` is a name from :data:`LAYER_OPS` or a ``(forward, backward)`` pair.
    """
    forward, backward = LAYER_OPS[op] if isinstance(op, str) else op
    args = [np.array(a, dtype=np.float64) for a in args]
    out = forward(*args).output
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("non-finite forward output", tuple(np.argwhere(~np.isfinite(out))[0]))
    proj = substream(seed, "gradcheck-projection").standard_normal(out.shape)

    grads = backward(proj, forward(*args).cache)
    if not isinstance(grads, tuple):
        grads = (grads,)

    errors = {}
    for i, analytic in enumerate(grads):
        def objective(z, i=i):
            trial = list(args)
            trial[i] = z
            return np.sum(proj * forward(*trial).output)

        numeric = numerical_gradient(objective, args[i], epsilon)
        errors[i] = relative_error(analytic, numeric)
    return errors
