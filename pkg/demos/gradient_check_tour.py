"""
Checking backpropagation against finite differences
====================================================

Every layer ships a forward and a backward function. Here we compare the
analytic gradients with central differences, first layer by layer, then
through a whole one-block network on 8x8 inputs.
"""

import numpy as np

from urbantree import model as M
from urbantree.gradcheck import layer_grad_check, numerical_gradient, relative_error
from urbantree.rng import substream

rng = substream(0, "demo")

# Layer primitives. The check projects the output onto a random direction
# so that each layer reduces to a scalar function of its inputs.
print("conv2d  ", layer_grad_check("conv2d", [rng.normal(size=(6, 6, 2)),
                                               rng.normal(size=(3, 3, 2, 4)),
                                               rng.normal(size=4)]))
print("dense   ", layer_grad_check("dense", [rng.normal(size=8), rng.normal(size=(8, 4)),
                                              rng.normal(size=4)]))
print("maxpool ", layer_grad_check("maxpool2d", [rng.permutation(64).reshape(4, 4, 4) * 0.1]))

# %%
# A whole network in double precision. Dropout uses a fixed generator so the
# same units are dropped in every perturbed evaluation.
spec = M.ModelSpec(n_blocks=1, input_shape=(8, 8, 3), filters_per_block=[3], fc_width=6,
                   dropout_rate=0.25, initializer="glorot_normal")
params = M.build(spec, seed=1, dtype=np.float64)
x = rng.random((2, 8, 8, 3))
y = np.array([1, 4])

loss, grads, _ = M.loss_and_grads(spec, params, x, y, training=True, rng=substream(2))
flat = M.flat_params(params)
print(f"\nloss {loss:.6f} (ln 6 = {np.log(6):.6f})")
for i, p in enumerate(flat):
    def f(z, i=i):
        trial = list(flat)
        trial[i] = z
        return M.loss_and_grads(spec, M.with_flat_params(params, trial), x, y,
                                training=True, rng=substream(2))[0]

    kind = "weights" if i % 2 == 0 else "bias"
    err = relative_error(grads[i], numerical_gradient(f, p.copy(), 1e-6))
    print(f"{params[i // 2].name:14s} {kind:7s} {p.size:5d} entries  max rel err {err:.2e}")
