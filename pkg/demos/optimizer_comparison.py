"""
Seven update rules on a one-dimensional bowl
=============================================

Each optimizer is a pure function from (state, params, grads) to new params
and state. We minimise f(theta) = theta^2 from theta = 1 and count the steps
each rule needs at its default settings.
"""

import numpy as np

from urbantree.optimizers import DEFAULTS, KINDS, apply_step, init_state

for kind in KINDS:
    state = init_state(kind, shape=())
    theta = np.float64(1.0)
    path = [float(theta)]
    for step in range(1, 2001):
        theta, state = apply_step(state, theta, 2 * theta)
        path.append(float(theta))
        if abs(theta) < 1e-2:
            break
    head = " ".join(f"{v:+.4f}" for v in path[1:4])
    print(f"{kind:9s} lr={DEFAULTS[kind]['learning_rate']:<6g} steps={step:5d}  first: {head}")

# %%
# The state carries the step counter and the moment estimates. Applying the
# same step twice to one state gives the same answer: nothing is mutated.
s = init_state("adam", shape=(3,))
p, g = np.array([1.0, -2.0, 0.5]), np.array([0.3, -0.1, 0.0])
a, _ = apply_step(s, p, g)
b, _ = apply_step(s, p, g)
print("\npure:", np.array_equal(a, b), "step counter still", s.step)
