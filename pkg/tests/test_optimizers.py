import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from urbantree.optimizers import DEFAULTS, KINDS, SLOTS, apply_step, init_state


def run(kind, grads, theta=0.0, **hyper):
    state = init_state(kind, hyper, shape=())
    p = np.float64(theta)
    out = []
    for g in grads:
        p, state = apply_step(state, p, np.float64(g))
        out.append(float(p))
    return out, state


# Hand-evaluated closed forms, theta0 = 0, g1 = 1, g2 = 0.5.
def test_sgd():
    (t1, t2), _ = run("sgd", [1.0, 0.5], learning_rate=0.1)
    assert t1 == pytest.approx(-0.1, abs=1e-10)
    assert t2 == pytest.approx(-0.15, abs=1e-10)
    (t,), _ = run("sgd", [0.5], theta=1.0, learning_rate=0.1)
    assert t == pytest.approx(0.95, abs=1e-10)


def test_adam():
    (t1, t2), _ = run("adam", [1.0, 0.5], learning_rate=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8)
    e1 = -0.001 / (1 + 1e-8)
    assert t1 == pytest.approx(e1, abs=1e-10)
    # t=2: m = 0.14, v = 0.001249, corrections 0.19 and 0.001999
    e2 = e1 - 0.001 * (0.14 / 0.19) / (math.sqrt(0.001249 / 0.001999) + 1e-8)
    assert t2 == pytest.approx(e2, abs=1e-10)


def test_adamax():
    (t1, t2), state = run("adamax", [1.0, 0.5], learning_rate=0.002, beta1=0.9, beta2=0.999, epsilon=0.0)
    assert t1 == pytest.approx(-0.002, abs=1e-10)
    # t=2: m = 0.14, u = max(0.999, 0.5)
    assert t2 == pytest.approx(-0.002 - (0.002 / 0.19) * 0.14 / 0.999, abs=1e-10)
    assert float(state.slots["u"]) == pytest.approx(0.999)


def test_adamax_first_step_state():
    _, state = run("adamax", [1.0], learning_rate=0.002, epsilon=0.0)
    assert float(state.slots["m"]) == pytest.approx(0.1)
    assert float(state.slots["u"]) == 1.0


def test_nadam():
    (t1, t2), _ = run("nadam", [1.0, 0.5], learning_rate=0.002, beta1=0.9, beta2=0.999, epsilon=0.0)
    # t=1: m_hat = 1, numerator 0.9 * 1 + 0.1 * 1 / 0.1 = 1.9, v_hat = 1
    assert t1 == pytest.approx(-0.0038, abs=1e-10)
    num2 = 0.9 * (0.14 / 0.19) + 0.1 * 0.5 / 0.19
    e2 = -0.0038 - 0.002 * num2 / math.sqrt(0.001249 / 0.001999)
    assert t2 == pytest.approx(e2, abs=1e-10)


def test_adagrad():
    (t1, t2), _ = run("adagrad", [1.0, 1.0], learning_rate=0.01, epsilon=1e-10)
    assert t1 == pytest.approx(-0.01 / (1 + 1e-10), abs=1e-10)
    assert t2 == pytest.approx(-0.01 * (1 / 1 + 1 / math.sqrt(2)), abs=1e-10)
    assert t2 == pytest.approx(-0.017071, abs=1e-6)


def test_rmsprop():
    (t1, t2), _ = run("rmsprop", [1.0, 0.5], learning_rate=0.001, rho=0.9, epsilon=0.0)
    e1 = -0.001 / math.sqrt(0.1)
    assert t1 == pytest.approx(e1, abs=1e-10)
    assert t2 == pytest.approx(e1 - 0.001 * 0.5 / math.sqrt(0.115), abs=1e-10)


def test_adadelta():
    (t1, t2), _ = run("adadelta", [1.0, 0.5], learning_rate=1.0, rho=0.95, epsilon=1e-6)
    d1 = math.sqrt(1e-6) / math.sqrt(0.05 + 1e-6)
    assert t1 == pytest.approx(-d1, abs=1e-10)
    d2 = math.sqrt(0.05 * d1 ** 2 + 1e-6) / math.sqrt(0.06 + 1e-6) * 0.5
    assert t2 == pytest.approx(-d1 - d2, abs=1e-10)


def test_init_state_slots():
    s = init_state("adam", shape=())
    assert s.step == 0 and float(s.slots["m"]) == 0 and float(s.slots["v"]) == 0
    assert init_state("sgd").slots == {}
    s = init_state("adadelta", shape=(2, 3))
    assert len(s.slots) == 2
    assert all(b.shape == (2, 3) and not b.any() for b in s.slots.values())


def test_negative_learning_rate_rejected():
    with pytest.raises(ValueError, match="learning rate"):
        init_state("sgd", {"learning_rate": -0.1})


def test_shape_mismatch_rejected():
    s = init_state("adam", shape=(3,))
    with pytest.raises(ValueError, match="shape"):
        apply_step(s, np.zeros(3), np.zeros(4))


@pytest.mark.parametrize("kind", KINDS)
def test_step_counter_and_slot_shapes(kind):
    s = init_state(kind, shape=(2, 2))
    p = np.ones((2, 2))
    for i in range(3):
        p, s = apply_step(s, p, np.full((2, 2), 0.3))
        assert s.step == i + 1
        assert set(s.slots) == set(SLOTS[kind])
        assert all(b.shape == (2, 2) and np.isfinite(b).all() for b in s.slots.values())


@pytest.mark.parametrize("kind", KINDS)
def test_zero_gradient_from_zero_state(kind):
    s = init_state(kind, shape=(3,))
    p = np.array([1.0, -2.0, 3.0])
    new, _ = apply_step(s, p, np.zeros(3))
    np.testing.assert_array_equal(new, p)


@pytest.mark.parametrize("kind", KINDS)
def test_purity(kind):
    s = init_state(kind, shape=(3,))
    p, g = np.array([1.0, 2.0, 3.0]), np.array([0.1, -0.2, 0.3])
    p, s = apply_step(s, p, g)
    snapshot = {k: v.copy() for k, v in s.slots.items()}
    a = apply_step(s, p, g)
    b = apply_step(s, p, g)
    np.testing.assert_array_equal(a[0], b[0])
    for k in snapshot:
        np.testing.assert_array_equal(s.slots[k], snapshot[k])
        np.testing.assert_array_equal(a[1].slots[k], b[1].slots[k])


@pytest.mark.parametrize("kind", KINDS)
def test_quadratic_converges_at_defaults(kind):
    s = init_state(kind, shape=())
    theta = np.float64(1.0)
    for step in range(1, 2001):
        theta, s = apply_step(s, theta, 2 * theta)
        if abs(theta) < 1e-2:
            break
    assert abs(theta) < 1e-2, (kind, step, float(theta))


@given(st.floats(-1e3, 1e3, allow_nan=False).filter(lambda g: abs(g) > 1e-6))
def test_adam_adamax_same_first_direction(g):
    a, _ = apply_step(init_state("adam", shape=()), np.float64(0), np.float64(g))
    b, _ = apply_step(init_state("adamax", shape=()), np.float64(0), np.float64(g))
    assert np.sign(a) == np.sign(b) == -np.sign(g)


def test_defaults_recorded():
    assert DEFAULTS["adamax"]["learning_rate"] == 0.002
    assert DEFAULTS["adadelta"] == {"learning_rate": 1.0, "rho": 0.95, "epsilon": 1e-7}
