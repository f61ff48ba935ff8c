import sys

import numpy as np
import pytest


def conv2d_loops(x, kernels, bias):
    """Direct "same"-padded stride-1 convolution, one output scalar at a time."""
    H, W, cin = x.shape
    k, _, _, cout = kernels.shape
    p = k // 2
    out = np.zeros((H, W, cout))
    for i in range(H):
        for j in range(W):
            for o in range(cout):
                acc = bias[o]
                for di in range(k):
                    for dj in range(k):
                        for c in range(cin):
                            r, s = i + di - p, j + dj - p
                            if 0 <= r < H and 0 <= s < W:
                                acc += x[r, s, c] * kernels[di, dj, c, o]
                out[i, j, o] = acc
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
