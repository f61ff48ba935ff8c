import math

import numpy as np
import pytest

from urbantree.checkpoint import MAGIC, Checkpoint
from urbantree.model import ModelSpec, build


def small_checkpoint():
    spec = ModelSpec(n_blocks=2, input_shape=(16, 16, 3), filters_per_block=[4, 8], fc_width=8,
                     dropout_rate=0.2, initializer="lecun_normal")
    return Checkpoint(spec, build(spec, seed=11), seed=11, epoch=7, val_loss=0.4321,
                      class_names=["Ash", "Sycamore"] + [f"c{i}" for i in range(4)])


def test_save_load_save_byte_identical(tmp_path):
    ckpt = small_checkpoint()
    ckpt.save(tmp_path / "a.bin")
    again = Checkpoint.load(tmp_path / "a.bin")
    again.save(tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_round_trip_values():
    ckpt = small_checkpoint()
    back = Checkpoint.from_bytes(ckpt.to_bytes())
    assert back.spec == ckpt.spec
    assert (back.seed, back.epoch, back.class_names) == (11, 7, ckpt.class_names)
    assert back.val_loss == pytest.approx(0.4321)
    for a, b in zip(ckpt.params, back.params):
        assert a.name == b.name
        np.testing.assert_array_equal(a.weights, b.weights)
        assert b.weights.dtype == np.float32


def test_nan_val_loss_survives():
    ckpt = small_checkpoint()
    ckpt.val_loss = float("nan")
    assert math.isnan(Checkpoint.from_bytes(ckpt.to_bytes()).val_loss)


def test_bad_magic():
    blob = small_checkpoint().to_bytes()
    assert blob.startswith(MAGIC)
    with pytest.raises(ValueError, match="magic"):
        Checkpoint.from_bytes(b"NOTACKPT" + blob[8:])


def test_truncated_or_padded_rejected():
    blob = small_checkpoint().to_bytes()
    with pytest.raises(ValueError, match="trailing"):
        Checkpoint.from_bytes(blob + b"\0")
    with pytest.raises(Exception):
        Checkpoint.from_bytes(blob[:-3])
