"""Binary checkpoint format.

Layout (all integers little-endian uint32)::

    b"UTREECKP" | version | header length | header (UTF-8 JSON, sorted keys)
    | tensor count | for each tensor: ndim, dims..., float32 LE data

The header carries the format version, the serialized ModelSpec, the RNG
seed, the epoch and validation loss of the saved model, and class names.
Tensors follow in layer order, weights before bias.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .fsutil import write_atomic
from .model import Layer, ModelSpec, layer_shapes

MAGIC = b"UTREECKP"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    spec: ModelSpec
    params: list
    seed: int = 0
    epoch: int = 0
    val_loss: float = float("nan")
    class_names: list = field(default_factory=list)

    def header(self):
        return {
            "format_version": FORMAT_VERSION,
            "model_spec": self.spec.to_dict(),
            "seed": int(self.seed),
            "epoch": int(self.epoch),
            "val_loss": float(self.val_loss),
            "class_names": list(self.class_names),
            "layers": [layer.name for layer in self.params],
        }

    def to_bytes(self):
        header = json.dumps(self.header(), sort_keys=True, separators=(",", ":")).encode("utf-8")
        parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header]
        tensors = [t for layer in self.params for t in (layer.weights, layer.bias)]
        parts.append(struct.pack("<I", len(tensors)))
        for t in tensors:
            parts.append(struct.pack(f"<I{t.ndim}I", t.ndim, *t.shape))
            parts.append(np.ascontiguousarray(t, dtype="<f4").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob):
        if blob[:8] != MAGIC:
            raise ValueError("not a checkpoint file (bad magic)")
        version, hlen = struct.unpack_from("<II", blob, 8)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        pos = 16
        header = json.loads(blob[pos:pos + hlen].decode("utf-8"))
        pos += hlen
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        tensors = []
        for _ in range(count):
            (ndim,) = struct.unpack_from("<I", blob, pos)
            shape = struct.unpack_from(f"<{ndim}I", blob, pos + 4)
            pos += 4 + 4 * ndim
            n = int(np.prod(shape, dtype=np.int64))
            tensors.append(np.frombuffer(blob, dtype="<f4", count=n, offset=pos).reshape(shape).astype(np.float32))
            pos += 4 * n
        if pos != len(blob):
            raise ValueError(f"trailing bytes in checkpoint ({len(blob) - pos})")

        spec = ModelSpec.from_dict(header["model_spec"])
        expected = layer_shapes(spec)
        if count != 2 * len(expected):
            raise ValueError(f"checkpoint has {count} tensors, the model needs {2 * len(expected)}")
        params = []
        for i, (name, wshape, bshape) in enumerate(expected):
            w, b = tensors[2 * i], tensors[2 * i + 1]
            if w.shape != wshape or b.shape != bshape:
                raise ValueError(f"tensor shape mismatch for {name}: {w.shape}/{b.shape}")
            params.append(Layer(name, w, b))
        return cls(spec, params, header["seed"], header["epoch"], header["val_loss"],
                   header.get("class_names", []))

    def save(self, path):
        write_atomic(path, self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

