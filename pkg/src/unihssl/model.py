"""Feature encoder, probabilistic heads and checkpoint I/O.

The encoder is a stack of affine layers with rectifiers *between* them, so
the embedding itself is linear in the last hidden activation. Heads are a
single affine layer followed by a row softmax.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import ndgrad as nd
from .ndgrad import DimensionError, Tensor

CHECKPOINT_VERSION = 1


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class Encoder:
    layer_dims: list[int]
    weights: list[Tensor]
    biases: list[Tensor]

    def __post_init__(self):
        if len(self.layer_dims) < 2 or min(self.layer_dims) < 1:
            raise ValueError(f"invalid layer_dims {self.layer_dims}")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("one weight and one bias per layer required")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise DimensionError(f"layer {i}: weight {w.shape}, bias {b.shape}, expected {expected}")

    @classmethod
    def init(cls, layer_dims: Sequence[int], rng: np.random.Generator) -> Encoder:
        dims = [int(d) for d in layer_dims]
        weights = [Tensor(glorot_uniform(rng, i, o), requires_grad=True) for i, o in zip(dims[:-1], dims[1:])]
        biases = [Tensor(np.zeros(o), requires_grad=True) for o in dims[1:]]
        return cls(dims, weights, biases)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def embed_dim(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[Tensor]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


@dataclass
class Head:
    weight: Tensor
    bias: Tensor

    def __post_init__(self):
        if self.weight.data.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise DimensionError(f"head weight {self.weight.shape} and bias {self.bias.shape} disagree")

    @classmethod
    def init(cls, embed_dim: int, out_classes: int, rng: np.random.Generator) -> Head:
        return cls(
            Tensor(glorot_uniform(rng, embed_dim, out_classes), requires_grad=True),
            Tensor(np.zeros(out_classes), requires_grad=True),
        )

    @property
    def out_classes(self) -> int:
        return self.weight.shape[1]

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


def _as_input(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.atleast_2d(np.asarray(x, dtype=np.float64)))


def encode(enc: Encoder, x) -> Tensor:
    """Embed a batch ``b×input_dim`` into ``b×embed_dim``."""
    h = _as_input(x)
    if h.data.ndim != 2 or h.shape[1] != enc.input_dim:
        raise DimensionError(f"encoder expects input width {enc.input_dim}, got shape {h.shape}")
    last = len(enc.weights) - 1
    for i, (w, b) in enumerate(zip(enc.weights, enc.biases)):
        h = nd.add(nd.matmul(h, w), b)
        if i < last:
            h = nd.relu(h)
    return h


def logits(head: Head, z: Tensor) -> Tensor:
    if z.data.ndim != 2 or z.shape[1] != head.weight.shape[0]:
        raise DimensionError(f"head expects embedding width {head.weight.shape[0]}, got shape {z.shape}")
    return nd.add(nd.matmul(z, head.weight), head.bias)


def classify(head: Head, z: Tensor) -> Tensor:
    """Class probabilities ``softmax(z·W + b)``."""
    return nd.softmax_rows(logits(head, z))


def init_2c_from_pretrained(g_head: Head, rng: np.random.Generator) -> Head:
    """Build a 2C head whose first C columns (weights and bias) copy ``g_head``.

    The remaining C columns are drawn with the same Glorot scheme a fresh
    2C-wide layer would use, and their biases are zero.
    """
    embed_dim, c = g_head.weight.shape
    fresh = Head.init(embed_dim, 2 * c, rng)
    w = fresh.weight.data.copy()
    b = fresh.bias.data.copy()
    w[:, :c] = g_head.weight.data
    b[:c] = g_head.bias.data
    return Head(Tensor(w, requires_grad=True), Tensor(b, requires_grad=True))


@dataclass
class Model:
    """Encoder plus a head; ``predict`` gives class probabilities as arrays."""

    encoder: Encoder
    head: Head

    def parameters(self) -> list[Tensor]:
        return self.encoder.parameters() + self.head.parameters()

    def forward(self, x) -> Tensor:
        return classify(self.head, encode(self.encoder, x))

    def predict(self, x, batch_size: int = 4096) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = [self.forward(Tensor(x[i:i + batch_size])).data for i in range(0, len(x), batch_size)]
        return np.concatenate(out, axis=0) if out else np.zeros((0, self.head.out_classes))

    def copy(self) -> Model:
        enc = Encoder(
            list(self.encoder.layer_dims),
            [Tensor(w.data.copy(), requires_grad=True) for w in self.encoder.weights],
            [Tensor(b.data.copy(), requires_grad=True) for b in self.encoder.biases],
        )
        head = Head(Tensor(self.head.weight.data.copy(), requires_grad=True),
                    Tensor(self.head.bias.data.copy(), requires_grad=True))
        return Model(enc, head)


def save_checkpoint(model: Model, path) -> None:
    """Write every parameter with its shape to an ``.npz`` archive."""
    arrays = {
        "version": np.array(CHECKPOINT_VERSION),
        "layer_dims": np.array(model.encoder.layer_dims, dtype=np.int64),
        "head_weight": model.head.weight.data,
        "head_bias": model.head.bias.data,
    }
    for i, (w, b) in enumerate(zip(model.encoder.weights, model.encoder.biases)):
        arrays[f"enc_w{i}"] = w.data
        arrays[f"enc_b{i}"] = b.data
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> Model:
    with np.load(Path(path)) as z:
        version = int(z["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = [int(d) for d in z["layer_dims"]]
        n = len(dims) - 1
        enc = Encoder(
            dims,
            [Tensor(z[f"enc_w{i}"], requires_grad=True) for i in range(n)],
            [Tensor(z[f"enc_b{i}"], requires_grad=True) for i in range(n)],
        )
        head = Head(Tensor(z["head_weight"], requires_grad=True), Tensor(z["head_bias"], requires_grad=True))
    return Model(enc, head)
