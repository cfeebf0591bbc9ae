"""Check the autodiff engine against central differences on a tiny network.

Builds a two-layer encoder with a 2C softmax head and compares backward()
gradients of the combined training objective with numerical ones.
"""

import numpy as np

from unihssl import ndgrad as nd
from unihssl.data import one_hot
from unihssl.mixup import build_mixup_set
from unihssl.model import Encoder, Head, Model
from unihssl.trainer import Hyperparams, batch_losses, combine_losses, forward_with_embedding

rng = np.random.default_rng(0)
c = 3
model = Model(Encoder.init([4, 8, 5], rng), Head.init(5, 2 * c, rng))
x_l, labels = rng.normal(size=(8, 4)), np.r_[0, 1, 2, 0, 1, 2, 0, 1]
x_u = rng.normal(size=(8, 4))
targets = np.full((8, 2 * c), 0.02)
targets[np.arange(8), c + labels[::-1]] = 0.9
mix = build_mixup_set(x_l, one_hot(labels, c), x_u, targets, 5, 10, 0.75, rng)
hp = Hyperparams(lambda_pa=0.5)


def objective():
    z_u, p_u = forward_with_embedding(model, x_u)
    terms = batch_losses(model, hp, x_l, labels, np.arange(8), z_u, p_u, targets, np.arange(8), mix)
    return combine_losses(terms, hp.weights())


params = model.parameters()
nd.zero_grad(params)
nd.backward(objective())
h = 1e-5
for i, p in enumerate(params):
    num = np.zeros_like(p.data)
    for idx in np.ndindex(p.data.shape):
        orig = p.data[idx]
        p.data[idx] = orig + h
        up = objective().item()
        p.data[idx] = orig - h
        down = objective().item()
        p.data[idx] = orig
        num[idx] = (up - down) / (2 * h)
    err = np.linalg.norm(p.grad - num) / max(np.linalg.norm(num), 1e-12)
    print(f"parameter {i} shape {p.data.shape}: relative error {err:.2e}")
