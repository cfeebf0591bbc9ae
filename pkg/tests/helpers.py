"""Finite-difference oracle and tiny model builders shared by the tests."""

import numpy as np

from unihssl import ndgrad as nd
from unihssl.model import Encoder, Head, Model

FD_STEP = 1e-5
FD_RTOL = 1e-4


def numeric_grad(f, arrays, step=FD_STEP):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arrays``.

    ``arrays`` are mutated in place and restored.
    """
    out = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            orig = a[i]
            a[i] = orig + step
            fp = f()
            a[i] = orig - step
            fm = f()
            a[i] = orig
            g[i] = (fp - fm) / (2 * step)
        out.append(g)
    return out


def rel_error(a, b):
    a = np.concatenate([np.ravel(x) for x in a])
    b = np.concatenate([np.ravel(x) for x in b])
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)


def check_param_grads(loss_fn, params):
    """Compare backward() gradients of ``loss_fn()`` with central differences."""
    nd.zero_grad(params)
    loss = loss_fn()
    nd.backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    numeric = numeric_grad(lambda: loss_fn().item(), [p.data for p in params])
    return rel_error(analytic, numeric)


def tiny_model(rng, input_dim=4, hidden=5, embed=3, out=6):
    enc = Encoder.init([input_dim, hidden, embed], rng)
    for b in enc.biases:
        b.data[:] = rng.normal(scale=0.1, size=b.shape)
    head = Head.init(embed, out, rng)
    head.bias.data[:] = rng.normal(scale=0.1, size=head.bias.shape)
    return Model(enc, head)


def random_simplex(rng, shape):
    x = rng.gamma(1.0, size=shape)
    return x / x.sum(axis=-1, keepdims=True)
