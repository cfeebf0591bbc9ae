"""Progressive inter-domain mixup.

The mixing weight ``λ`` multiplies the *unlabeled* sample. It is drawn as
``ψ(t)·Beta(α, α)`` with ``ψ`` rising linearly from 0.5 to 1, so early
synthetic points stay close to the labeled domain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import ndgrad as nd
from .data import SIMPLEX_ATOL, expand_labeled
from .ndgrad import DimensionError, Tensor
from .pseudolabel import ConfigError

logger = logging.getLogger(__name__)


def schedule_psi(t: int, T: int) -> float:
    if T < 1:
        raise ConfigError("T must be at least 1")
    if not 0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    return 0.5 + t / (2 * T)


def sample_beta(alpha: float, rng: np.random.Generator, size=None):
    """Beta(α, α) as ``G1 / (G1 + G2)`` with independent Gamma(α, 1) draws."""
    if alpha <= 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    g1 = rng.gamma(alpha, 1.0, size=size)
    g2 = rng.gamma(alpha, 1.0, size=size)
    return g1 / (g1 + g2)


def sample_lambda(t: int, T: int, alpha: float, rng: np.random.Generator, size=None, progressive: bool = True):
    """Mixing weights in ``[0, ψ(t)]``; ``progressive=False`` drops the ψ scaling."""
    b = sample_beta(alpha, rng, size)
    if not progressive:
        return b
    psi = schedule_psi(t, T)
    lam = psi * b
    assert np.all(lam <= psi)
    return lam


def mix_pair(x_l, y_l, x_u, y_u, lam):
    """Interpolate labeled and pseudo-labeled examples.

    ``y_l`` is a C-dim one-hot (expanded here to 2C); ``y_u`` is already 2C.
    Works on single examples or aligned batches, with ``lam`` scalar or one
    value per row.
    """
    x_l = np.asarray(x_l, dtype=np.float64)
    x_u = np.asarray(x_u, dtype=np.float64)
    y_u = np.asarray(y_u, dtype=np.float64)
    y_l2 = expand_labeled(y_l)
    if x_l.shape != x_u.shape:
        raise DimensionError(f"feature shapes differ: {x_l.shape} vs {x_u.shape}")
    if y_l2.shape != y_u.shape:
        raise DimensionError(f"label shapes differ: {y_l2.shape} vs {y_u.shape}")
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam < 0) or np.any(lam > 1):
        raise ValueError("lambda must lie in [0, 1]")
    if lam.ndim == 1:
        lam = lam[:, None]
    x_m = lam * x_u + (1.0 - lam) * x_l
    y_m = lam * y_u + (1.0 - lam) * y_l2
    return x_m, y_m


@dataclass
class MixupBatch:
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray

    def __len__(self) -> int:
        return len(self.lam)


def build_mixup_set(x_l, y_l, x_u, y_u, t: int, T: int, alpha: float, rng: np.random.Generator,
                    progressive: bool = True) -> MixupBatch | None:
    """Pair every row of the larger side with a random row of the other side.

    Partners are drawn with replacement and each pair gets its own ``λ``.
    When the sides are the same size the labeled side is iterated. Returns
    ``None`` (after a warning) when either side is empty.
    """
    n_l, n_u = len(x_l), len(x_u)
    if n_l == 0 or n_u == 0:
        logger.warning("mixup skipped: empty %s batch", "labeled" if n_l == 0 else "unlabeled")
        return None
    if n_l >= n_u:
        li = np.arange(n_l)
        ui = rng.integers(0, n_u, size=n_l)
    else:
        ui = np.arange(n_u)
        li = rng.integers(0, n_l, size=n_u)
    lam = sample_lambda(t, T, alpha, rng, size=len(li), progressive=progressive)
    x_m, y_m = mix_pair(np.asarray(x_l)[li], np.asarray(y_l)[li], np.asarray(x_u)[ui], np.asarray(y_u)[ui], lam)
    if np.any(y_m < -SIMPLEX_ATOL) or not np.allclose(y_m.sum(axis=1), 1.0, rtol=0.0, atol=SIMPLEX_ATOL):
        raise AssertionError("mixed label left the simplex")
    return MixupBatch(x_m, y_m, lam, li, ui)


def mixup_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean squared distance between 2C outputs and constant mixed labels."""
    return nd.mse(pred, Tensor(np.asarray(target, dtype=np.float64)))
