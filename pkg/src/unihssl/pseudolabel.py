"""Pseudo-label store for the unlabeled set, WMA updates and the masked loss."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import ndgrad as nd
from .data import SIMPLEX_ATOL, expand_initial_pseudo
from .ndgrad import DimensionError, Tensor


class ConfigError(ValueError):
    pass


def _check_unit_interval(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ConfigError(f"{name} must lie in (0, 1), got {value}")


class PseudoLabelStore:
    """One 2C probability vector per unlabeled example, indexed by stable id."""

    def __init__(self, labels: np.ndarray, iteration: int = 0):
        labels = np.asarray(labels, dtype=np.float64)
        if labels.ndim != 2 or labels.shape[1] % 2:
            raise DimensionError(f"store needs an N×2C array, got {labels.shape}")
        self.labels = labels
        self.iteration = iteration
        self.check()

    @property
    def n_classes(self) -> int:
        return self.labels.shape[1] // 2

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, ids) -> np.ndarray:
        return self.labels[ids]

    def check(self) -> None:
        """Assert every entry lies on the 2C simplex."""
        if len(self.labels) == 0:
            return
        if np.any(self.labels < -SIMPLEX_ATOL) or not np.allclose(
            self.labels.sum(axis=1), 1.0, rtol=0.0, atol=SIMPLEX_ATOL
        ):
            raise AssertionError("pseudo-label left the simplex")

    def assign(self, ids, probs: np.ndarray) -> None:
        """Overwrite entries with the current predictions (no averaging)."""
        self.labels[ids] = probs
        self.check()
        self.iteration += 1

    def snapshot(self) -> PseudoLabelStore:
        return PseudoLabelStore(self.labels.copy(), self.iteration)

    def dump_csv(self, path) -> None:
        """Write ``stable_id,argmax,confidence`` for every entry."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["stable_id", "argmax", "confidence"])
            for i, row in enumerate(self.labels):
                w.writerow([i, int(row.argmax()), repr(float(row.max()))])


def init_store(pretrained, x_unlabeled) -> PseudoLabelStore:
    """Initial pseudo-labels: C-class predictions placed in the unlabeled block.

    ``pretrained`` is the C-class :class:`~unihssl.model.Model` ``g∘f``.
    """
    x = np.asarray(x_unlabeled, dtype=np.float64)
    c = pretrained.head.out_classes
    if len(x) == 0:
        return PseudoLabelStore(np.zeros((0, 2 * c)))
    if x.ndim != 2 or x.shape[1] != pretrained.encoder.input_dim:
        raise DimensionError(
            f"unlabeled features {x.shape} do not match encoder input {pretrained.encoder.input_dim}"
        )
    return PseudoLabelStore(expand_initial_pseudo(pretrained.predict(x)))


def wma_update(store: PseudoLabelStore, ids, probs: np.ndarray, beta: float) -> np.ndarray:
    """``ŷ_t = β ŷ_{t-1} + (1-β) p`` for the given ids; other entries are untouched.

    ``probs`` are the model's 2C outputs for those ids from this iteration's
    forward pass. Returns the updated rows.
    """
    _check_unit_interval("beta", beta)
    ids = np.asarray(ids, dtype=np.intp)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (len(ids), store.labels.shape[1]):
        raise DimensionError(f"predictions {probs.shape} do not match {len(ids)} ids × {store.labels.shape[1]}")
    store.labels[ids] = beta * store.labels[ids] + (1.0 - beta) * probs
    store.check()
    store.iteration += 1
    return store.labels[ids]


def confidence_mask(labels: np.ndarray, eps: float) -> np.ndarray:
    return labels.max(axis=1) > eps


def confident_subset(store: PseudoLabelStore, eps: float, ids=None) -> tuple[np.ndarray, np.ndarray]:
    """Ids and labels of entries whose largest probability strictly exceeds ``eps``."""
    _check_unit_interval("eps", eps)
    ids = np.arange(len(store)) if ids is None else np.asarray(ids, dtype=np.intp)
    rows = store.labels[ids]
    keep = confidence_mask(rows, eps) if len(rows) else np.zeros(0, bool)
    return ids[keep], rows[keep]


def masked_pl_loss(pred: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Cross-entropy against fixed pseudo-labels, counting only masked rows.

    The sum over confident rows is divided by the full batch size, so the loss
    is the batch expectation of ``1(confident) · ce``. With no confident rows
    the result is a constant exact zero.
    """
    mask = np.asarray(mask, dtype=bool)
    if len(mask) == 0 or not mask.any():
        return Tensor(0.0)
    return nd.cross_entropy(pred, targets, weights=mask.astype(np.float64))
