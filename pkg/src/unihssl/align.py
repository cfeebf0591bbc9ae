"""Per-domain class prototypes and the cross-domain prototype alignment loss."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ndgrad as nd
from .ndgrad import Tensor
from .pseudolabel import ConfigError, _check_unit_interval


@dataclass
class PrototypeSet:
    """Feature centroids indexed 0..2C-1; classes without members are absent."""

    n_classes: int
    vectors: dict[int, Tensor] = field(default_factory=dict)

    @property
    def present(self) -> set[int]:
        return set(self.vectors)

    def merged(self, other: PrototypeSet) -> PrototypeSet:
        if other.n_classes != self.n_classes:
            raise ValueError("prototype sets disagree on C")
        return PrototypeSet(self.n_classes, {**self.vectors, **other.vectors})

    def cosine_matrix(self) -> np.ndarray:
        """2C×2C cosine similarities; rows/columns of absent classes are NaN."""
        m = 2 * self.n_classes
        out = np.full((m, m), np.nan)
        for i, u in self.vectors.items():
            for j, v in self.vectors.items():
                out[i, j] = float(u.data @ v.data) / (np.linalg.norm(u.data) * np.linalg.norm(v.data))
        return out

    def dump_cosine_csv(self, path) -> None:
        cos = self.cosine_matrix()
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["class"] + [str(j) for j in range(len(cos))])
            for i, row in enumerate(cos):
                w.writerow([i] + ["" if np.isnan(v) else repr(float(v)) for v in row])


def _group_means(z: Tensor, groups: np.ndarray, keys: np.ndarray, offset: int, n_classes: int) -> dict[int, Tensor]:
    out = {}
    for k in range(n_classes):
        members = np.flatnonzero(groups == k)
        if len(members) == 0:
            continue
        # fixed summation order: class grouping, then key order
        members = members[np.argsort(keys[members], kind="stable")]
        out[offset + k] = nd.mean_rows(nd.take_rows(z, members))
    return out


def labeled_prototypes(z: Tensor, labels, n_classes: int, keys=None) -> PrototypeSet:
    """Class means of labeled embeddings, filling indices ``0..C-1``.

    ``keys`` (e.g. dataset indices) fix the summation order so that the result
    does not depend on batch order.
    """
    labels = np.asarray(labels, dtype=np.intp)
    keys = np.arange(len(labels)) if keys is None else np.asarray(keys)
    return PrototypeSet(n_classes, _group_means(z, labels, keys, 0, n_classes))


def unlabeled_prototypes(z: Tensor, pseudo_labels: np.ndarray, eps: float, keys=None) -> PrototypeSet:
    """Means over confidently pseudo-labeled embeddings, filling ``C..2C-1``.

    An instance counts toward ``C + k`` only when its largest pseudo-label
    probability exceeds ``eps`` and sits at index ``C + k``; confident
    instances whose argmax is in the labeled block contribute nowhere.
    """
    _check_unit_interval("eps", eps)
    pseudo_labels = np.asarray(pseudo_labels, dtype=np.float64)
    c = pseudo_labels.shape[1] // 2
    keys = np.arange(len(pseudo_labels)) if keys is None else np.asarray(keys)
    if len(pseudo_labels) == 0:
        return PrototypeSet(c)
    arg = pseudo_labels.argmax(axis=1)
    ok = (pseudo_labels.max(axis=1) > eps) & (arg >= c)
    groups = np.where(ok, arg - c, -1)
    return PrototypeSet(c, _group_means(z, groups, keys, c, c))


def prototype_alignment_loss(protos: PrototypeSet, tau: float, include_positive: bool = False) -> Tensor:
    """Symmetric contrastive loss between matching cross-domain prototypes.

    For every semantic class k with both prototypes present::

        -log exp(s_kk/τ) / Σ_{k'≠k} exp(s_kk'/τ) - log exp(s_kk/τ) / Σ_{k'≠k} exp(s_k'k/τ)

    where ``s_ij = cos(p_i, p_{C+j})``. Sums range over the classes that have
    both prototypes; with fewer than two such classes the loss is zero. The
    positive pair is left out of the denominators unless ``include_positive``.
    Individual terms may be negative.
    """
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    c = protos.n_classes
    active = [k for k in range(c) if k in protos.vectors and c + k in protos.vectors]
    if len(active) < 2:
        return Tensor(0.0)
    pl = nd.normalize_rows(nd.concat_rows([protos.vectors[k] for k in active]))
    pu = nd.normalize_rows(nd.concat_rows([protos.vectors[c + k] for k in active]))
    logits = nd.scale(nd.matmul(pl, nd.transpose(pu)), 1.0 / tau)
    n = len(active)
    mask = np.ones((n, n), bool) if include_positive else ~np.eye(n, dtype=bool)
    row_lse = nd.masked_row_logsumexp(logits, mask, axis=1)
    col_lse = nd.masked_row_logsumexp(logits, mask, axis=0)
    positives = nd.total(nd.diagonal(logits))
    return nd.add(nd.add(nd.total(row_lse), nd.total(col_lse)), nd.scale(positives, -2.0))
