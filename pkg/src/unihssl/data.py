"""Datasets, 2C label expansion, synthetic two-domain tasks and CSV ingestion.

Classes are 0-based throughout: semantic class ``k`` of the labeled domain is
index ``k`` of the extended label space and the same class in the unlabeled
domain is index ``C + k``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

SIMPLEX_ATOL = 1e-8


class DataError(ValueError):
    pass


class CsvParseError(DataError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _check_simplex(p: np.ndarray, what: str) -> None:
    if np.any(p < 0) or not np.allclose(p.sum(axis=-1), 1.0, rtol=0.0, atol=SIMPLEX_ATOL):
        raise DataError(f"{what} must lie on the probability simplex")


def expand_labeled(y) -> np.ndarray:
    """``concat(y, 0_C)`` for a one-hot vector or a batch of them."""
    y = np.asarray(y, dtype=np.float64)
    ok = np.all((y == 0) | (y == 1), axis=-1) & (y.sum(axis=-1) == 1)
    if not np.all(ok):
        raise DataError("expand_labeled needs one-hot label vectors")
    return np.concatenate([y, np.zeros_like(y)], axis=-1)


def expand_initial_pseudo(ybar) -> np.ndarray:
    """``concat(0_C, ybar)``: a C-class prediction moved into the unlabeled block."""
    ybar = np.asarray(ybar, dtype=np.float64)
    _check_simplex(ybar, "initial pseudo-label")
    return np.concatenate([np.zeros_like(ybar), ybar], axis=-1)


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.intp)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


@dataclass(frozen=True)
class LabeledSet:
    x: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if len(self.x) != len(self.labels):
            raise DataError("features and labels differ in length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DataError("label out of range")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def onehot(self) -> np.ndarray:
        return one_hot(self.labels, self.n_classes)


@dataclass(frozen=True)
class UnlabeledSet:
    """Unlabeled features. ``hidden_labels`` exists only for evaluation."""

    x: np.ndarray
    ids: np.ndarray
    hidden_labels: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(np.unique(self.ids)) != len(self.ids):
            raise DataError("unlabeled stable ids must be unique")

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class TestSet:
    """Mixed-domain test data; the domain tags (0 = L, 1 = U) are evaluator-only."""

    x: np.ndarray
    labels: np.ndarray
    hidden_domain: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class HsslData:
    labeled: LabeledSet
    unlabeled: UnlabeledSet
    test: TestSet

    @property
    def n_classes(self) -> int:
        return self.labeled.n_classes


# ---------------------------------------------------------------------------
# synthetic generator


@dataclass
class SyntheticDomainSpec:
    means_l: np.ndarray
    means_u: np.ndarray
    scale_l: np.ndarray
    scale_u: np.ndarray
    p_l: np.ndarray
    p_u: np.ndarray
    n_l: int = 500
    n_u: int = 2000
    n_test: int = 1000
    test_u_fraction: float = 0.5

    def __post_init__(self):
        self.means_l = np.asarray(self.means_l, dtype=np.float64)
        self.means_u = np.asarray(self.means_u, dtype=np.float64)
        c = self.means_l.shape[0]
        self.scale_l = np.broadcast_to(np.asarray(self.scale_l, dtype=np.float64), (c,)).copy()
        self.scale_u = np.broadcast_to(np.asarray(self.scale_u, dtype=np.float64), (c,)).copy()
        self.p_l = np.asarray(self.p_l, dtype=np.float64)
        self.p_u = np.asarray(self.p_u, dtype=np.float64)
        if self.means_u.shape != self.means_l.shape or self.means_l.ndim != 2:
            raise DataError("class means of both domains must be C×input_dim")
        if np.any(self.scale_l <= 0) or np.any(self.scale_u <= 0):
            raise DataError("covariance scales must be positive")
        for p in (self.p_l, self.p_u):
            if p.shape != (c,):
                raise DataError("label distributions must have C entries")
            _check_simplex(p, "label distribution")
        if min(self.n_l, self.n_u, self.n_test) < 0:
            raise DataError("sample counts must be non-negative")
        if not 0.0 <= self.test_u_fraction <= 1.0:
            raise DataError("test_u_fraction must lie in [0, 1]")

    @property
    def n_classes(self) -> int:
        return self.means_l.shape[0]

    @property
    def input_dim(self) -> int:
        return self.means_l.shape[1]

    @property
    def mean_shift(self) -> np.ndarray:
        return self.means_u - self.means_l

    def label_tv_distance(self) -> float:
        return 0.5 * float(np.abs(self.p_l - self.p_u).sum())

    def require_heterogeneous(self) -> None:
        if self.label_tv_distance() <= 0:
            raise DataError("labeled and unlabeled label distributions must differ")


def power_law(n_classes: int, exponent: float) -> np.ndarray:
    w = np.arange(1, n_classes + 1, dtype=np.float64) ** -exponent
    return w / w.sum()


def flagship_spec(
    n_classes: int = 5,
    input_dim: int = 16,
    mean_spread: float = 1.0,
    shift_norm: float = 2.0,
    power: float = 1.5,
    n_l: int = 500,
    n_u: int = 2000,
    n_test: int = 1000,
    test_u_fraction: float = 0.5,
    geometry_seed: int = 0,
) -> SyntheticDomainSpec:
    """Spherical Gaussian classes; each U-class mean is its L mean moved by a
    random direction of length ``shift_norm``. ``p_L`` is uniform and ``p_U``
    follows a power law.
    """
    rng = np.random.default_rng(geometry_seed)
    means_l = rng.normal(0.0, mean_spread, size=(n_classes, input_dim))
    dirs = rng.normal(size=(n_classes, input_dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return SyntheticDomainSpec(
        means_l=means_l,
        means_u=means_l + shift_norm * dirs,
        scale_l=np.ones(n_classes),
        scale_u=np.ones(n_classes),
        p_l=np.full(n_classes, 1.0 / n_classes),
        p_u=power_law(n_classes, power),
        n_l=n_l,
        n_u=n_u,
        n_test=n_test,
        test_u_fraction=test_u_fraction,
    )


def _draw(rng, means, scales, p, n):
    labels = rng.choice(len(p), size=n, p=p)
    x = means[labels] + scales[labels, None] * rng.normal(size=(n, means.shape[1]))
    return x, labels


def generate_synthetic(spec: SyntheticDomainSpec, seed: int) -> HsslData:
    rng = np.random.default_rng(seed)
    c = spec.n_classes
    x_l, y_l = _draw(rng, spec.means_l, spec.scale_l, spec.p_l, spec.n_l)
    x_u, y_u = _draw(rng, spec.means_u, spec.scale_u, spec.p_u, spec.n_u)
    n_tu = int(round(spec.n_test * spec.test_u_fraction))
    xt_l, yt_l = _draw(rng, spec.means_l, spec.scale_l, spec.p_l, spec.n_test - n_tu)
    xt_u, yt_u = _draw(rng, spec.means_u, spec.scale_u, spec.p_u, n_tu)
    order = rng.permutation(spec.n_test)
    test = TestSet(
        x=np.concatenate([xt_l, xt_u])[order],
        labels=np.concatenate([yt_l, yt_u])[order],
        hidden_domain=np.concatenate([np.zeros(len(yt_l), int), np.ones(n_tu, int)])[order],
    )
    return HsslData(
        LabeledSet(x_l, y_l, c),
        UnlabeledSet(x_u, np.arange(spec.n_u), hidden_labels=y_u),
        test,
    )


def jitter(x: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian feature noise; identity when ``sigma == 0``."""
    if sigma <= 0:
        return x
    return x + sigma * rng.normal(size=x.shape)


# ---------------------------------------------------------------------------
# CSV ingestion


@dataclass(frozen=True)
class TabularDataset:
    """Rows of a feature CSV. ``labels`` uses -1 for an empty label field."""

    x: np.ndarray
    labels: np.ndarray
    domains: np.ndarray
    n_classes: int

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> TabularDataset:
        idx = np.asarray(idx, dtype=np.intp)
        return TabularDataset(self.x[idx], self.labels[idx], self.domains[idx], self.n_classes)

    @property
    def unlabeled_mask(self) -> np.ndarray:
        return (self.labels < 0) | (self.domains == "U")

    @property
    def stable_ids(self) -> np.ndarray:
        """Sequential ids of the unlabeled rows in file order (-1 for labeled rows)."""
        ids = np.full(len(self), -1, dtype=np.int64)
        mask = self.unlabeled_mask
        ids[mask] = np.arange(mask.sum())
        return ids


def load_csv(path, n_classes: int) -> TabularDataset:
    """Read ``feature_0..feature_{d-1},label,domain`` rows.

    A row is unlabeled when its label is empty or its domain is ``U``; labels
    on ``U`` rows are kept as hidden evaluation truth.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(1, "missing header row") from None
        d = len(header) - 2
        expected = [f"feature_{i}" for i in range(d)] + ["label", "domain"]
        if d < 1 or header != expected:
            raise CsvParseError(1, f"header must be {','.join(expected) if d >= 1 else 'feature_0,...,label,domain'}")
        feats, labels, domains = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise CsvParseError(lineno, f"expected {d + 2} fields, got {len(row)}")
            try:
                feats.append([float(v) for v in row[:d]])
            except ValueError:
                raise CsvParseError(lineno, "non-numeric feature") from None
            if not np.all(np.isfinite(feats[-1])):
                raise CsvParseError(lineno, "non-finite feature")
            dom = row[d + 1].strip()
            if dom not in ("L", "U"):
                raise CsvParseError(lineno, f"domain must be L or U, got {dom!r}")
            lab = row[d].strip()
            if lab == "":
                if dom == "L":
                    raise CsvParseError(lineno, "labeled-domain row without a label")
                labels.append(-1)
            else:
                try:
                    k = int(lab)
                except ValueError:
                    raise CsvParseError(lineno, f"label must be an integer, got {lab!r}") from None
                if not 0 <= k < n_classes:
                    raise CsvParseError(lineno, f"label {k} outside 0..{n_classes - 1}")
                labels.append(k)
            domains.append(dom)
    return TabularDataset(
        np.asarray(feats, dtype=np.float64).reshape(-1, d),
        np.asarray(labels, dtype=np.int64),
        np.asarray(domains, dtype="<U1"),
        n_classes,
    )


def write_csv(path, x: np.ndarray, labels, domains) -> None:
    """Write rows in the schema :func:`load_csv` reads; label ``-1`` is written empty."""
    d = x.shape[1]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"feature_{i}" for i in range(d)] + ["label", "domain"])
        for row, lab, dom in zip(x, labels, domains):
            w.writerow([repr(float(v)) for v in row] + ["" if lab < 0 else int(lab), dom])


def split_train_test(dataset, fraction: float = 0.9, seed: int = 0):
    """Shuffle then cut into ``(train, test)``; works on anything with ``subset``."""
    if not 0.0 < fraction < 1.0:
        raise DataError("fraction must lie in (0, 1)")
    n = len(dataset)
    if n == 0:
        raise DataError("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(round(fraction * n))
    return dataset.subset(np.sort(perm[:cut])), dataset.subset(np.sort(perm[cut:]))


def hssl_from_tabular(data: TabularDataset, fraction: float = 0.9, seed: int = 0) -> HsslData:
    """Split each domain 90/10 and arrange the parts for training and testing.

    Test rows without a label cannot be scored and are dropped.
    """
    parts = {}
    for dom in ("L", "U"):
        idx = np.flatnonzero(data.domains == dom)
        if len(idx) == 0:
            raise DataError(f"no rows for domain {dom}")
        parts[dom] = split_train_test(data.subset(idx), fraction, seed)
    train_l, test_l = parts["L"]
    train_u, test_u = parts["U"]
    test = TabularDataset(
        np.concatenate([test_l.x, test_u.x]),
        np.concatenate([test_l.labels, test_u.labels]),
        np.concatenate([test_l.domains, test_u.domains]),
        data.n_classes,
    )
    keep = test.labels >= 0
    if not np.all(keep):
        logger.warning("dropping %d unlabeled test rows", int((~keep).sum()))
    test = test.subset(np.flatnonzero(keep))
    hidden = train_u.labels if np.all(train_u.labels >= 0) else None
    return HsslData(
        LabeledSet(train_l.x, train_l.labels, data.n_classes),
        UnlabeledSet(train_u.x, np.arange(len(train_u)), hidden_labels=hidden),
        TestSet(test.x, test.labels, (test.domains == "U").astype(int)),
    )
