"""Pre-training, the joint HSSL training loop and its optimizer.

One iteration of :func:`train` runs, in order: supervised loss on a labeled
batch, WMA update of the unlabeled batch's pseudo-labels, masked
pseudo-label loss, prototypes and their alignment loss, progressive mixup and
its loss, then a Nesterov step on the weighted sum with a cosine-annealed
learning rate.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ndgrad as nd
from .align import labeled_prototypes, prototype_alignment_loss, unlabeled_prototypes
from .data import LabeledSet, UnlabeledSet, expand_labeled, jitter, one_hot
from .mixup import build_mixup_set, mixup_loss, schedule_psi
from .model import Encoder, Head, Model, classify, encode, init_2c_from_pretrained
from .ndgrad import Tensor
from .pseudolabel import ConfigError, PseudoLabelStore, confidence_mask, init_store, masked_pl_loss, wma_update

VARIANTS = ("full", "no_wma", "no_sup", "no_pl", "no_pa", "no_mixup", "no_prog_mixup")
LOSS_TERMS = ("cl", "pl", "pa", "mixup")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    lambda_cl: float = 1.0
    lambda_pl: float = 1.0
    lambda_pa: float = 1e-2
    lambda_mixup: float = 1.0
    tau: float = 0.5
    eps: float = 0.5
    beta: float = 0.8
    alpha: float = 0.75
    lr: float = 5e-4
    pretrain_lr: float | None = None
    momentum: float = 0.9
    weight_decay: float = 1e-3
    batch_size: int = 32
    pretrain_epochs: int = 10
    train_epochs: int = 100
    hidden_dims: tuple[int, ...] = (64,)
    embed_dim: int = 32
    jitter: float = 0.0
    use_wma: bool = True
    progressive_mixup: bool = True
    include_positive: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("lambda_cl", "lambda_pl", "lambda_pa", "lambda_mixup", "weight_decay", "jitter"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        for name in ("eps", "beta"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.lr <= 0 or (self.pretrain_lr is not None and self.pretrain_lr <= 0):
            raise ConfigError("learning rates must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.batch_size < 1 or self.pretrain_epochs < 0 or self.train_epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epoch counts >= 0")
        if self.embed_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ConfigError("layer widths must be positive")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    def replace(self, **changes) -> Hyperparams:
        return dataclasses.replace(self, **changes)

    def weights(self) -> dict[str, float]:
        return {"cl": self.lambda_cl, "pl": self.lambda_pl, "pa": self.lambda_pa, "mixup": self.lambda_mixup}


def ablation_variant(hp: Hyperparams, flag: str) -> Hyperparams:
    """Hyperparameters for one of the ablation rows (``full`` is a no-op)."""
    if flag == "full":
        return hp
    if flag == "no_wma":
        return hp.replace(use_wma=False)
    if flag == "no_sup":
        return hp.replace(lambda_cl=0.0)
    if flag == "no_pl":
        return hp.replace(lambda_pl=0.0)
    if flag == "no_pa":
        return hp.replace(lambda_pa=0.0)
    if flag == "no_mixup":
        return hp.replace(lambda_mixup=0.0)
    if flag == "no_prog_mixup":
        return hp.replace(progressive_mixup=False)
    raise ConfigError(f"unknown variant {flag!r}; expected one of {', '.join(VARIANTS)}")


# ---------------------------------------------------------------------------
# optimizer and schedule


def cosine_lr(t: float, T: float, lr0: float) -> float:
    if not 0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * t / T))


class SGDNesterov:
    """SGD with Nesterov momentum and L2 regularization folded into the gradient.

    Per parameter::

        g = grad + weight_decay * θ
        v = momentum * v + g
        θ = θ - lr * (g + momentum * v)
    """

    def __init__(self, params: list[Tensor], momentum: float = 0.9, weight_decay: float = 0.0):
        self.params = params
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in params]

    def zero_grad(self) -> None:
        nd.zero_grad(self.params)

    def step(self, lr: float) -> None:
        for i, p in enumerate(self.params):
            grad = np.zeros_like(p.data) if p.grad is None else p.grad
            if grad.shape != p.data.shape:
                raise nd.DimensionError(f"gradient {grad.shape} does not match parameter {p.data.shape}")
            if not np.all(np.isfinite(grad)):
                raise TrainingError(f"non-finite gradient in parameter {i} (shape {p.data.shape})")
            g = grad + self.weight_decay * p.data
            self.velocity[i] = self.momentum * self.velocity[i] + g
            p.data = p.data - lr * (g + self.momentum * self.velocity[i])
            if not np.all(np.isfinite(p.data)):
                raise TrainingError(f"parameter {i} became non-finite")


def sgd_nesterov_step(params: list[Tensor], velocity: list[np.ndarray], lr: float,
                      momentum: float, weight_decay: float) -> None:
    """Functional form of :meth:`SGDNesterov.step` operating on given buffers."""
    opt = SGDNesterov(params, momentum, weight_decay)
    opt.velocity = velocity
    opt.step(lr)


# ---------------------------------------------------------------------------
# batching and rng streams


class CyclicBatches:
    """Endless stream of index batches drawn from successive random permutations."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        if n <= 0:
            raise ValueError("cannot batch an empty set")
        self.n = n
        self.batch_size = batch_size
        self.rng = rng
        self._buf = np.zeros(0, dtype=np.intp)

    def next(self) -> np.ndarray:
        while len(self._buf) < self.batch_size:
            self._buf = np.concatenate([self._buf, self.rng.permutation(self.n)])
        out, self._buf = self._buf[:self.batch_size], self._buf[self.batch_size:]
        return out


def _streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("init", "pretrain", "head", "labeled", "unlabeled", "mixup", "jitter")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


def total_iterations(n_l: int, n_u: int, hp: Hyperparams) -> int:
    return hp.train_epochs * math.ceil(max(n_l, n_u) / hp.batch_size)


# ---------------------------------------------------------------------------
# pre-training


@dataclass
class PretrainResult:
    model: Model
    epoch_losses: list[float]


def pretrain(labeled: LabeledSet, hp: Hyperparams) -> PretrainResult:
    """Train encoder + C-class head with cross-entropy on the labeled set."""
    if len(labeled) == 0:
        raise ValueError("pre-training needs labeled data")
    rngs = _streams(hp.seed)
    dims = [labeled.x.shape[1], *hp.hidden_dims, hp.embed_dim]
    model = Model(Encoder.init(dims, rngs["init"]), Head.init(hp.embed_dim, labeled.n_classes, rngs["init"]))
    opt = SGDNesterov(model.parameters(), hp.momentum, hp.weight_decay)
    lr = hp.lr if hp.pretrain_lr is None else hp.pretrain_lr
    y = labeled.onehot
    losses = []
    for _ in range(hp.pretrain_epochs):
        perm = rngs["pretrain"].permutation(len(labeled))
        batch_losses = []
        for start in range(0, len(perm), hp.batch_size):
            idx = perm[start:start + hp.batch_size]
            opt.zero_grad()
            loss = nd.cross_entropy(model.forward(labeled.x[idx]), y[idx])
            nd.backward(loss)
            opt.step(lr)
            batch_losses.append(loss.item())
        losses.append(float(np.mean(batch_losses)))
    return PretrainResult(model, losses)


# ---------------------------------------------------------------------------
# joint training


@dataclass
class TrainResult:
    model: Model
    store: PseudoLabelStore
    history: list[dict] = field(default_factory=list)

    def write_history(self, path) -> None:
        with Path(path).open("w") as fh:
            for rec in self.history:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _initial_2c_model(pretrained: Model, rng: np.random.Generator) -> Model:
    base = pretrained.copy()
    return Model(base.encoder, init_2c_from_pretrained(base.head, rng))


def forward_with_embedding(model: Model, x) -> tuple[Tensor, Tensor]:
    z = encode(model.encoder, x)
    return z, classify(model.head, z)


def batch_losses(model: Model, hp: Hyperparams, x_l, labels_l, keys_l, z_u: Tensor, p_u: Tensor,
                 targets: np.ndarray, keys_u, mix) -> dict[str, Tensor]:
    """The four loss terms for one labeled batch and one unlabeled batch.

    ``z_u``/``p_u`` are the unlabeled embeddings and 2C outputs from the
    forward pass that also fed the WMA update; ``targets`` are the already
    updated pseudo-labels, used as constants.
    """
    c = model.head.out_classes // 2
    labels_l = np.asarray(labels_l)
    z_l, p_l = forward_with_embedding(model, x_l)
    loss_cl = nd.cross_entropy(p_l, expand_labeled(one_hot(labels_l, c)))
    loss_pl = masked_pl_loss(p_u, targets, confidence_mask(targets, hp.eps))
    protos = labeled_prototypes(z_l, labels_l, c, keys=keys_l).merged(
        unlabeled_prototypes(z_u, targets, hp.eps, keys=keys_u)
    )
    loss_pa = prototype_alignment_loss(protos, hp.tau, hp.include_positive)
    loss_mix = Tensor(0.0) if mix is None else mixup_loss(model.forward(mix.x), mix.y)
    return {"cl": loss_cl, "pl": loss_pl, "pa": loss_pa, "mixup": loss_mix}


def combine_losses(terms: dict[str, Tensor], weights: dict[str, float]) -> Tensor:
    """Weighted sum; zero-weight terms stay out of the graph entirely."""
    weighted = [nd.scale(terms[k], weights[k]) for k in LOSS_TERMS if weights[k] > 0]
    if not weighted:
        return Tensor(0.0)
    total = weighted[0]
    for w in weighted[1:]:
        total = nd.add(total, w)
    return total


def train(pretrained: Model, labeled: LabeledSet, unlabeled: UnlabeledSet, hp: Hyperparams,
          store: PseudoLabelStore | None = None) -> TrainResult:
    """Run the joint objective from a pre-trained C-class model.

    ``pretrained`` is left untouched; its encoder and head are copied into a
    fresh 2C model. Loss terms with zero weight are still evaluated for the
    history but do not enter the differentiated total.
    """
    rngs = _streams(hp.seed)
    model = _initial_2c_model(pretrained, rngs["head"])
    store = init_store(pretrained, unlabeled.x) if store is None else store.snapshot()
    opt = SGDNesterov(model.parameters(), hp.momentum, hp.weight_decay)
    T = total_iterations(len(labeled), len(unlabeled), hp)
    lab_batches = CyclicBatches(len(labeled), hp.batch_size, rngs["labeled"])
    unl_batches = CyclicBatches(len(unlabeled), hp.batch_size, rngs["unlabeled"])
    y_l_all = labeled.onehot
    weights = hp.weights()
    history = []

    for t in range(1, T + 1):
        li = lab_batches.next()
        ui = unl_batches.next()
        ids = unlabeled.ids[ui]
        x_l = jitter(labeled.x[li], hp.jitter, rngs["jitter"])
        x_u = jitter(unlabeled.x[ui], hp.jitter, rngs["jitter"])
        y_l = y_l_all[li]

        z_u, p_u = forward_with_embedding(model, x_u)
        if hp.use_wma:
            wma_update(store, ids, p_u.data, hp.beta)
        else:
            store.assign(ids, p_u.data)
        targets = store[ids]
        mix = build_mixup_set(x_l, y_l, x_u, targets, t, T, hp.alpha, rngs["mixup"],
                              progressive=hp.progressive_mixup)
        terms = batch_losses(model, hp, x_l, labeled.labels[li], li, z_u, p_u, targets, ids, mix)
        total = combine_losses(terms, weights)
        mask = confidence_mask(targets, hp.eps)
        lr = cosine_lr(t - 1, T, hp.lr)
        record = {
            "t": t,
            "lr": lr,
            "psi": schedule_psi(t, T),
            "n_confident": int(mask.sum()),
            "total": total.item(),
            **{f"loss_{k}": v.item() for k, v in terms.items()},
        }
        if not np.isfinite(record["total"]):
            raise TrainingError(f"non-finite total loss at iteration {t}: {record}")

        opt.zero_grad()
        nd.backward(total)
        opt.step(lr)
        history.append(record)

    return TrainResult(model, store, history)


def train_supervised_2c(pretrained: Model, labeled: LabeledSet, n_unlabeled: int, hp: Hyperparams) -> TrainResult:
    """The 2C model trained on expanded labels alone, with the same batch
    schedule, initialization and optimizer as :func:`train`.
    """
    rngs = _streams(hp.seed)
    model = _initial_2c_model(pretrained, rngs["head"])
    opt = SGDNesterov(model.parameters(), hp.momentum, hp.weight_decay)
    T = total_iterations(len(labeled), n_unlabeled, hp)
    batches = CyclicBatches(len(labeled), hp.batch_size, rngs["labeled"])
    y2 = expand_labeled(labeled.onehot)
    history = []
    for t in range(1, T + 1):
        li = batches.next()
        x_l = jitter(labeled.x[li], hp.jitter, rngs["jitter"])
        jitter(x_l, hp.jitter, rngs["jitter"])  # keeps the noise stream aligned with train()
        loss = nd.scale(nd.cross_entropy(model.forward(x_l), y2[li]), hp.lambda_cl)
        lr = cosine_lr(t - 1, T, hp.lr)
        opt.zero_grad()
        nd.backward(loss)
        opt.step(lr)
        history.append({"t": t, "lr": lr, "total": loss.item()})
    return TrainResult(model, PseudoLabelStore(np.zeros((0, 2 * labeled.n_classes))), history)

