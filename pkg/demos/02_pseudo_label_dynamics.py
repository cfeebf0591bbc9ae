"""Inspect pseudo-labels and prototypes from one training run.

Reads the per-iteration history (confident fraction of each unlabeled batch,
the four loss terms, mixup scale) and the final pseudo-label store, then
writes the store and the cosine matrix of the class prototypes as CSV.
"""

from pathlib import Path

import numpy as np

from unihssl.align import labeled_prototypes, unlabeled_prototypes
from unihssl.data import flagship_spec, generate_synthetic
from unihssl.experiment.evaluate import evaluate
from unihssl.model import encode
from unihssl.pseudolabel import confidence_mask, init_store
from unihssl.trainer import Hyperparams, pretrain, train

out = Path("runs/demo-pseudo-labels")
out.mkdir(parents=True, exist_ok=True)

data = generate_synthetic(flagship_spec(), seed=0)
c = data.n_classes
truth = data.unlabeled.hidden_labels
hp = Hyperparams(train_epochs=30)


def describe(label, labels):
    conf = confidence_mask(labels, hp.eps)
    sem = labels.argmax(axis=1) % c
    print(f"{label:>8}: confident {conf.mean():6.1%}   semantic acc {np.mean(sem == truth):.3f}   "
          f"U-block mass {labels[:, c:].sum(axis=1).mean():.3f}")


pre = pretrain(data.labeled, hp)
store = init_store(pre.model, data.unlabeled.x)
describe("initial", store.labels)
result = train(pre.model, data.labeled, data.unlabeled, hp, store=store)
describe("final", result.store.labels)

print("\n    iter    psi  confident/batch    cl      pl      pa    mixup")
hist = result.history
for rec in hist[:: max(1, len(hist) // 10)] + [hist[-1]]:
    print(f"{rec['t']:8d}  {rec['psi']:.3f}  {rec['n_confident']:>15d}  {rec['loss_cl']:.3f}  "
          f"{rec['loss_pl']:.3f}  {rec['loss_pa']:+.3f}  {rec['loss_mixup']:.3f}")

print("\nmixed test accuracy:", f"{evaluate(result.model, data.test, c)['accuracy']:.3f}",
      " pre-trained baseline:", f"{evaluate(pre.model, data.test, c)['accuracy']:.3f}")

result.store.dump_csv(out / "pseudo_labels.csv")
z_l = encode(result.model.encoder, data.labeled.x)
z_u = encode(result.model.encoder, data.unlabeled.x)
protos = labeled_prototypes(z_l, data.labeled.labels, c).merged(
    unlabeled_prototypes(z_u, result.store.labels, hp.eps))
protos.dump_cosine_csv(out / "prototype_cosines.csv")
print(f"wrote {out / 'pseudo_labels.csv'} and {out / 'prototype_cosines.csv'}")
