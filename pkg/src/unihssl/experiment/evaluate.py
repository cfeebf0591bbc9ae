"""Mixed-domain evaluation of 2C (and C-class) models."""

from __future__ import annotations

import numpy as np

from ..data import DataError, TestSet


def semantic_collapse(pred_2c: np.ndarray, n_classes: int) -> np.ndarray:
    """Map 2C indices to semantic classes: ``k`` and ``C + k`` both become ``k``."""
    return np.asarray(pred_2c) % n_classes


def evaluate_predictions(probs: np.ndarray, test: TestSet, n_classes: int) -> dict:
    """Accuracy metrics from class probabilities.

    ``probs`` has either 2C columns (HSSL model) or C columns (pre-trained
    model, for which domain identification is undefined and reported as
    ``None``).
    """
    if len(test) == 0:
        raise DataError("cannot evaluate on an empty test set")
    arg = np.asarray(probs).argmax(axis=1)
    two_c = probs.shape[1] == 2 * n_classes
    sem = semantic_collapse(arg, n_classes) if two_c else arg
    correct = sem == test.labels
    dom = test.hidden_domain
    per_domain = {}
    for name, code in (("L", 0), ("U", 1)):
        sel = dom == code
        per_domain[name] = float(correct[sel].mean()) if sel.any() else None
    per_class = []
    for k in range(n_classes):
        sel = test.labels == k
        per_class.append(float(correct[sel].mean()) if sel.any() else None)
    return {
        "accuracy": int(correct.sum()) / len(test),
        "n_test": len(test),
        "n_correct": int(correct.sum()),
        "domain_accuracy": per_domain,
        "domain_counts": {"L": int((dom == 0).sum()), "U": int((dom == 1).sum())},
        "domain_id_accuracy": float(((arg >= n_classes).astype(int) == dom).mean()) if two_c else None,
        "per_class_accuracy": per_class,
    }


def evaluate(model, test: TestSet, n_classes: int) -> dict:
    return evaluate_predictions(model.predict(test.x), test, n_classes)
