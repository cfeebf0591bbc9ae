"""Tabular data end to end: write a CSV, load it, split it, train, evaluate.

The CSV has columns ``feature_0 .. feature_{d-1}, label, domain``. Rows with
``domain = L`` must carry a label; ``domain = U`` rows may leave it empty.
Labels on U rows are never shown to training; they only score the held-out
10%.
"""

from pathlib import Path

from unihssl.data import flagship_spec, generate_synthetic, hssl_from_tabular, load_csv, write_csv
from unihssl.experiment import load_config
from unihssl.experiment.runner import format_report, run
import numpy as np

out = Path("runs/demo-csv")
out.mkdir(parents=True, exist_ok=True)

src = generate_synthetic(flagship_spec(n_classes=4, input_dim=6, n_l=200, n_u=600), seed=3)
x = np.concatenate([src.labeled.x, src.unlabeled.x])
labels = np.concatenate([src.labeled.labels, src.unlabeled.hidden_labels])
labels[len(src.labeled) + 300:] = -1  # half the U rows have no ground truth at all
write_csv(out / "table.csv", x, labels, ["L"] * len(src.labeled) + ["U"] * len(src.unlabeled))

table = load_csv(out / "table.csv", n_classes=4)
split = hssl_from_tabular(table, fraction=0.9, seed=0)
print(f"{len(table)} rows -> {len(split.labeled)} labeled train, {len(split.unlabeled)} unlabeled train, "
      f"{len(split.test)} test ({int(split.test.hidden_domain.sum())} from U)")

cfg = load_config(None, {
    "data.source": "csv", "data.csv_path": str(out / "table.csv"), "data.n_classes": "4",
    "hp.train_epochs": "30", "repetitions": "2", "out": str(out / "run"),
})
print(format_report(run(cfg)))
