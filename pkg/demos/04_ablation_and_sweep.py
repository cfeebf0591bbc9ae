"""Ablation table and a one-axis sensitivity sweep on a reduced task.

Uses ``configs/quick.cfg`` so the seven ablation rows and a four-point
sweep of the alignment weight finish in well under a minute. ``sweep.csv`` is
plot-ready: one row per grid value with mean accuracy overall and per domain.
"""

from pathlib import Path

from unihssl.experiment import load_config
from unihssl.experiment.runner import ablate, sweep

ROOT = Path(__file__).resolve().parent.parent
out = Path("runs/demo-ablation")

cfg = load_config(ROOT / "configs" / "quick.cfg")
ablate(cfg, out / "ablation")
print((out / "ablation" / "ablation.txt").read_text())

sweep(cfg, "lambda_pa", [0.0, 0.01, 0.1, 1.0], out / "sweep")
print((out / "sweep" / "sweep.csv").read_text())
