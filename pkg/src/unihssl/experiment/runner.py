"""Repeated runs, ablations and sensitivity sweeps with JSON/text reports."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from ..data import generate_synthetic, hssl_from_tabular, load_csv
from ..model import save_checkpoint
from ..pseudolabel import ConfigError, init_store
from ..trainer import VARIANTS, ablation_variant, pretrain, train, train_supervised_2c
from .config import SWEEP_AXES, ExperimentConfig
from .evaluate import evaluate

logger = logging.getLogger(__name__)

METHODS = ("uni_hssl", "supervised", "supervised_2c")
METHOD_TITLES = {
    "uni_hssl": "Uni-HSSL",
    "supervised": "Supervised (pre-trained C-class)",
    "supervised_2c": "Supervised 2C, same iterations",
}


def load_data(cfg: ExperimentConfig, seed: int):
    if cfg.source == "synthetic":
        spec = cfg.spec()
        spec.require_heterogeneous()
        return generate_synthetic(spec, seed)
    table = load_csv(cfg.csv_path, cfg.csv_n_classes)
    return hssl_from_tabular(table, cfg.split_fraction, seed)


def run_seed(cfg: ExperimentConfig, seed: int, out: Path | None = None, include_control: bool = True) -> dict:
    data = load_data(cfg, seed)
    hp = ablation_variant(cfg.hp.replace(seed=seed), cfg.variant)
    c = data.n_classes
    pre = pretrain(data.labeled, hp)
    store = init_store(pre.model, data.unlabeled.x)
    result = train(pre.model, data.labeled, data.unlabeled, hp, store=store)
    row = {
        "seed": seed,
        "uni_hssl": evaluate(result.model, data.test, c),
        "supervised": evaluate(pre.model, data.test, c),
        "pretrain_epoch_losses": pre.epoch_losses,
        "iterations": len(result.history),
        "final_losses": {k: v for k, v in result.history[-1].items() if k.startswith("loss_") or k == "total"}
        if result.history else {},
    }
    if include_control:
        control = train_supervised_2c(pre.model, data.labeled, len(data.unlabeled), hp)
        row["supervised_2c"] = evaluate(control.model, data.test, c)
    if data.unlabeled.hidden_labels is not None and len(result.store):
        pl = result.store.labels.argmax(axis=1) % c
        row["pseudo_label_accuracy"] = float((pl == data.unlabeled.hidden_labels).mean())
        row["pseudo_label_unlabeled_block_mass"] = float(result.store.labels[:, c:].sum(axis=1).mean())
    if out is not None:
        hist = f"history-{seed}.jsonl"
        result.write_history(out / hist)
        save_checkpoint(result.model, out / f"model-{seed}.npz")
        save_checkpoint(pre.model, out / f"pretrained-{seed}.npz")
        row["history"] = hist
    return row


def _stats(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    out = {"mean": float(arr.mean())}
    if len(arr) >= 2:
        out["std"] = float(arr.std(ddof=1))
    return out


def summarize(rows: list[dict]) -> dict:
    summary = {}
    for method in METHODS:
        present = [r[method] for r in rows if method in r]
        if not present:
            continue
        entry = _stats([m["accuracy"] for m in present])
        for dom in ("L", "U"):
            vals = [m["domain_accuracy"][dom] for m in present if m["domain_accuracy"][dom] is not None]
            if vals:
                entry[f"accuracy_{dom}"] = _stats(vals)
        ids = [m["domain_id_accuracy"] for m in present if m["domain_id_accuracy"] is not None]
        if ids:
            entry["domain_id_accuracy"] = _stats(ids)
        summary[method] = entry
    return summary


def _fmt(stat: dict | None) -> str:
    if stat is None:
        return "-"
    s = f"{100 * stat['mean']:.1f}"
    return s + (f" ({100 * stat['std']:.1f})" if "std" in stat else "")


def format_report(report: dict) -> str:
    seeds = [r["seed"] for r in report["runs"]]
    header = ["method"] + [f"seed {s}" for s in seeds] + ["mean (std)", "L", "U", "domain-id"]
    lines = []
    for method, stat in report["summary"].items():
        per_seed = [f"{100 * r[method]['accuracy']:.1f}" for r in report["runs"]]
        lines.append([METHOD_TITLES[method]] + per_seed + [
            _fmt(stat), _fmt(stat.get("accuracy_L")), _fmt(stat.get("accuracy_U")), _fmt(stat.get("domain_id_accuracy")),
        ])
    return _table(header, lines) + f"\nvariant: {report['config']['variant']}\n"


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    fmt = lambda cells: "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()
    return "\n".join([fmt(header), fmt(["-" * w for w in widths])] + [fmt(r) for r in rows]) + "\n"


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def run(cfg: ExperimentConfig, out=None, include_control: bool = True) -> dict:
    """Train and evaluate for every seed; write ``report.json`` and ``report.txt``.

    The report is rewritten after each seed (``complete`` false until the
    last one), so finished seeds survive a later failure.
    """
    out_dir = Path(out if out is not None else cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    report = {"config": cfg.to_dict(), "runs": rows, "summary": {}, "complete": False}
    for seed in cfg.seed_list:
        logger.info("seed %d: variant %s", seed, cfg.variant)
        rows.append(run_seed(cfg, seed, out_dir, include_control))
        report["summary"] = summarize(rows)
        _write_json(out_dir / "report.json", report)
    report["complete"] = True
    _write_json(out_dir / "report.json", report)
    (out_dir / "report.txt").write_text(format_report(report))
    return report


def ablate(cfg: ExperimentConfig, out=None) -> dict:
    """Full model and each single-component ablation on identical seeds and data."""
    out_dir = Path(out if out is not None else cfg.out)
    rows = []
    for variant in VARIANTS:
        rep = run(cfg.replace(variant=variant), out_dir / variant, include_control=False)
        stat = rep["summary"]["uni_hssl"]
        rows.append({
            "variant": variant,
            "per_seed": [r["uni_hssl"]["accuracy"] for r in rep["runs"]],
            "seeds": [r["seed"] for r in rep["runs"]],
            **stat,
        })
    baseline = summarize(rep["runs"])["supervised"]
    table = {"config": cfg.to_dict(), "rows": rows, "supervised": baseline}
    _write_json(out_dir / "ablation.json", table)
    header = ["variant"] + [f"seed {s}" for s in rows[0]["seeds"]] + ["mean (std)"]
    body = [[r["variant"]] + [f"{100 * a:.1f}" for a in r["per_seed"]] + [_fmt(r)] for r in rows]
    (out_dir / "ablation.txt").write_text(_table(header, body))
    return table


def sweep(cfg: ExperimentConfig, axis: str | None = None, grid=None, out=None) -> dict:
    """One full run per grid value of a single hyperparameter; writes ``sweep.csv``."""
    axis = axis or cfg.sweep_axis
    grid = list(grid if grid is not None else (cfg.sweep_grid or []))
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {sorted(SWEEP_AXES)}")
    if not grid:
        raise ConfigError("sweep grid must be nonempty")
    configs = [cfg.replace(hp=cfg.hp.replace(**{SWEEP_AXES[axis]: float(v)})) for v in grid]
    out_dir = Path(out if out is not None else cfg.out)
    reports = []
    for value, sub in zip(grid, configs):
        reports.append(run(sub, out_dir / f"{axis}={value!r}", include_control=False))
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis", "value", "mean_accuracy", "std_accuracy", "mean_accuracy_L", "mean_accuracy_U"])
        for value, rep in zip(grid, reports):
            s = rep["summary"]["uni_hssl"]
            w.writerow([axis, repr(float(value)), repr(s["mean"]), repr(s["std"]) if "std" in s else "",
                        repr(s["accuracy_L"]["mean"]) if "accuracy_L" in s else "",
                        repr(s["accuracy_U"]["mean"]) if "accuracy_U" in s else ""])
    return {"axis": axis, "grid": grid, "reports": reports}
