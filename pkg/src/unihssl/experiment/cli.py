"""Command line entry point: ``unihssl <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..data import write_csv
from ..model import load_checkpoint, save_checkpoint
from ..pseudolabel import ConfigError
from ..trainer import pretrain
from .config import load_config
from .evaluate import evaluate
from .runner import ablate, format_report, load_data, run, sweep


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--seed", type=int, help="run a single seed")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--variant", help="ablation variant (full, no_wma, no_sup, no_pl, no_pa, no_mixup, no_prog_mixup)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unihssl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("gen-data", "write a synthetic task as CSV"),
        ("pretrain", "pre-train the C-class model and save it"),
        ("train", "full training run(s) with report"),
        ("eval", "evaluate a saved checkpoint on the test split"),
        ("ablate", "full model plus the six ablation variants"),
        ("sweep", "sensitivity sweep over one hyperparameter"),
    ]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "eval":
            p.add_argument("--checkpoint", type=Path, required=True)
        if name == "sweep":
            p.add_argument("--sweep", dest="axis", help="lambda_pa, lambda_pl, lambda_mixup or beta")
            p.add_argument("--grid", help="comma separated values")
    return parser


def _config(args):
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k] = v
    if args.seed is not None:
        overrides["seeds"] = str(args.seed)
    if args.variant:
        overrides["variant"] = args.variant
    if args.out:
        overrides["out"] = str(args.out)
    if getattr(args, "axis", None):
        overrides["sweep.axis"] = args.axis
    if getattr(args, "grid", None):
        overrides["sweep.grid"] = args.grid
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        out = Path(cfg.out)
        seed = cfg.seed_list[0]
        if args.command == "gen-data":
            data = load_data(cfg, seed)
            out.mkdir(parents=True, exist_ok=True)
            x = np.concatenate([data.labeled.x, data.unlabeled.x])
            u_labels = data.unlabeled.hidden_labels
            labels = np.concatenate([data.labeled.labels, u_labels if u_labels is not None else -np.ones(len(data.unlabeled), int)])
            domains = ["L"] * len(data.labeled) + ["U"] * len(data.unlabeled)
            write_csv(out / f"data-{seed}.csv", x, labels, domains)
            print(out / f"data-{seed}.csv")
        elif args.command == "pretrain":
            data = load_data(cfg, seed)
            pre = pretrain(data.labeled, cfg.hp.replace(seed=seed))
            out.mkdir(parents=True, exist_ok=True)
            save_checkpoint(pre.model, out / f"pretrained-{seed}.npz")
            print(json.dumps(evaluate(pre.model, data.test, data.n_classes), indent=2, sort_keys=True))
        elif args.command == "train":
            print(format_report(run(cfg)), end="")
        elif args.command == "eval":
            data = load_data(cfg, seed)
            model = load_checkpoint(args.checkpoint)
            print(json.dumps(evaluate(model, data.test, data.n_classes), indent=2, sort_keys=True))
        elif args.command == "ablate":
            ablate(cfg)
            print((out / "ablation.txt").read_text(), end="")
        elif args.command == "sweep":
            sweep(cfg)
            print((out / "sweep.csv").read_text(), end="")
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
