"""Flat ``key = value`` experiment configuration.

Example::

    # flagship synthetic task
    data.source = synthetic
    synthetic.mean_spread = 1.0
    hp.lambda_pa = 0.01
    repetitions = 3
    out = runs/flagship

Keys are grouped by prefix: ``data.*`` chooses the data source, ``synthetic.*``
parameterizes :func:`unihssl.data.flagship_spec`, ``hp.*`` sets any
:class:`unihssl.trainer.Hyperparams` field, and the unprefixed keys are
``variant``, ``repetitions``, ``seeds``, ``out``, ``sweep.axis`` and
``sweep.grid``. A ``seeds`` list takes precedence over ``repetitions``.
Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..data import flagship_spec
from ..pseudolabel import ConfigError
from ..trainer import VARIANTS, Hyperparams

SWEEP_AXES = {"lambda_pa": "lambda_pa", "lambda_pl": "lambda_pl", "lambda_mixup": "lambda_mixup", "beta": "beta"}

_SYNTHETIC_DEFAULTS = {
    "n_classes": 5,
    "input_dim": 16,
    "mean_spread": 1.0,
    "shift_norm": 2.0,
    "power": 1.5,
    "n_l": 500,
    "n_u": 2000,
    "n_test": 1000,
    "test_u_fraction": 0.5,
    "geometry_seed": 0,
}


@dataclass
class ExperimentConfig:
    source: str = "synthetic"
    synthetic: dict[str, Any] = field(default_factory=lambda: dict(_SYNTHETIC_DEFAULTS))
    csv_path: str | None = None
    csv_n_classes: int | None = None
    split_fraction: float = 0.9
    hp: Hyperparams = field(default_factory=Hyperparams)
    variant: str = "full"
    repetitions: int = 3
    seeds: list[int] | None = None
    out: str = "runs/experiment"
    sweep_axis: str | None = None
    sweep_grid: list[float] | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be synthetic or csv, got {self.source!r}")
        if self.source == "csv" and (not self.csv_path or not self.csv_n_classes):
            raise ConfigError("csv data needs data.csv_path and data.n_classes")
        if self.source == "synthetic" and self.csv_path:
            raise ConfigError("give exactly one data source")
        unknown = set(self.synthetic) - set(_SYNTHETIC_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown synthetic keys: {sorted(unknown)}")
        if self.source == "synthetic" and int(self.synthetic["n_classes"]) < 2:
            raise ConfigError("prototype alignment needs at least two classes")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.seeds is not None and len(self.seeds) != self.repetitions:
            raise ConfigError("number of seeds must equal repetitions")
        if self.sweep_axis is not None:
            if self.sweep_axis not in SWEEP_AXES:
                raise ConfigError(f"sweep axis must be one of {sorted(SWEEP_AXES)}")
            if not self.sweep_grid:
                raise ConfigError("sweep grid must be nonempty")

    @property
    def seed_list(self) -> list[int]:
        return list(self.seeds) if self.seeds is not None else [self.hp.seed + i for i in range(self.repetitions)]

    def spec(self):
        return flagship_spec(**self.synthetic)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        hp = dataclasses.asdict(self.hp)
        hp["hidden_dims"] = list(hp["hidden_dims"])
        return {
            "source": self.source,
            "synthetic": dict(self.synthetic) if self.source == "synthetic" else None,
            "csv_path": self.csv_path,
            "csv_n_classes": self.csv_n_classes,
            "split_fraction": self.split_fraction,
            "hp": hp,
            "variant": self.variant,
            "repetitions": self.repetitions,
            "seeds": self.seed_list,
            "sweep_axis": self.sweep_axis,
            "sweep_grid": self.sweep_grid,
        }


def _parse_value(raw: str, like: Any):
    raw = raw.strip()
    if isinstance(like, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if isinstance(like, tuple):
        return tuple(int(v) for v in raw.split(",") if v.strip())
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float) or like is None:
        if raw.lower() == "none":
            return None
        return float(raw)
    return raw


def _float_list(raw: str) -> list[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad numeric list {raw!r}") from None


def apply_settings(cfg: ExperimentConfig, settings: dict[str, str]) -> ExperimentConfig:
    """Return a new config with ``key -> raw string`` settings applied."""
    kw: dict[str, Any] = {}
    synthetic = dict(cfg.synthetic)
    hp_changes: dict[str, Any] = {}
    hp_fields = {f.name: getattr(cfg.hp, f.name) for f in dataclasses.fields(Hyperparams)}
    for key, raw in settings.items():
        key = key.strip()
        try:
            if key.startswith("hp."):
                name = key[3:]
                if name not in hp_fields:
                    raise ConfigError(f"unknown hyperparameter {name!r}")
                hp_changes[name] = _parse_value(raw, hp_fields[name])
            elif key.startswith("synthetic."):
                name = key[len("synthetic."):]
                if name not in _SYNTHETIC_DEFAULTS:
                    raise ConfigError(f"unknown synthetic key {name!r}")
                synthetic[name] = _parse_value(raw, _SYNTHETIC_DEFAULTS[name])
            elif key == "data.source":
                kw["source"] = raw.strip()
            elif key == "data.csv_path":
                kw["csv_path"] = raw.strip()
            elif key == "data.n_classes":
                kw["csv_n_classes"] = int(raw)
            elif key == "data.split_fraction":
                kw["split_fraction"] = float(raw)
            elif key == "variant":
                kw["variant"] = raw.strip()
            elif key == "repetitions":
                kw["repetitions"] = int(raw)
            elif key == "seeds":
                kw["seeds"] = [int(v) for v in raw.split(",") if v.strip()]
            elif key == "out":
                kw["out"] = raw.strip()
            elif key == "sweep.axis":
                kw["sweep_axis"] = raw.strip()
            elif key == "sweep.grid":
                kw["sweep_grid"] = _float_list(raw)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key}: {raw!r}") from None
    if "seeds" in kw:
        kw["repetitions"] = len(kw["seeds"])  # an explicit seed list fixes the count
    return cfg.replace(hp=cfg.hp.replace(**hp_changes), synthetic=synthetic, **kw)


def parse_config_text(text: str) -> dict[str, str]:
    settings = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        settings[key.strip()] = value.strip()
    return settings


def load_config(path=None, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    settings = parse_config_text(Path(path).read_text()) if path else {}
    settings.update(overrides or {})
    return apply_settings(ExperimentConfig(), settings)
