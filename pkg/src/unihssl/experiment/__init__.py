"""Configuration, evaluation protocol, ablations, sweeps and the CLI."""

from .config import ExperimentConfig, load_config
from .evaluate import evaluate, evaluate_predictions, semantic_collapse
from .runner import ablate, run, sweep

__all__ = ["ExperimentConfig", "ablate", "evaluate", "evaluate_predictions", "load_config", "run",
           "semantic_collapse", "sweep"]
