"""Heterogeneous semi-supervised learning with a unified 2C-class classifier."""

from .data import HsslData, LabeledSet, SyntheticDomainSpec, TestSet, UnlabeledSet, flagship_spec, generate_synthetic
from .model import Model
from .trainer import Hyperparams, pretrain, train

__all__ = [
    "HsslData",
    "Hyperparams",
    "LabeledSet",
    "Model",
    "SyntheticDomainSpec",
    "TestSet",
    "UnlabeledSet",
    "flagship_spec",
    "generate_synthetic",
    "pretrain",
    "train",
]
__version__ = "0.1.0"
