"""Outlier-robust stacked aggregation of per-device ensembles.

Trains a small feedforward network to approximate a soft minimum (or
maximum) over a fixed ensemble of device models, weighting the selected
members by their reciprocal Local Outlier Factor.
"""

from .aggnet import NetConfig
from .ensemble import SOFT_MAX, SOFT_MIN, predict_ensemble, select_k
from .lof import lof_scores, lof_weights
from .synthgen import SynthConfig, generate_dataset, artificial_config
from .trainer import OrsaConfig, compute_targets, oracle_target, train

__version__ = "0.1.0"

__all__ = [
    "NetConfig", "OrsaConfig", "SynthConfig", "SOFT_MAX", "SOFT_MIN",
    "compute_targets", "generate_dataset", "lof_scores", "lof_weights",
    "oracle_target", "artificial_config", "predict_ensemble", "select_k", "train",
]
