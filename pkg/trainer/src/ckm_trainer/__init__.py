"""Training pipeline for the neural channel-knowledge-map predictors."""

from .train import TrainConfig, fit_lps, fit_se
from .baselines import baseline_lstm_se, baseline_mlp_lps

__version__ = "0.1.0"
