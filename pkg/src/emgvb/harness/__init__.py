from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .data import Dataset, load_csv, load_labor, make_conjugate, simulate_garch
from .experiment import build_problem, run_experiment
from .mcmc import effective_sample_size, metropolis_sample
from .metrics import classification_metrics, regression_metrics

__all__ = [
    "ConfigError",
    "Dataset",
    "ExperimentConfig",
    "build_problem",
    "classification_metrics",
    "effective_sample_size",
    "load_config",
    "load_csv",
    "load_labor",
    "make_conjugate",
    "metropolis_sample",
    "parse_config",
    "regression_metrics",
    "run_experiment",
    "simulate_garch",
]
