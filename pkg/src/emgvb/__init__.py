"""Natural-gradient Gaussian variational inference on the precision manifold."""
from . import estimators, models, optimizer, spd
from ._kernels import BACKEND
from .estimators import DrawBatch, EstimatorKind
from .gaussian import NaturalGradientPair, PosteriorStructure, VariationalState, kl_gaussian
from .models import PriorSpec
from .optimizer import OptimizerKind, RunTrace, TrainerConfig, run, run_block_diagonal

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DrawBatch",
    "EstimatorKind",
    "NaturalGradientPair",
    "OptimizerKind",
    "PosteriorStructure",
    "PriorSpec",
    "RunTrace",
    "TrainerConfig",
    "VariationalState",
    "estimators",
    "kl_gaussian",
    "models",
    "optimizer",
    "run",
    "run_block_diagonal",
    "spd",
]
