"""Tiered scalarization for hierarchical multi-objective Bayesian optimization."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("tierbo")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .objectives import Hierarchy, ObjectiveSpec
from .scalar import ScoreParams, botier_score, chimera_score, penalty_score

__all__ = [
    "Hierarchy",
    "ObjectiveSpec",
    "ScoreParams",
    "__version__",
    "botier_score",
    "chimera_score",
    "penalty_score",
]
