"""Sequential response-surface design optimization.

Radial-basis-function metamodels are refit on maximin samples inside a
shrinking region of interest; a genetic algorithm with gradient polishing
finds the predicted optimum of each iteration.
"""

from .optimizer import OptimizerConfig, hybrid_optimize
from .problem import ConstraintSpec, Curve, ObjectiveSpec
from .sampling import maximin_fill
from .sensitivity import SobolResult, aggregate_ranking, sobol
from .space import DesignPoint, DesignSpace, Region, get_preset
from .srsm import RunResult, SRSMRunner, SRSMSettings
from .surrogate import RBFModel, fit_rbf, predict

__version__ = "0.1.0"

__all__ = [
    "ConstraintSpec",
    "Curve",
    "DesignPoint",
    "DesignSpace",
    "ObjectiveSpec",
    "OptimizerConfig",
    "RBFModel",
    "Region",
    "RunResult",
    "SRSMRunner",
    "SRSMSettings",
    "SobolResult",
    "aggregate_ranking",
    "fit_rbf",
    "get_preset",
    "hybrid_optimize",
    "maximin_fill",
    "predict",
    "sobol",
]
