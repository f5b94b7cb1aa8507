"""
countate - average treatment effects for count outcomes by fast Bayesian imputation.

"In a world of missing counterfactuals, impute responsibly." — schema.cx
"""

__version__ = "0.1.0"
__license__ = "MIT"

from .models import (
    AteEstimate,
    Chain,
    Dataset,
    ModelSpec,
    Overdispersion,
    ParameterState,
    ZeroPolicy,
)
from .validation import CountateError, NumericalError, ValidationError

__all__ = [
    "AteEstimate",
    "Chain",
    "CountateError",
    "Dataset",
    "ModelSpec",
    "NumericalError",
    "Overdispersion",
    "ParameterState",
    "ValidationError",
    "ZeroPolicy",
    "__version__",
]
