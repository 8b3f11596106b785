__version__ = "0.1.0"

from .config import CondenseConfig, EvalConfig
from .exceptions import (
    BundleLoadError,
    ConfigurationError,
    DomainError,
    EvaluationError,
    HydroError,
    NumericalError,
    SamplingError,
    UnsupportedOperationError,
    ValidationError,
)
from .graphs import CondensedGraph, GraphBundle, WeightedGraph
from .helper import MetricReport, SelectionResult, Split
