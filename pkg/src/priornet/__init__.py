"""Differential gene network inference with pathway-guided penalties."""

from .datamodel import ExpressionMatrix, Signature, load_expression
from .errors import EmptyAfterFilter, PriornetError
from .pipeline import PipelineConfig, run_pipeline

__all__ = [
    "EmptyAfterFilter",
    "ExpressionMatrix",
    "PipelineConfig",
    "PriornetError",
    "Signature",
    "load_expression",
    "run_pipeline",
]
__version__ = "0.1.0"
