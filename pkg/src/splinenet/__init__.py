"""Constructive synthesis and unit-level analysis of two-layer smooth networks."""

__version__ = "0.1.0"

from .activation import LOGISTIC, TANH, ActivationKind, custom, from_tag
from .analyzer import Analysis, Thresholds, Verdict, analyze
from .expr import CATALOG, Expression, ExpressionError, parse_expression
from .polyspline import Spline1D, StandardPartitionSpline, construct_spline_from_derivative, construct_spline_nd
from .synth import TwoLayerNet, Unit, synthesize_spline_1d, synthesize_spline_nd
from .trainer import Dataset, TrainConfig, init_net, train

__all__ = [
    "CATALOG",
    "LOGISTIC",
    "TANH",
    "ActivationKind",
    "Analysis",
    "Dataset",
    "Expression",
    "ExpressionError",
    "Spline1D",
    "StandardPartitionSpline",
    "Thresholds",
    "TrainConfig",
    "TwoLayerNet",
    "Unit",
    "Verdict",
    "analyze",
    "construct_spline_from_derivative",
    "construct_spline_nd",
    "custom",
    "from_tag",
    "init_net",
    "parse_expression",
    "synthesize_spline_1d",
    "synthesize_spline_nd",
    "train",
]
