"""Network synthesis: local Taylor realization, sharpening, and spline implementation."""

from .local import local_approx, realize_target, taylor_target
from .nd import NDSynthesis, expected_units, implement_spline_nd, polish_pinned, synthesize_spline_nd
from .network import NetworkError, TwoLayerNet, Unit, l2_error, net_from_arrays
from .sharpen import SharpenError, SharpenResult, adapted_one_unit_error, one_unit_error, sharpen
from .spline1d import (
    KnotReport,
    RankDeficientError,
    SplineMatrix,
    SplineSynthesis,
    SynthesisError,
    add_negative_unit,
    block_determinant_check,
    implement_spline_1d,
    refit_lambdas,
    solve_spline_matrix,
    spline_matrix,
    synthesize_spline_1d,
    tanh_constant_compensation,
    truncation_error,
)

__all__ = [
    "KnotReport",
    "NDSynthesis",
    "NetworkError",
    "RankDeficientError",
    "SharpenError",
    "SharpenResult",
    "SplineMatrix",
    "SplineSynthesis",
    "SynthesisError",
    "TwoLayerNet",
    "Unit",
    "adapted_one_unit_error",
    "add_negative_unit",
    "block_determinant_check",
    "expected_units",
    "implement_spline_1d",
    "implement_spline_nd",
    "l2_error",
    "local_approx",
    "net_from_arrays",
    "one_unit_error",
    "polish_pinned",
    "realize_target",
    "refit_lambdas",
    "sharpen",
    "solve_spline_matrix",
    "spline_matrix",
    "synthesize_spline_1d",
    "tanh_constant_compensation",
    "taylor_target",
    "truncation_error",
]
