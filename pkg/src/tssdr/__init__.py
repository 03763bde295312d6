"""Supervised dimension reduction for multivariate time series.

The estimators find the few linear combinations of a predictor panel, and
the lags at which they act, that carry the information about a response
series: a first-moment method (TSIR), a second-moment method (TSAVE) that
also detects symmetric dependence, and their convex hybrid (TSSH).  The
package ships the full experimental harness around them: seeded process
simulation, response slicing, approximate joint diagonalization, source/lag
selection strategies, rolling-window spline prediction, and a config-driven
benchmark runner.
"""

from .errors import (
    DegenerateSliceError,
    DegenerateStackError,
    EmptyDesignError,
    InvalidInputError,
    InvalidSpecError,
    ReportSchemaError,
    SingularMatrixError,
    TooManySlicesError,
    TssdrError,
)
from .estimators import (
    FitResult,
    VectorizedFitResult,
    check_affine_equivariance,
    tsdr_fit,
    vectorized_fit,
)
from .linalg import fixed_point_diag, inv_sqrt, joint_diag, sym_eig
from .predict import (
    PredictorConfig,
    RMSEReport,
    bspline_basis,
    build_design,
    oracle_forecast,
    rolling_forecast,
)
from .selection import SelectionResult, expected_structure_check, select
from .supervision import (
    SliceAssignment,
    hybrid_matrix,
    moment_stack,
    slice_response,
    tsave_matrix,
    tsir_matrix,
)
from .tsgen import (
    ProcessSpec,
    SimulationSpec,
    gen_component,
    gen_sources,
    make_response,
    make_simulation,
    mix,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "TssdrError", "InvalidInputError", "InvalidSpecError", "SingularMatrixError",
    "DegenerateStackError", "DegenerateSliceError", "TooManySlicesError",
    "EmptyDesignError", "ReportSchemaError",
    "sym_eig", "inv_sqrt", "joint_diag", "fixed_point_diag",
    "ProcessSpec", "SimulationSpec", "gen_component", "gen_sources", "mix",
    "make_response", "simulate", "make_simulation",
    "SliceAssignment", "slice_response", "tsir_matrix", "tsave_matrix",
    "hybrid_matrix", "moment_stack",
    "FitResult", "VectorizedFitResult", "tsdr_fit", "check_affine_equivariance",
    "vectorized_fit",
    "SelectionResult", "select", "expected_structure_check",
    "PredictorConfig", "RMSEReport", "bspline_basis", "build_design",
    "rolling_forecast", "oracle_forecast",
]
