"""Set-valued multi-class prediction.

Converts per-sample class-probability scores into label-set predictions
under eight optimization formulations (fixed-size top-k, point-wise and
average error control, average size control, a penalized trade-off, two
hybrid constraint combinations, and F-score maximization), together with
the data-driven calibration of every distribution-dependent threshold and
an evaluation harness for error/size trade-off curves.
"""

from .core import (
    ScoreSet,
    TieBreakPolicy,
    softmax,
    threshold_set,
    top_indices,
    validate_probability_vector,
)
from .formulations import (
    FormulationSpec,
    Kind,
    MODE_LEMMA_THRESHOLD,
    MODE_UNION_POINTWISE,
    predict_fscore,
    predict_hybrid_error,
    predict_hybrid_size,
    predict_penalized,
    predict_pointwise_error,
    predict_top_k,
    predict_with_threshold,
)
from .calibration import (
    CalibratedClassifier,
    EmpiricalStepFunction,
    FeasibilityReport,
    calibrate,
    feasibility_check,
    fit_average_error,
    fit_average_size,
    fit_fscore,
    fit_hybrid_error,
    fit_hybrid_size,
    fit_temperature,
    generalized_inverse,
    pointwise_offset,
)
from .evaluation import (
    MetricsReport,
    PerClassViolation,
    SizeErrorHistogram,
    SweepCurve,
    SweepPoint,
    evaluate,
    per_class_violation,
    size_error_histogram,
    sweep,
)
from .oracle import (
    AssignmentClassifier,
    BruteForceResult,
    DiscreteDistribution,
    brute_force_avg_error_with_size_cap,
    brute_force_optimal,
    exact_error,
    exact_size,
    exact_threshold_functions,
    make_distribution,
    sample_scores,
    synth_generate,
)
from . import errors

__version__ = "0.1.0"
__all__ = [name for name in dir() if not name.startswith("_")]
