"""Differentially private release of average-distance queries.

A database is a multiset of points in a bounded metric space; a query is a
point y and the answer is the average distance from y to the database. The
interactive mechanism answers adversarially chosen queries to additive
accuracy alpha under (epsilon, delta) differential privacy by maintaining a
piecewise linear underestimate of the per-coordinate average-distance
functions and paying privacy budget only when the estimate is caught out.
An offline variant drives the same machinery over a fixed grid and releases
a synopsis that answers every future query for free. Metrics that are not
already l1 are handled by randomized embeddings into l1.
"""

from . import kernels
from .embed import (BourgainMap, EmbeddingQuality, PipelineResult,
                    ProjectionMap, build_bourgain, build_projection,
                    measure_quality, projection_image_dim,
                    release_via_embedding)
from .engine import (BudgetError, BudgetLedger, CalibrationError, NoiseKind,
                     NoisePlan, PrivacyParams, Sampler, calibrate,
                     calibration_residual, exact_plan, mistake_budget,
                     sample_gaussian, sample_laplace, tail_probability)
from .learner import (DecomposableHypothesis, OracleReading,
                      PiecewiseLinearHypothesis, exact_mistake_bound,
                      noisy_mistake_bound)
from .metric import (Database, MetricKind, MetricSpec, ParseError, QuerySet,
                     avg_distance, coord_value, coord_subgradient,
                     cross_distances, load_labels, load_matrix, load_points,
                     oracle_answers, save_points, sensitivity_probe,
                     validate_matrix)
from .release import (AnswerRecord, InteractiveMechanism, OfflineSummary,
                      RunStats, offline_grid, release_offline)

__version__ = "0.1.0"

__all__ = [
    "AnswerRecord", "BourgainMap", "BudgetError", "BudgetLedger",
    "CalibrationError", "Database", "DecomposableHypothesis",
    "EmbeddingQuality", "InteractiveMechanism", "MetricKind", "MetricSpec",
    "NoiseKind", "NoisePlan", "OfflineSummary", "OracleReading", "ParseError",
    "PipelineResult", "PiecewiseLinearHypothesis", "PrivacyParams",
    "ProjectionMap", "QuerySet", "RunStats", "Sampler", "avg_distance",
    "build_bourgain", "build_projection", "calibrate",
    "calibration_residual", "coord_subgradient", "coord_value",
    "cross_distances", "exact_mistake_bound", "exact_plan", "kernels",
    "load_labels", "load_matrix", "load_points", "measure_quality",
    "mistake_budget", "noisy_mistake_bound", "offline_grid",
    "oracle_answers", "projection_image_dim", "release_offline",
    "release_via_embedding", "sample_gaussian", "sample_laplace",
    "save_points", "sensitivity_probe", "tail_probability",
    "validate_matrix",
]
