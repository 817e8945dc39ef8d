"""Two-sample testing for multi-source data with block-wise missingness.

The test partitions rows by their pattern of observed sources, builds a
neighbor-rank graph inside and across patterns on overlapping coordinates
only, and compares group rank sums against their exact pattern-wise
permutation moments.  Works without imputation and without discarding
incomplete rows.

Typical use::

    import brise

    data = brise.ingest("measurements.csv", "schema.json")
    result = brise.run_test(data, method="BRISE-c", k=10)
    print(result.p_value)
"""

from .datamodel import (
    MultiSourceDataset,
    PatternPartition,
    SourceSchema,
    dataset_from_arrays,
    filter_patterns,
    ingest,
    load_schema,
    partition,
    validation_report,
)
from .errors import (
    AllMissingRowError,
    BriseError,
    DegeneratePatternError,
    EmptyAfterFilterError,
    EmptyCandidatesError,
    GroupVanishedError,
    InsufficientPatternSizeError,
    InvalidConfigError,
    InvalidKError,
    NonNumericValueError,
    NumericOverflowError,
    PartialBlockError,
    SchemaMismatchError,
    SingularCovarianceError,
    TooLargeError,
)
from .metrics import SourceMetric, default_metric, register_source_metric
from .pipeline import (
    INFERENCE_ASYMPTOTIC,
    INFERENCE_PATTERN_PERM,
    INFERENCE_STANDARD_PERM,
    run_diagnostics,
    run_test,
)
from .simulate import SimulationConfig, generate_sample, power_curve, simulate, summarize
from .statistics import METHOD_CONGREGATED, METHOD_VECTORIZED, TestResult

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "MultiSourceDataset",
    "PatternPartition",
    "SourceSchema",
    "dataset_from_arrays",
    "filter_patterns",
    "ingest",
    "load_schema",
    "partition",
    "validation_report",
    "SourceMetric",
    "default_metric",
    "register_source_metric",
    "run_test",
    "run_diagnostics",
    "TestResult",
    "SimulationConfig",
    "generate_sample",
    "simulate",
    "summarize",
    "power_curve",
    "METHOD_CONGREGATED",
    "METHOD_VECTORIZED",
    "INFERENCE_ASYMPTOTIC",
    "INFERENCE_PATTERN_PERM",
    "INFERENCE_STANDARD_PERM",
    "BriseError",
    "SchemaMismatchError",
    "PartialBlockError",
    "AllMissingRowError",
    "NonNumericValueError",
    "EmptyAfterFilterError",
    "GroupVanishedError",
    "InvalidKError",
    "EmptyCandidatesError",
    "DegeneratePatternError",
    "InsufficientPatternSizeError",
    "TooLargeError",
    "SingularCovarianceError",
    "NumericOverflowError",
    "InvalidConfigError",
]
