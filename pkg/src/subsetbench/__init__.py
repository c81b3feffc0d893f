"""subsetbench: variable-selection benchmarking at desk scale.

Four selection methods built from first principles (exact best subset
search with branch-and-bound certification, forward stepwise, Lasso and
elastic-net coordinate-descent paths), synthetic and semi-synthetic
scenario generators, best-possible-score evaluation, and a reproducible
experiment harness with a CLI.
"""

from .bss import (
    BssSolution,
    bss_branch_and_bound,
    bss_exhaustive,
    bss_warm_start,
)
from .config import ExperimentConfig, enumerate_grid, load_config
from .datagen import (
    SNR_GRID,
    BetaSpec,
    CovarianceSpec,
    Placement,
    ScenarioSpec,
    Structure,
    build_covariance,
    child_seed,
    noise_variance,
    place_beta,
    sample_dataset,
)
from .enet import (
    RegularizationPath,
    enet_coordinate_descent,
    enet_path,
    lambda_grid,
    lasso_path,
)
from .errors import (
    ConfigError,
    ConstantColumnError,
    ConvergenceWarning,
    DegenerateSignalError,
    FactorizationFailureError,
    InstanceTooLargeError,
    InsufficientColumnsError,
    InvalidBlockPartitionError,
    MissingValueError,
    ParseError,
    SubsetBenchError,
)
from .harness import (
    ResultRecord,
    build_dataset_for,
    certification_study,
    emit_plot_data,
    run_experiment,
    run_replication,
    summarize,
)
from .lstsq import least_squares_on_support
from .metrics import (
    ConfusionCounts,
    Metric,
    MetricScore,
    best_possible,
    confusion,
    score,
    tune_to_subset_size,
)
from .model import (
    Dataset,
    Method,
    SelectionResult,
    TuningRecord,
    standardize_columns,
    support_of,
)
from .semisynthetic import (
    ExpressionMatrix,
    SemiSyntheticSpec,
    build_semisynthetic,
    load_expression_matrix,
    mean_true_correlation,
)
from .stepwise import FssStep, FssTrace, forward_stepwise

__version__ = "0.1.0"
