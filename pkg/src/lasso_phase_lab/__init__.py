"""Sign-recovery experiments for the Lasso on Gaussian random designs."""

from .ensemble import (
    Covariance,
    CovarianceKind,
    CovarianceSpec,
    ProblemInstance,
    Regime,
    SparseSignal,
    build_covariance,
    make_signal,
    normalize_columns,
    observe,
    sample_design,
    sparsity_index,
)
from .solver import (
    LassoSolution,
    SolverOptions,
    kkt_residual,
    recovery_success,
    sign_pattern,
    solve_lasso,
)
from .conditions import (
    DesignConditionReport,
    RecoveryCertificate,
    UVVariables,
    compute_uv,
    design_report,
    lemma1_check,
    population_constants,
    sample_incoherence,
)
from .theory import (
    MnMoments,
    ScheduleParams,
    ThresholdPair,
    gaussian_max_bound,
    inverse_wishart_mean,
    lambda_schedule,
    mn_moments,
    sample_size,
    schedule,
    thresholds,
    toeplitz_eigen_extremes,
    u_stat_moments,
)
from .experiment import (
    ExperimentConfig,
    StatConfig,
    StatReport,
    SuccessMode,
    SweepCell,
    SweepResult,
    TrialOutcome,
    crossing,
    run_sweep,
    run_trial,
    smoothed_curve,
    transition_width,
    validate_statistics,
    wilson_interval,
)

__version__ = "0.1.0"
