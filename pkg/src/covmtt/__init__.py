"""Multi-level thresholding tests for equality of two high-dimensional
covariance matrices, with Gumbel and parametric-bootstrap calibration,
comparison tests, Monte Carlo harness, and detection-boundary functions."""

from .boundary import (
    BoundaryQuery,
    gaussian_theta,
    phase_table,
    rho_mean,
    rho_star,
    signal_range,
    standardized_signal,
)
from .bootstrap import (
    BootstrapNull,
    PdCovEstimate,
    bootstrap_null,
    bootstrap_p_value,
    mtt_test_bootstrap,
    pd_pooled_covariance,
)
from .errors import DataError, NumericError
from .experiments import (
    SimConfig,
    SimResult,
    p_from_rule,
    run_power,
    run_size,
    size_adjusted_critical,
)
from .grids import (
    DiffGrid,
    MomentSet,
    SampleMatrix,
    compute_moments,
    correlation_diff_grid,
    diff_grid,
)
from .mtt import (
    TestOutcome,
    ThresholdParams,
    ThresholdScan,
    gumbel_a,
    gumbel_b,
    gumbel_upper_quantile,
    lambda_p,
    mtt_critical_value,
    mtt_scan,
    mtt_test_asymptotic,
    null_mean_tilde,
    null_var_tilde,
    single_level_test,
    t_stat,
    threshold_candidates,
)
from .rivals import RivalConfig, clx_statistic, lc_statistic, lc_test_statistic, rival_test
from .simulate import (
    DesignSpec,
    GeneratedPair,
    SignalSpec,
    build_signal_u,
    build_sigma_base,
    design_d0,
    design_permutation,
    epsilon_c,
    generate_pair,
    signal_counts,
)

__version__ = "0.1.0"
