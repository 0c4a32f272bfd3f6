"""Concave-penalized least squares for sparse recovery and model selection.

The penalty family interpolates counting and absolute deviation; recovery
uses sequentially reweighted min-norm solves, selection uses local linear
approximation over a weighted lasso, and the certify module evaluates the
finite-sample recoverability and weak-oracle conditions numerically.
"""

from .certify import (
    LocalMinCertificate,
    OracleAudit,
    RecoveryCertificate,
    a_opt,
    a_opt_single_noise_column,
    recovery_condition,
    strict_local_min,
    weak_oracle_audit,
)
from .experiment import (
    MetricsRow,
    SimConfig,
    bic_select,
    cv_select,
    gen_design,
    prediction_error,
    run_study,
    success_rate,
)
from .linalg import (
    DesignProblem,
    gram_min_eigen,
    min_l2_solution,
    read_matrix,
    ridge_limit_apply,
    spark_bruteforce,
    write_matrix,
)
from .lla import SelectionFit, ZCertificate, lla_fit, weighted_lasso, zestimator_check
from .penalty import (
    PenaltySpec,
    continuity_threshold,
    local_concavity,
    max_concavity,
    rho,
    rho_bar,
    rho_prime,
    scalar_threshold,
)
from .sirs import (
    RecoveryResult,
    SirsConfig,
    check_fixed_point,
    sirs_auto,
    sirs_recover,
    sirs_step,
    sirs_weights,
)

__version__ = "0.1.0"
