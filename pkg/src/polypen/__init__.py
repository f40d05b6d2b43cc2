"""polypen: penalized M-estimation with polyhedral penalties.

Finite-sample solvers, the corresponding asymptotic limit problem, and tools
for studying which discrete model patterns (supports, sign vectors, ordering
clusters, fused segments) the estimators recover.
"""

from .errors import (
    ConfigError,
    DimensionMismatch,
    InvalidPattern,
    InvalidPenalty,
    InvalidResponse,
    InvalidScenario,
    NoClosedForm,
    NoConvergedReplications,
    NotConverged,
    NotPositiveDefinite,
    PolypenError,
    RankDeficientBasis,
    SeparableData,
    SingularEstimate,
)
from .numerics import RngStream, cholesky, projector, sample_gaussian, solve_spd, symmetric_sqrt
from .penalty import (
    DirectionalPenalty,
    Pattern,
    PenaltySpec,
    directional,
    limit_pattern,
    pattern,
    pattern_basis,
    prox,
    subdiff_contains,
    subdiff_distance,
    subdiff_parallel_basis,
    subdiff_ri_point,
)
from .loss import LossSpec, MomentPair, NoiseSpec, moments_analytic, moments_mc
from .solver import Dataset, SolveOptions, SolveReport, fit, minimize_limit, prox_two_step
from .asymptotics import (
    IrrepResult,
    LimitLaw,
    PatternDistribution,
    RecoveryProbability,
    SweepPoint,
    alpha_sweep_recovery,
    irrepresentability_check,
    limit_pattern_distribution,
    recovery_gaussian,
    recovery_probability_formula,
    sample_limit,
)
from .datagen import (
    DesignSpec,
    ScenarioSpec,
    build_covariance,
    gen_dataset,
    normal_quantile,
    paper_penalty,
    paper_scenario,
)
from .metrics import (
    RecoveryRate,
    ReplicationResult,
    empirical_pattern_distribution,
    recovery_rate,
    residual_errors,
    rmse,
    tv_distance,
)
from .experiments import (
    ExperimentConfig,
    ResultRow,
    ResultTable,
    cli_main,
    emit_csv,
    emit_plot,
    run_experiment,
)

__version__ = "0.1.0"
