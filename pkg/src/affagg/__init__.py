"""Penalized aggregation of affine estimators in the sequence model, with a
Monte Carlo harness verifying the supporting risk bounds and identities."""

from .aggregators import (ConvexGridQAggregation, CpAggregation, CpSelection,
                          KRegressorAggregation, PluginVarianceQAggregation,
                          PriorQAggregation, QAggregation, SparsityPatternAggregation)
from .criteria import (ObjectiveSpec, Prior, QPProblem, SimplexPoint, cp_criterion, delta_jk,
                       decomposition_qv, h_pen, penalty, qp_reduce, u_objective, v_pen, w_pen)
from .errors import (AdmissibilityWarning, AffAggError, AggregationError, ConfigError,
                     ConvergenceError, DimensionMismatch, DomainError, EnumerationCapError)
from .estimators import (AffineEstimator, EstimatorBank, ProjectionResult, SmoothnessGrid,
                         difference_variance, make_projection, mix, monotone_filter_weights,
                         smoothness_estimators, smoothness_grid)
from .procedures import (AggregateOutput, ConvexAggregate, MaureyGrid, SparsitySpec,
                         convex_aggregate, cp_minimize, erm_cp_select, kregressor_aggregate,
                         maurey_bound, maurey_gap, maurey_grid, maurey_grid_explicit, maurey_m,
                         q_aggregate, q_aggregate_plugin_variance, q_aggregate_prior,
                         q_aggregate_subgaussian, sparsity_pattern_aggregate)
from .simplex_qp import SolveResult, brute_force_grid, kkt_residual, project_simplex, solve_qp
from .simulation import (IdentityReport, NoiseModel, TailCheckReport, TrialConfig, TrialRecord,
                         chaos_tail_check, expectation_identity_check, gen_noise,
                         linear_tail_check, run_trials, strong_convexity_probe, tail_check,
                         wilson_upper)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
