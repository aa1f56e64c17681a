"""One-call aggregation procedures over a bank of affine estimators.

Each procedure reduces its objective to a simplex QP through the Gram matrix,
solves it, and returns the mixing weights together with the mixed fit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations, combinations_with_replacement

import numpy as np

from .criteria import (ObjectiveSpec, Prior, QPProblem, SimplexPoint, mixture_fit, qp_reduce)
from .errors import AdmissibilityWarning, AggregationError, DomainError, EnumerationCapError
from .estimators import (AffineEstimator, EstimatorBank, column_subset_projectors,
                         make_projection, mix)
from .simplex_qp import SolveResult, solve_qp
from .validation import as_matrix, as_vector, check_nonnegative

DEFAULT_GRID_CAP = 200_000
DEFAULT_SUPPORT_CAP = 100_000
DEFAULT_KMAX = 8


@dataclass(frozen=True)
class AggregateOutput:
    """Result of an aggregation procedure."""

    theta: SimplexPoint
    fitted: np.ndarray
    solve: SolveResult
    objective_kind: str


def _warn_if_inadmissible(bank: EstimatorBank) -> None:
    if bank.max_operator_norm > 1.0 + 1e-8:
        warnings.warn(
            f"bank contains a linear part with operator norm {bank.max_operator_norm:.4g} > 1; "
            "the sharp risk bounds assume admissible estimators",
            AdmissibilityWarning, stacklevel=3)


def _aggregate(bank: EstimatorBank, spec: ObjectiveSpec, tol, max_iter) -> AggregateOutput:
    problem = qp_reduce(bank, spec)
    solve = solve_qp(problem, tol=tol, max_iter=max_iter)
    if not solve.converged:
        raise AggregationError(
            f"QP solver did not converge for objective {spec.kind!r} "
            f"(kkt residual {solve.kkt_residual:.3g} after {solve.iterations} iterations)",
            solve_result=solve)
    fitted = mixture_fit(bank, solve.theta)
    return AggregateOutput(solve.theta, fitted, solve, spec.kind)


def q_aggregate(bank: EstimatorBank, sigma2: float, tol: float | None = None,
                max_iter: int | None = None) -> AggregateOutput:
    """Penalized aggregation: minimize the Cp criterion plus half the
    vertex-vanishing penalty over the simplex."""
    check_nonnegative(sigma2, "sigma2")
    _warn_if_inadmissible(bank)
    return _aggregate(bank, ObjectiveSpec.h_pen(sigma2), tol, max_iter)


def q_aggregate_prior(bank: EstimatorBank, sigma2: float, prior: Prior,
                      tol: float | None = None, max_iter: int | None = None) -> AggregateOutput:
    """Prior-weighted variant: adds 46 sigma^2 sum theta_j log(1/pi_j)."""
    check_nonnegative(sigma2, "sigma2")
    _warn_if_inadmissible(bank)
    return _aggregate(bank, ObjectiveSpec.v_pen(sigma2, prior), tol, max_iter)


def q_aggregate_plugin_variance(bank: EstimatorBank, sigma2_hat: float,
                                tol: float | None = None,
                                max_iter: int | None = None) -> AggregateOutput:
    """Variance plug-in variant; the robustness guarantee assumes the linear
    parts are orthoprojectors, so non-projector banks draw a warning."""
    check_nonnegative(sigma2_hat, "sigma2_hat")
    if not all(est.is_projector() for est in bank.estimators):
        warnings.warn(
            "plug-in variance aggregation is backed by a risk bound only for "
            "orthoprojector banks", AdmissibilityWarning, stacklevel=2)
    return _aggregate(bank, ObjectiveSpec.w_pen(sigma2_hat), tol, max_iter)


def q_aggregate_subgaussian(bank: EstimatorBank, sigma2: float, tol: float | None = None,
                            max_iter: int | None = None) -> AggregateOutput:
    """Alias of q_aggregate: the same estimator is robust to subgaussian
    noise, and experiment configs use this name to say which guarantee they
    exercise.  sigma2 is the true per-coordinate noise variance."""
    return q_aggregate(bank, sigma2, tol=tol, max_iter=max_iter)


def erm_cp_select(bank: EstimatorBank, sigma2: float) -> int:
    """Index of the vertex minimizing the Cp criterion (smallest index wins)."""
    check_nonnegative(sigma2, "sigma2")
    values = np.diag(bank.gram) - 2.0 * bank.fit_dot_y + 2.0 * sigma2 * bank.traces
    return int(np.argmin(values))


def cp_minimize(bank: EstimatorBank, sigma2: float, tol: float | None = None,
                max_iter: int | None = None) -> AggregateOutput:
    """Minimize the unpenalized Cp criterion over the simplex."""
    check_nonnegative(sigma2, "sigma2")
    return _aggregate(bank, ObjectiveSpec.cp(sigma2), tol, max_iter)


# -- sparse grid over the simplex -------------------------------------------


@dataclass(frozen=True)
class MaureyGrid:
    """Averages of m vertex picks: a sparse discretization of the simplex."""

    M: int
    m: int
    points: tuple[SimplexPoint, ...]

    def as_array(self) -> np.ndarray:
        return np.stack([p.weights for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


def maurey_m(M: int, n: int) -> int:
    """Grid sparsity floor(sqrt(n / log(1 + M / sqrt(n))))."""
    if M < 1 or n < 1:
        raise DomainError("M and n must be >= 1")
    return int(math.floor(math.sqrt(n / math.log(1.0 + M / math.sqrt(n)))))


def maurey_grid_explicit(M: int, m: int, cap: int = DEFAULT_GRID_CAP) -> MaureyGrid:
    """All averages of m picks from the M vertices (deduplicated multisets)."""
    if M < 1 or m < 1:
        raise DomainError("M and m must be >= 1")
    count = math.comb(M + m - 1, m)
    if count > cap:
        raise EnumerationCapError("simplex grid enumeration", count, cap)
    points = []
    for picks in combinations_with_replacement(range(M), m):
        w = np.zeros(M)
        for q in picks:
            w[q] += 1.0
        points.append(SimplexPoint(w / m))
    return MaureyGrid(M, m, tuple(points))


def maurey_grid(M: int, n: int, cap: int = DEFAULT_GRID_CAP) -> MaureyGrid:
    """Grid with the sparsity m implied by (M, n); m = 0 means the size
    condition M <= sqrt(n)(e^n - 1) fails."""
    m = maurey_m(M, n)
    if m < 1:
        raise DomainError(
            f"grid sparsity is 0 for M={M}, n={n}; too many estimators for this sample size")
    return maurey_grid_explicit(M, m, cap)


@dataclass(frozen=True)
class ConvexAggregate:
    """Aggregation over the simplex grid, reported in both coordinate systems:
    weights over the grid points and the induced weights over the original
    estimators."""

    output: AggregateOutput
    theta_original: SimplexPoint
    grid: MaureyGrid
    grid_bank: EstimatorBank


def convex_aggregate(bank: EstimatorBank, sigma2: float, cap: int = DEFAULT_GRID_CAP,
                     tol: float | None = None, max_iter: int | None = None) -> ConvexAggregate:
    """Aggregate the grid mixtures so the benchmark becomes the best convex
    combination of the original estimators."""
    check_nonnegative(sigma2, "sigma2")
    grid = maurey_grid(bank.size, bank.dim, cap)
    mixtures = [mix(bank.estimators, p.weights) for p in grid.points]
    grid_bank = EstimatorBank.build(mixtures, bank.observation)
    out = q_aggregate(grid_bank, sigma2, tol=tol, max_iter=max_iter)
    u = grid.as_array()
    theta_original = SimplexPoint(out.theta.weights @ u)
    return ConvexAggregate(out, theta_original, grid, grid_bank)


def maurey_gap(problem: QPProblem, grid: MaureyGrid, tol: float | None = None) -> float:
    """Minimum of the quadratic over the grid minus its minimum over the
    whole simplex (the discretization price)."""
    if problem.size != grid.M:
        raise DomainError(f"grid is over M={grid.M} but the quadratic has size {problem.size}")
    if problem.size > 5:
        raise DomainError("exact simplex minimum restricted to M <= 5")
    grid_values = [problem.value(p) for p in grid.points]
    solve = solve_qp(problem, tol=tol)
    return float(min(grid_values) - solve.objective)


def maurey_bound(problem: QPProblem, m: int) -> float:
    """4 max_j Sigma_jj / m where Sigma is the quadratic's Hessian over 2,
    matching the theta' Sigma theta normalization of the discretization
    lemma."""
    if m < 1:
        raise DomainError("m must be >= 1")
    return 4.0 * float(np.max(np.diag(problem.gram))) / (2.0 * m)


# -- design-based banks ------------------------------------------------------


def column_count_for_kregressors(p: int, k: int, cap: int = DEFAULT_SUPPORT_CAP) -> int:
    """Number of k-column subsets, guarded by the enumeration cap."""
    count = math.comb(p, k)
    if count > cap:
        raise EnumerationCapError("k-subset enumeration", count, cap)
    return count


def kregressor_aggregate(X, k: int, y, sigma2: float,
                         support_cap: int = DEFAULT_SUPPORT_CAP,
                         tol: float | None = None,
                         max_iter: int | None = None) -> AggregateOutput:
    """Penalized aggregation over all projections onto spans of k design
    columns.  These projectors share trace k (barring rank deficiency), so the
    chosen weights do not depend on sigma2."""
    X = as_matrix(X, "X")
    check_nonnegative(sigma2, "sigma2")
    p = X.shape[1]
    if not 1 <= k <= p:
        raise DomainError(f"k must be in [1, {p}], got {k}")
    count = math.comb(p, k)
    if count > support_cap:
        raise EnumerationCapError("k-subset enumeration", count, support_cap)
    y = as_vector(y, "y", X.shape[0])
    results = column_subset_projectors(X, k)
    if count == 1:
        est = results[0].estimator
        fitted = est.apply(y)
        theta = SimplexPoint(np.ones(1))
        solve = SolveResult(theta, 0.0, 0.0, 0, True)
        return AggregateOutput(theta, fitted, solve, "h_pen")
    bank = EstimatorBank.build([r.estimator for r in results], y)
    return q_aggregate(bank, sigma2, tol=tol, max_iter=max_iter)


@dataclass(frozen=True)
class SparsitySpec:
    """Support enumeration for sparsity pattern aggregation.

    ``prior`` carries pi_J proportional to e^(-|J|) / binom(p, |J|) over the
    enumerated supports, renormalized.  ``prior_trace_violations`` lists the
    supports where Tr(A_J) exceeds log(1/pi_J); the guarantee needs that bound
    and a violation is reported rather than silently ignored.
    """

    design: np.ndarray
    support_cap: int
    khat2: float
    supports: tuple[tuple[int, ...], ...]
    estimators: tuple[AffineEstimator, ...]
    prior: Prior
    prior_trace_violations: tuple[int, ...]

    @classmethod
    def build(cls, X, khat2: float, k_max: int | None = None,
              support_cap: int = DEFAULT_SUPPORT_CAP) -> "SparsitySpec":
        X = as_matrix(X, "X")
        khat2 = check_nonnegative(khat2, "khat2")
        p = X.shape[1]
        if k_max is None:
            k_max = min(p, DEFAULT_KMAX)
        if not 0 <= k_max <= p:
            raise DomainError(f"k_max must be in [0, {p}], got {k_max}")
        count = sum(math.comb(p, s) for s in range(k_max + 1))
        if count > support_cap:
            raise EnumerationCapError("support enumeration", count, support_cap)
        supports: list[tuple[int, ...]] = []
        for s in range(k_max + 1):
            supports.extend(combinations(range(p), s))
        projections = [make_projection(X, J) for J in supports]
        raw = np.array([math.exp(-len(J)) / math.comb(p, len(J)) for J in supports])
        prior = Prior.normalized(raw)
        violations = tuple(
            i for i, proj in enumerate(projections)
            if proj.rank > prior.log_inverse[i] + 1e-12)
        return cls(X, support_cap, khat2, tuple(supports),
                   tuple(proj.estimator for proj in projections), prior, violations)


def sparsity_pattern_aggregate(spec: SparsitySpec, y, tol: float | None = None,
                               max_iter: int | None = None) -> AggregateOutput:
    """Least-squares projector aggregation with the sparsity-inducing prior,
    minimizing the trace-free criterion with 32 khat2 entropy weighting."""
    y = as_vector(y, "y", spec.design.shape[0])
    bank = EstimatorBank.build(spec.estimators, y)
    return _aggregate(bank, ObjectiveSpec.u(spec.khat2, spec.prior), tol, max_iter)


# -- deterministic per-draw risk bound ---------------------------------------


def oracle_bound_slack(bank: EstimatorBank, spec: ObjectiveSpec, f, xi,
                       output: AggregateOutput) -> float:
    """Slack of the almost-sure oracle bound for the minimizer of ``spec``.

    Returns risk(theta_hat) - RHS where the right-hand side is
    min_q [risk_q + prior term] + max over ordered pairs of the centered
    comparison functional; nonpositive up to solver tolerance whenever the
    solve converged.  Needs the simulation ground truth (f, xi).

    The quadratic noise terms are centered by the variance the objective
    actually used (the trace-free criterion uses none), which also covers
    plugged-in or misspecified variances exactly.
    """
    f = as_vector(f, "f", bank.dim)
    xi = as_vector(xi, "xi", bank.dim)
    risks = np.sum((bank.fits - f) ** 2, axis=1)
    risk_hat = float(np.sum((output.fitted - f) ** 2))
    m = bank.size

    lin_parts = np.stack([est.apply_linear(f) + est.offset for est in bank.estimators])
    lin_stat = lin_parts @ xi                       # xi . (A_j f + b_j)
    chaos_stat = np.array([xi @ est.apply_linear(xi) for est in bank.estimators])
    objective_sigma2 = {"h_pen": spec.sigma2, "cp": spec.sigma2, "v_pen": spec.sigma2,
                        "w_pen": spec.sigma2_hat, "u": 0.0}[spec.kind]
    delta_parts = 2.0 * (lin_stat + chaos_stat - objective_sigma2 * bank.traces)
    delta = delta_parts[:, None] - delta_parts[None, :]     # delta[j, k]

    diag = np.diag(bank.gram)
    dist_sq = diag[:, None] - 2.0 * bank.gram + diag[None, :]

    if spec.kind == "cp":
        # unit strong-convexity constant: the distance term is dropped
        comparison = delta
        vertex_extra = np.zeros(m)
    elif spec.kind in ("h_pen", "w_pen"):
        comparison = delta - 0.5 * dist_sq
        vertex_extra = np.zeros(m)
    else:
        beta = 46.0 * spec.sigma2 if spec.kind == "v_pen" else 32.0 * spec.khat2
        log_inv = spec.prior.log_inverse
        comparison = delta - 0.5 * dist_sq - beta * (log_inv[:, None] + log_inv[None, :])
        vertex_extra = 2.0 * beta * log_inv

    rhs = float(np.min(risks + vertex_extra)) + float(np.max(comparison))
    return risk_hat - rhs
