"""Monte Carlo harness: noise generation, trial loops, and empirical
verification of the deviation bounds, expectation identities, and
concentration inequalities.

Reproducibility contract: every random draw comes from a counter-based
Philox generator keyed by an explicit seed (Gaussian variates through
numpy's ziggurat sampler), and trial t of a run uses seed base_seed + t, so
parallel and serial execution produce identical records.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .criteria import ObjectiveSpec, Prior, QPProblem, SimplexPoint
from .errors import DomainError
from .estimators import AffineEstimator, EstimatorBank, difference_variance
from .procedures import (AggregateOutput, DEFAULT_GRID_CAP, SparsitySpec, convex_aggregate,
                         erm_cp_select, oracle_bound_slack, _aggregate)
from .simplex_qp import SolveResult, solve_qp
from .validation import as_vector, check_nonnegative, check_positive

NOISE_KINDS = ("gaussian", "rademacher", "uniform")
PROCEDURES = ("penalized", "prior", "plugin", "subgaussian", "cp", "erm", "sparsity", "convex")
REFERENCE_KINDS = ("best_estimator", "prior_weighted", "sparse_pattern", "best_k_sparse",
                   "best_convex")

#: one-sided 95% normal quantile used by the Wilson upper confidence bound
WILSON_Z = 1.6448536269514722


@dataclass(frozen=True)
class NoiseModel:
    """I.i.d. coordinate noise with standard deviation sigma.

    ``subgaussian_bound`` is the sigma-bar entering the subgaussian bound
    formulas; it defaults to sigma, which is exact for all three kinds in the
    linear (Hoeffding) sense.
    """

    kind: str
    sigma: float
    subgaussian_bound: Optional[float] = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise DomainError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        object.__setattr__(self, "sigma", check_positive(self.sigma, "sigma"))
        if self.subgaussian_bound is None:
            object.__setattr__(self, "subgaussian_bound", self.sigma)
        else:
            object.__setattr__(self, "subgaussian_bound",
                               check_positive(self.subgaussian_bound, "subgaussian_bound"))

    @property
    def variance(self) -> float:
        return self.sigma ** 2


def gen_noise(model: NoiseModel, n: int, seed: int) -> np.ndarray:
    """One noise vector; deterministic given (model, n, seed)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 64 - 1)))
    if model.kind == "gaussian":
        return model.sigma * rng.standard_normal(n)
    if model.kind == "rademacher":
        return model.sigma * (2.0 * rng.integers(0, 2, size=n) - 1.0)
    # uniform scaled to coordinate variance sigma^2
    half_width = model.sigma * math.sqrt(3.0)
    return rng.uniform(-half_width, half_width, size=n)


def gen_noise_block(model: NoiseModel, n: int, seeds: Sequence[int]) -> np.ndarray:
    """Stack of per-seed noise vectors (rows follow the seed order)."""
    return np.stack([gen_noise(model, n, s) for s in seeds])


# -- trial loop ---------------------------------------------------------------


@dataclass(frozen=True)
class TrialConfig:
    """Everything one oracle-inequality trial needs.

    ``sigma2_policy`` selects what variance enters the objective: "known"
    plugs in the model variance, "plugin" uses ``sigma2_plugin``, and
    "difference" re-estimates it from each simulated y by first differences.
    """

    estimators: tuple[AffineEstimator, ...]
    f: np.ndarray
    noise: NoiseModel
    trials: int
    base_seed: int
    procedure: str = "penalized"
    sigma2_policy: str = "known"
    sigma2_plugin: Optional[float] = None
    prior: Optional[Prior] = None
    khat2: Optional[float] = None
    sparsity: Optional[SparsitySpec] = None
    reference_kind: Optional[str] = None
    grid_cap: int = DEFAULT_GRID_CAP
    solver_tol: Optional[float] = None
    solver_max_iter: Optional[int] = None
    threads: int = 1

    def __post_init__(self):
        if self.procedure not in PROCEDURES:
            raise DomainError(f"unknown procedure {self.procedure!r}; expected one of {PROCEDURES}")
        if self.sigma2_policy not in ("known", "plugin", "difference"):
            raise DomainError(f"unknown sigma2 policy {self.sigma2_policy!r}")
        if self.sigma2_policy == "plugin" and self.sigma2_plugin is None:
            raise DomainError("sigma2_policy 'plugin' requires sigma2_plugin")
        if self.procedure == "prior" and self.prior is None:
            raise DomainError("procedure 'prior' requires a prior")
        if self.procedure == "sparsity" and self.sparsity is None:
            raise DomainError("procedure 'sparsity' requires a SparsitySpec")
        if self.trials < 0:
            raise DomainError("trials must be >= 0")
        if self.reference_kind is None:
            default = {"prior": "prior_weighted", "sparsity": "sparse_pattern",
                       "convex": "best_convex"}.get(self.procedure, "best_estimator")
            object.__setattr__(self, "reference_kind", default)
        elif self.reference_kind not in REFERENCE_KINDS:
            raise DomainError(f"unknown reference kind {self.reference_kind!r}")
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "f", as_vector(self.f, "f"))


@dataclass(frozen=True)
class TrialRecord:
    """Per-trial outcome of an oracle-inequality experiment.

    ``excess_risk`` may be negative (the aggregate can beat the best single
    estimator); only upper bounds are ever asserted.  ``oracle_slack`` is the
    residual of the deterministic per-draw risk bound and must stay below ten
    solver tolerances on every converged trial.
    """

    trial: int
    seed: int
    excess_risk: float
    oracle_index: int
    oracle_risk: float
    risk: float
    bound_reference: float
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    oracle_slack: float
    error: str = ""

    CSV_FIELDS = ("trial", "seed", "excess_risk", "oracle_index", "oracle_risk", "risk",
                  "bound_reference", "objective", "kkt_residual", "iterations", "converged",
                  "oracle_slack", "error")

    @property
    def reference_gap(self) -> float:
        """Risk minus the bound reference; the statistic the tail checks test."""
        return self.risk - self.bound_reference


#: bump when the serialized record/report field layout changes
RECORD_SCHEMA_VERSION = 1


def records_to_json(records: Sequence["TrialRecord"]) -> str:
    """Trial records as one JSON document (same fields as the CSV schema)."""
    return json.dumps({
        "schema_version": RECORD_SCHEMA_VERSION,
        "fields": list(TrialRecord.CSV_FIELDS),
        "records": [[getattr(r, f) for f in TrialRecord.CSV_FIELDS] for r in records],
    })


def _objective_spec(config: TrialConfig, y: np.ndarray) -> ObjectiveSpec:
    sigma2 = config.noise.variance
    if config.sigma2_policy == "plugin":
        sigma2_used = float(config.sigma2_plugin)
    elif config.sigma2_policy == "difference":
        sigma2_used = difference_variance(y)
    else:
        sigma2_used = sigma2
    proc = config.procedure
    if proc in ("penalized", "subgaussian", "erm", "convex"):
        return ObjectiveSpec.h_pen(sigma2_used)
    if proc == "cp":
        return ObjectiveSpec.cp(sigma2_used)
    if proc == "prior":
        return ObjectiveSpec.v_pen(sigma2_used, config.prior)
    if proc == "plugin":
        return ObjectiveSpec.w_pen(sigma2_used)
    khat2 = config.sparsity.khat2 if config.sparsity is not None else config.khat2
    prior = config.sparsity.prior if config.sparsity is not None else config.prior
    return ObjectiveSpec.u(khat2, prior)


def _best_convex_risk(bank: EstimatorBank, f: np.ndarray,
                      tol: Optional[float]) -> float:
    """min over the simplex of ||mu_theta - f||^2 via the exact QP reduction."""
    problem = QPProblem(2.0 * bank.gram, -2.0 * (bank.fits @ f), float(f @ f))
    return solve_qp(problem, tol=tol).objective


def _bound_reference(config: TrialConfig, bank: EstimatorBank, risks: np.ndarray,
                     grid_m: Optional[int]) -> float:
    """The risk benchmark the tail statistic is measured against."""
    kind = config.reference_kind
    f = config.f
    if kind == "best_estimator":
        return float(np.min(risks))
    if kind == "prior_weighted":
        sigma2 = config.noise.variance
        return float(np.min(risks + 92.0 * sigma2 * config.prior.log_inverse))
    if kind == "best_k_sparse":
        # best noiseless approximation by any single projector in the bank
        approx = np.array([float(np.sum((est.apply_linear(f) - f) ** 2))
                           for est in bank.estimators])
        return float(np.min(approx))
    if kind == "sparse_pattern":
        spec = config.sparsity
        p = spec.design.shape[1]
        k2 = config.noise.variance  # subgaussian norm squared of the noise
        khat2 = spec.khat2
        best = math.inf
        for J, est in zip(spec.supports, spec.estimators):
            resid = float(np.sum((est.apply_linear(f) - f) ** 2))
            s = len(J)
            pen = (64.0 * khat2 + 4.0 * k2) * (0.5 + 2.0 * s * math.log(math.e * p / max(1, s)))
            best = min(best, resid + pen)
        return best
    # best_convex: realized best convex-combination risk plus the grid
    # discretization price 4 max_j ||mu_j||^2 / m when a grid is in play
    ref = _best_convex_risk(bank, f, config.solver_tol)
    if grid_m:
        ref += 4.0 * float(np.max(np.diag(bank.gram))) / grid_m
    return ref


def run_trial(config: TrialConfig, t: int) -> TrialRecord:
    """Run trial t: draw noise, aggregate, record risks and certificates."""
    seed = config.base_seed + t
    estimators = config.sparsity.estimators if config.procedure == "sparsity" \
        else config.estimators
    n = config.f.shape[0]
    xi = gen_noise(config.noise, n, seed)
    y = config.f + xi
    try:
        bank = EstimatorBank.build(estimators, y)
        spec = _objective_spec(config, y)
        risks = np.sum((bank.fits - config.f) ** 2, axis=1)
        oracle_index = int(np.argmin(risks))
        oracle_risk = float(risks[oracle_index])
        grid_m = None
        if config.procedure == "erm":
            chosen = erm_cp_select(bank, spec.sigma2)
            theta = SimplexPoint.vertex(bank.size, chosen)
            solve = SolveResult(theta, float(np.diag(bank.gram)[chosen]
                                             - 2.0 * bank.fit_dot_y[chosen]
                                             + 2.0 * spec.sigma2 * bank.traces[chosen]),
                                0.0, 0, True)
            output = AggregateOutput(theta, bank.fits[chosen], solve, "erm")
            slack = oracle_bound_slack(bank, ObjectiveSpec.cp(spec.sigma2), config.f, xi,
                                       output)
        elif config.procedure == "convex":
            result = convex_aggregate(bank, spec.sigma2, cap=config.grid_cap,
                                      tol=config.solver_tol, max_iter=config.solver_max_iter)
            output = result.output
            grid_m = result.grid.m
            slack = oracle_bound_slack(result.grid_bank, ObjectiveSpec.h_pen(spec.sigma2),
                                       config.f, xi, output)
        else:
            output = _aggregate(bank, spec, config.solver_tol, config.solver_max_iter)
            slack = oracle_bound_slack(bank, spec, config.f, xi, output)
        risk = float(np.sum((output.fitted - config.f) ** 2))
        reference = _bound_reference(config, bank, risks, grid_m)
        return TrialRecord(
            trial=t, seed=seed, excess_risk=risk - oracle_risk, oracle_index=oracle_index,
            oracle_risk=oracle_risk, risk=risk, bound_reference=reference,
            objective=output.solve.objective, kkt_residual=output.solve.kkt_residual,
            iterations=output.solve.iterations, converged=output.solve.converged,
            oracle_slack=slack)
    except Exception as exc:  # noqa: BLE001 -- per-trial failures are recorded, not fatal
        return TrialRecord(trial=t, seed=seed, excess_risk=math.nan, oracle_index=-1,
                           oracle_risk=math.nan, risk=math.nan, bound_reference=math.nan,
                           objective=math.nan, kkt_residual=math.nan, iterations=0,
                           converged=False, oracle_slack=math.nan,
                           error=f"{type(exc).__name__}: {exc}")


def run_trials(config: TrialConfig) -> list[TrialRecord]:
    """Independent trials t = 0..trials-1; records in trial order regardless
    of the thread count."""
    indices = range(config.trials)
    if config.threads > 1 and config.trials > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(lambda t: run_trial(config, t), indices))
    return [run_trial(config, t) for t in indices]


def solver_tolerance_for(config: TrialConfig, records: Sequence[TrialRecord]) -> float:
    """The tolerance the trials actually ran at (config override or the
    per-problem default scale); used for the 10x slack of the deterministic
    bound check."""
    if config.solver_tol is not None:
        return config.solver_tol
    scale = max((abs(r.objective) for r in records if not r.error), default=1.0)
    return 1e-9 * (1.0 + scale)


# -- tail reports -------------------------------------------------------------


def wilson_upper(successes: int, total: int, z: float = WILSON_Z) -> float:
    """One-sided Wilson score upper confidence bound for a proportion."""
    if total <= 0:
        raise DomainError("total must be positive")
    phat = successes / total
    denom = 1.0 + z * z / total
    center = phat + z * z / (2.0 * total)
    spread = z * math.sqrt(phat * (1.0 - phat) / total + z * z / (4.0 * total * total))
    return (center + spread) / denom


@dataclass(frozen=True)
class TailCheckReport:
    """Empirical exceedance of a deviation bound versus its stated tail.

    A level passes when the Wilson 95% upper confidence bound on the
    exceedance probability is at most the theoretical tail times (1+slack);
    slack defaults to 0 because the constants in the bounds are conservative.
    """

    x_levels: tuple[float, ...]
    thresholds: tuple[float, ...]
    exceed_counts: tuple[int, ...]
    empirical: tuple[float, ...]
    wilson: tuple[float, ...]
    theoretical: tuple[float, ...]
    passes: tuple[bool, ...]
    n_records: int
    slack: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.passes)

    CSV_FIELDS = ("x", "threshold", "exceed_count", "empirical", "wilson_upper",
                  "theoretical", "passed")

    def to_json(self) -> str:
        return json.dumps({"schema_version": RECORD_SCHEMA_VERSION,
                           "n_records": self.n_records, "slack": self.slack,
                           "levels": list(self.rows())})

    def rows(self):
        for i, x in enumerate(self.x_levels):
            yield {"x": x, "threshold": self.thresholds[i],
                   "exceed_count": self.exceed_counts[i], "empirical": self.empirical[i],
                   "wilson_upper": self.wilson[i], "theoretical": self.theoretical[i],
                   "passed": self.passes[i]}


def tail_check(values: Sequence[float], bound: Callable[[float], float],
               x_levels: Sequence[float], tail_prob: Callable[[float], float],
               slack: float = 0.0, min_records: int = 100) -> TailCheckReport:
    """Compare empirical exceedance frequencies of ``values`` over
    ``bound(x)`` against ``tail_prob(x)`` with a Wilson upper bound."""
    vals = np.asarray(list(values), dtype=float)
    if vals.shape[0] < min_records:
        raise DomainError(f"tail check needs at least {min_records} records, got {vals.shape[0]}")
    levels, thresholds, counts, empirical, wilson, theo, passes = [], [], [], [], [], [], []
    for x in x_levels:
        x = float(x)
        thr = float(bound(x))
        k = int(np.sum(vals > thr))
        p = tail_prob(x)
        w = wilson_upper(k, vals.shape[0])
        levels.append(x)
        thresholds.append(thr)
        counts.append(k)
        empirical.append(k / vals.shape[0])
        wilson.append(w)
        theo.append(p)
        passes.append(w <= p * (1.0 + slack))
    return TailCheckReport(tuple(levels), tuple(thresholds), tuple(counts), tuple(empirical),
                           tuple(wilson), tuple(theo), tuple(passes), vals.shape[0], slack)


def excess_tail_check(records: Sequence[TrialRecord], bound: Callable[[float], float],
                      x_levels: Sequence[float], tail_prob: Callable[[float], float],
                      slack: float = 0.0) -> TailCheckReport:
    clean = [r.excess_risk for r in records if not r.error]
    return tail_check(clean, bound, x_levels, tail_prob, slack)


# -- concentration checks ------------------------------------------------------


_CHUNK = 5_000


@dataclass(frozen=True)
class IdentityReport:
    """Monte Carlo mean versus a closed form, on the z-score scale."""

    mc_mean: float
    closed_form: float
    std_error: float
    z_score: float
    trials: int

    def passed(self, z_tol: float = 4.0) -> bool:
        return abs(self.z_score) <= z_tol


def expectation_identity_check(estimators: Sequence[AffineEstimator], f, j: int, k: int,
                               model: NoiseModel, trials: int,
                               base_seed: int = 0) -> IdentityReport:
    """Check that half the expected squared fit distance of a pair equals
    half the squared mean difference plus (sigma^2/2) times the squared
    Frobenius norm of the difference of linear parts."""
    f = as_vector(f, "f")
    ej, ek = estimators[j], estimators[k]
    n = f.shape[0]
    diff_dense = ej.to_dense() - ek.to_dense()
    mean_diff = diff_dense @ f + (ej.offset - ek.offset)
    closed = 0.5 * float(mean_diff @ mean_diff) \
        + 0.5 * model.variance * float(np.sum(diff_dense ** 2))
    total, total_sq, count = 0.0, 0.0, 0
    for start in range(0, trials, _CHUNK):
        seeds = range(base_seed + start, base_seed + min(start + _CHUNK, trials))
        xi = gen_noise_block(model, n, seeds)
        d = xi @ diff_dense.T + mean_diff
        stats = 0.5 * np.sum(d * d, axis=1)
        total += float(np.sum(stats))
        total_sq += float(np.sum(stats * stats))
        count += stats.shape[0]
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    se = math.sqrt(var / count)
    z = (mean - closed) / se if se > 0 else 0.0
    return IdentityReport(mean, closed, se, z, count)


def chaos_tail_check(B, model: NoiseModel, trials: int, x_levels: Sequence[float],
                     base_seed: int = 0, slack: float = 0.0,
                     min_records: int = 10_000) -> TailCheckReport:
    """Concentration of the quadratic form xi' B xi about its mean.

    Gaussian noise uses the chaos bound 2 sigma^2 (||B||_F sqrt(x) +
    ||B||_op x); other (subgaussian) kinds use the one-sided bound
    K^2 (||B||_* + 2 ||B||_F sqrt(x) + 2 ||B||_op x) on the uncentered form,
    recentered here.  Tail probability is e^(-x) in both cases.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise DomainError("B must be a square matrix")
    n = B.shape[0]
    sigma2 = model.variance
    mean = sigma2 * float(np.trace(B))
    stats = np.empty(trials)
    for start in range(0, trials, _CHUNK):
        seeds = range(base_seed + start, base_seed + min(start + _CHUNK, trials))
        xi = gen_noise_block(model, n, seeds)
        stats[start:start + xi.shape[0]] = np.sum((xi @ B.T) * xi, axis=1) - mean
    fro = float(np.linalg.norm(B))
    op = float(np.linalg.norm(B, 2)) if n > 1 else abs(float(B[0, 0]))
    if model.kind == "gaussian":
        def bound(x):
            return 2.0 * sigma2 * (fro * math.sqrt(x) + op * x)
    else:
        nuc = float(np.sum(np.linalg.svd(B, compute_uv=False)))
        kk = model.subgaussian_bound ** 2

        def bound(x):
            return kk * (nuc + 2.0 * fro * math.sqrt(x) + 2.0 * op * x) - mean
    return tail_check(stats, bound, x_levels, lambda x: math.exp(-x), slack,
                      min_records=min_records)


def linear_tail_check(v, model: NoiseModel, trials: int, x_levels: Sequence[float],
                      base_seed: int = 0, slack: float = 0.0,
                      min_records: int = 100) -> TailCheckReport:
    """Concentration of the linear form v' xi: exceedance of
    sigma_bar ||v|| sqrt(2x) compared against e^(-x)."""
    v = as_vector(v, "v")
    stats = np.empty(trials)
    for start in range(0, trials, _CHUNK):
        seeds = range(base_seed + start, base_seed + min(start + _CHUNK, trials))
        xi = gen_noise_block(model, v.shape[0], seeds)
        stats[start:start + xi.shape[0]] = xi @ v
    norm = float(np.linalg.norm(v))
    sbar = model.subgaussian_bound
    return tail_check(stats, lambda x: sbar * norm * math.sqrt(2.0 * x), x_levels,
                      lambda x: math.exp(-x), slack, min_records=min_records)


def strong_convexity_probe(spec: ObjectiveSpec, bank: EstimatorBank, trials: int,
                           base_seed: int = 0) -> float:
    """Max relative residual of the exact second-order expansion
    F(theta) - F(theta0) - grad F(theta0).(theta - theta0)
    = 0.5 ||mu_theta - mu_theta0||^2 over random simplex pairs."""
    from .criteria import evaluate_objective_direct, mixture_fit, qp_reduce

    check_nonnegative(trials, "trials")
    problem = qp_reduce(bank, spec)
    rng = np.random.Generator(np.random.Philox(key=base_seed & (2 ** 64 - 1)))
    worst = 0.0
    for _ in range(trials):
        t1 = SimplexPoint(rng.dirichlet(np.ones(bank.size)))
        t0 = SimplexPoint(rng.dirichlet(np.ones(bank.size)))
        f1 = evaluate_objective_direct(bank, spec, t1)
        f0 = evaluate_objective_direct(bank, spec, t0)
        grad = problem.gradient(t0)
        gap = mixture_fit(bank, t1) - mixture_fit(bank, t0)
        residual = f1 - f0 - float(grad @ (t1.weights - t0.weights)) - 0.5 * float(gap @ gap)
        scale = 1.0 + max(abs(f1), abs(f0))
        worst = max(worst, abs(residual) / scale)
    return worst
