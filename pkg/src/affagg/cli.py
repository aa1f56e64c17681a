"""Config-driven experiment runner.

Usage:
    affagg <experiment> --config cfg.json [--set key.path=value]...
           [--seed N] [--threads N] [--out DIR]
    affagg list

Exit status: 0 when every enabled check passes, 1 when a check fails or the
run errors, 2 on configuration problems.  Outputs are CSV (one row per trial
or per x-level, shortest round-trip float formatting) plus a report.json; the
report is written even on partial failure, and the only timestamp lives in
the report header so repeated runs with one seed are byte-identical on CSV.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import (EXPERIMENTS, SCHEMA_VERSION, ExperimentConfig, build_bank_estimators,
                     build_design, build_noise, build_prior, build_signal, load_config_document,
                     parse_config)
from .criteria import (ObjectiveSpec, SimplexPoint, decomposition_qv, delta_jk,
                       evaluate_objective_direct, mixture_fit, pairwise_fit_distance_sq,
                       penalty, qp_reduce, QPProblem)
from .errors import AffAggError, ConfigError
from .estimators import AffineEstimator, EstimatorBank, difference_variance
from .procedures import (SparsitySpec, column_count_for_kregressors, maurey_bound,
                         maurey_gap, maurey_grid_explicit, q_aggregate)
from .simulation import (NoiseModel, TrialConfig, TrialRecord, chaos_tail_check, gen_noise,
                         linear_tail_check, records_to_json, run_trials,
                         solver_tolerance_for, strong_convexity_probe, tail_check)

_EXPERIMENT_TABLE = (
    ("aggregate", "one-shot aggregation on a given observation vector", "plumbing"),
    ("simulate", "Monte Carlo oracle-inequality trials for the penalized aggregate and its "
                 "prior-weighted, adaptive-variance (adapt), and subgaussian variants",
     "sharp oracle deviation theorem (46 sigma^2 (2 log M + x) tail)"),
    ("tail-check", "empirical concentration of quadratic chaos and linear noise functionals",
     "quadratic-chaos concentration lemma"),
    ("identity-check", "exactness of the algebraic identities behind the penalty and objectives",
     "exact second-order expansion lemma"),
    ("maurey-check", "discretization price of the sparse simplex grid vs the exact minimum",
     "simplex discretization (Maurey) lemma"),
    ("sparsity", "sparsity pattern aggregation trials against the sparse risk bound",
     "sparsity oracle-inequality theorem"),
    ("convex", "grid aggregation trials against the best convex combination benchmark",
     "convex-benchmark proposition"),
    ("kregressor", "least-squares aggregation over k-column subspaces",
     "k-regressor corollary (k log(ep/k) rate)"),
)


def list_experiments() -> str:
    lines = []
    for name, desc, theorem in _EXPERIMENT_TABLE:
        lines.append(f"{name:15s} {desc}")
        lines.append(f"{'':15s} verifies: {theorem}")
    return "\n".join(lines)


# -- output helpers ------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, fieldnames, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[name]) for name in fieldnames])


def record_rows(records):
    for r in records:
        yield {name: getattr(r, name) for name in TrialRecord.CSV_FIELDS}


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class RunReport:
    """Run summary; always written, even on partial failure."""

    experiment: str
    version: str
    schema_version: int
    config: dict
    checks: list[Check] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    wall_time_s: float = 0.0
    timestamp: float = 0.0
    error: str = ""

    @property
    def passed(self) -> bool:
        return not self.error and all(c.passed for c in self.checks)

    def to_json(self) -> str:
        return json.dumps({
            "experiment": self.experiment, "version": self.version,
            "schema_version": self.schema_version, "timestamp": self.timestamp,
            "wall_time_s": self.wall_time_s, "passed": self.passed, "error": self.error,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                       for c in self.checks],
            "outputs": self.outputs, "config": self.config,
        }, indent=2, sort_keys=True)


def _version_string(document: dict) -> str:
    digest = hashlib.sha256(json.dumps(document, sort_keys=True).encode()).hexdigest()[:12]
    return f"affagg-{__version__}+cfg.{digest}"


def _tail_report_check(report, label: str) -> Check:
    detail = "; ".join(
        f"x={row['x']:g}: wilson {row['wilson_upper']:.4g} vs {row['theoretical']:.4g}"
        for row in report.rows())
    return Check(label, report.passed, detail)


# -- per-experiment runners ----------------------------------------------------


def _trial_config(cfg: ExperimentConfig, estimators, f, noise, procedure,
                  **extra) -> TrialConfig:
    doc = cfg.document
    sigma2_doc = doc.get("sigma2", {"policy": "known"})
    policy = sigma2_doc.get("policy", "known")
    solver = doc.get("solver", {})
    return TrialConfig(
        estimators=estimators, f=f, noise=noise, trials=cfg.trials, base_seed=cfg.base_seed,
        procedure=procedure, sigma2_policy=policy,
        sigma2_plugin=sigma2_doc.get("value"), threads=cfg.threads,
        solver_tol=solver.get("tol"), solver_max_iter=solver.get("max_iter"), **extra)


def _write_trials(records, out: Path, report: RunReport, json_records: bool = False) -> None:
    path = out / "trials.csv"
    write_csv(path, TrialRecord.CSV_FIELDS, record_rows(records))
    report.outputs.append(str(path))
    if json_records:
        json_path = out / "trials.json"
        json_path.write_text(records_to_json(records) + "\n")
        report.outputs.append(str(json_path))


def _write_tail(tail, out: Path, report: RunReport, label: str) -> None:
    csv_path = out / "tail.csv"
    write_csv(csv_path, tail.CSV_FIELDS, tail.rows())
    json_path = out / "tail.json"
    json_path.write_text(tail.to_json() + "\n")
    report.outputs += [str(csv_path), str(json_path)]
    report.checks.append(_tail_report_check(tail, label))


def _deterministic_bound_check(config: TrialConfig, records) -> Check:
    clean = [r for r in records if not r.error]
    errors = len(records) - len(clean)
    tol = solver_tolerance_for(config, clean)
    worst = max((r.oracle_slack for r in clean), default=-math.inf)
    ok = errors == 0 and all(r.converged for r in clean) and worst <= 10.0 * tol
    return Check("per-trial deterministic risk bound", ok,
                 f"max slack {worst:.3g} vs 10*tol {10 * tol:.3g}; {errors} trial errors")


def _procedure_bound(cfg: ExperimentConfig, noise: NoiseModel, m: int, procedure: str):
    """Excess-risk threshold function and tail probability for the procedure."""
    sigma2 = noise.variance
    log_m = math.log(m)
    if procedure == "subgaussian":
        sbar2 = noise.subgaussian_bound ** 2
        return (lambda x: 46.0 * sbar2 * (2.0 * log_m + x)), (lambda x: 2.0 * math.exp(-x))
    if procedure == "plugin":
        return (lambda x: 64.0 * sigma2 * (x + 2.0 * log_m)), (lambda x: 2.0 * math.exp(-x))
    if procedure == "prior":
        return (lambda x: 46.0 * sigma2 * x), (lambda x: 2.0 * math.exp(-x))
    return (lambda x: 46.0 * sigma2 * (2.0 * log_m + x)), (lambda x: 2.0 * math.exp(-x))


def run_aggregate(cfg: ExperimentConfig, out: Path, report: RunReport) -> None:
    doc = cfg.document
    estimators = build_bank_estimators(doc["bank"])
    noise = build_noise(doc["noise"])
    if "y" in doc:
        y = build_signal(doc["y"], "y")
    else:
        f = build_signal(doc["f"])
        y = f + gen_noise(noise, f.shape[0], cfg.base_seed)
    sigma2_doc = doc.get("sigma2", {"policy": "known"})
    policy = sigma2_doc.get("policy", "known")
    if policy == "plugin":
        sigma2 = float(sigma2_doc["value"])
    elif policy == "difference":
        sigma2 = difference_variance(y)
    else:
        sigma2 = noise.variance
    bank = EstimatorBank.build(estimators, y)
    solver = doc.get("solver", {})
    output = q_aggregate(bank, sigma2, tol=solver.get("tol"), max_iter=solver.get("max_iter"))
    weights_path = out / "weights.csv"
    write_csv(weights_path, ("index", "weight"),
              ({"index": j, "weight": w} for j, w in enumerate(output.theta.weights)))
    fitted_path = out / "fitted.csv"
    write_csv(fitted_path, ("index", "value"),
              ({"index": i, "value": v} for i, v in enumerate(output.fitted)))
    report.outputs += [str(weights_path), str(fitted_path)]
    report.checks.append(Check("solver converged", output.solve.converged,
                               f"kkt residual {output.solve.kkt_residual:.3g} "
                               f"in {output.solve.iterations} iterations"))


def run_simulate(cfg: ExperimentConfig, out: Path, report: RunReport) -> None:
    doc = cfg.document
    estimators = build_bank_estimators(doc["bank"])
    noise = build_noise(doc["noise"])
    f = build_signal(doc["f"])
    procedure = doc.get("procedure", "penalized")
    extra = {}
    if procedure == "prior":
        extra["prior"] = build_prior(doc.get("prior"), len(estimators))
    config = _trial_config(cfg, estimators, f, noise, procedure, **extra)
    records = run_trials(config)
    _write_trials(records, out, report, bool(doc.get("json_records", False)))
    report.checks.append(_deterministic_bound_check(config, records))
    if procedure == "erm":
        return
    bound, tail_prob = _procedure_bound(cfg, noise, len(estimators), procedure)
    gaps = [r.reference_gap for r in records if not r.error]
    tail = tail_check(gaps, bound, cfg.x_levels, tail_prob,
                      slack=float(doc.get("tail_slack", 0.0)))
    _write_tail(tail, out, report, "excess-risk tail bound")
    if procedure == "penalized" and noise.kind == "gaussian" and doc.get("mean_check", True):
        excesses = np.array([r.excess_risk for r in records if not r.error])
        bound_mean = 92.0 * noise.variance * math.log(math.e * len(estimators))
        upper = float(np.mean(excesses)
                      + 1.6448536269514722 * np.std(excesses) / math.sqrt(excesses.size))
        report.checks.append(Check(
            "expected excess bound", upper <= bound_mean,
            f"mean {np.mean(excesses):.4g} (upper {upper:.4g}) vs {bound_mean:.4g}"))


def run_tail_experiment(cfg: ExperimentConfig, out: Path, report: RunReport) -> None:
    doc = cfg.document
    noise = build_noise(doc["noise"])
    rng = np.random.Generator(np.random.Philox(key=cfg.base_seed & (2 ** 64 - 1)))
    chaos_doc = doc.get("chaos", {"count": 5, "dim": 30})
    linear_doc = doc.get("linear", {"count": 5, "dim": 30})
    chaos_rows, linear_rows = [], []
    all_pass = True
    for i in range(int(chaos_doc.get("count", 5))):
        dim = int(chaos_doc.get("dim", 30))
        b = rng.standard_normal((dim, dim)) / math.sqrt(dim)
        rep = chaos_tail_check(b, noise, cfg.trials, cfg.x_levels,
                               base_seed=cfg.base_seed + 1000 * (i + 1))
        all_pass &= rep.passed
        for row in rep.rows():
            chaos_rows.append({"target": i, **row})
    for i in range(int(linear_doc.get("count", 5))):
        dim = int(linear_doc.get("dim", 30))
        v = rng.standard_normal(dim)
        rep = linear_tail_check(v, noise, cfg.trials, cfg.x_levels,
                                base_seed=cfg.base_seed + 777 * (i + 1))
        all_pass &= rep.passed
        for row in rep.rows():
            linear_rows.append({"target": i, **row})
    chaos_path = out / "chaos_tail.csv"
    write_csv(chaos_path, ("target",) + tuple(chaos_rows[0].keys())[1:], chaos_rows)
    linear_path = out / "linear_tail.csv"
    write_csv(linear_path, ("target",) + tuple(linear_rows[0].keys())[1:], linear_rows)
    report.outputs += [str(chaos_path), str(linear_path)]
    report.checks.append(Check("concentration tails", all_pass,
                               f"{len(chaos_rows)} chaos rows, {len(linear_rows)} linear rows"))


def run_identity_check(cfg: ExperimentConfig, out: Path, report: RunReport) -> None:
    doc = cfg.document
    instances = int(doc.get("instances", 100))
    n_max = int(doc.get("n_max", 20))
    m_max = int(doc.get("m_max", 6))
    rng = np.random.Generator(np.random.Philox(key=cfg.base_seed & (2 ** 64 - 1)))
    names = ("bias-variance split", "second-order expansion", "quadratic-becomes-linear",
             "chaos-linear decomposition", "reduction two-path")
    worst = dict.fromkeys(names, 0.0)
    for _ in range(instances):
        n = int(rng.integers(3, n_max + 1))
        m = int(rng.integers(2, m_max + 1))
        sigma2 = float(rng.uniform(0.2, 2.0))
        f = rng.standard_normal(n)
        xi = rng.standard_normal(n)
        ests = []
        for _ in range(m):
            a = rng.standard_normal((n, n))
            a /= np.linalg.norm(a, 2) * float(rng.uniform(1.0, 2.0))
            ests.append(AffineEstimator.dense(a, rng.standard_normal(n)))
        bank = EstimatorBank.build(ests, f + xi)
        theta = SimplexPoint(rng.dirichlet(np.ones(m)))
        g = rng.standard_normal(n)
        mu = mixture_fit(bank, theta)
        pen = penalty(bank, theta)
        lhs = float(theta.weights @ np.sum((bank.fits - g) ** 2, axis=1))
        rhs = float(np.sum((mu - g) ** 2)) + pen
        worst["bias-variance split"] = max(worst["bias-variance split"],
                                           abs(lhs - rhs) / (1.0 + abs(lhs)))
        spec = ObjectiveSpec.h_pen(sigma2)
        worst["second-order expansion"] = max(
            worst["second-order expansion"],
            strong_convexity_probe(spec, bank, trials=3, base_seed=int(rng.integers(2 ** 32))))
        k = int(rng.integers(m))
        lhs_q = pen + float(np.sum((mu - bank.fits[k]) ** 2))
        rhs_q = float(theta.weights @ np.sum((bank.fits - bank.fits[k]) ** 2, axis=1))
        worst["quadratic-becomes-linear"] = max(worst["quadratic-becomes-linear"],
                                                abs(lhs_q - rhs_q) / (1.0 + abs(lhs_q)))
        j, k = (int(v) for v in rng.choice(m, size=2, replace=False))
        qm, vv = decomposition_qv(bank, f, j, k)
        bmat = bank.estimators[k].to_dense() - bank.estimators[j].to_dense()
        u = bmat @ f + bank.estimators[k].offset - bank.estimators[j].offset
        lhs_d = delta_jk(bank, f, xi, sigma2, k, j) - 0.5 * pairwise_fit_distance_sq(bank, j, k)
        rhs_d = (float(xi @ qm @ xi) - sigma2 * float(np.trace(qm)) + float(xi @ vv)
                 - 0.5 * sigma2 * float(np.sum(bmat * bmat)) - 0.5 * float(u @ u))
        worst["chaos-linear decomposition"] = max(worst["chaos-linear decomposition"],
                                                  abs(lhs_d - rhs_d) / (1.0 + abs(lhs_d)))
        problem = qp_reduce(bank, spec)
        direct = evaluate_objective_direct(bank, spec, theta)
        worst["reduction two-path"] = max(worst["reduction two-path"],
                                          abs(problem.value(theta) - direct)
                                          / (1.0 + abs(direct)))
    tolerances = {"chaos-linear decomposition": 1e-8}
    rows = []
    for name in names:
        tol = tolerances.get(name, 1e-9)
        ok = worst[name] <= tol
        rows.append({"identity": name, "instances": instances, "max_residual": worst[name],
                     "tolerance": tol, "passed": ok})
        report.checks.append(Check(f"identity: {name}", ok,
                                   f"max residual {worst[name]:.3g} vs {tol:g}"))
    path = out / "identities.csv"
    write_csv(path, ("identity", "instances", "max_residual", "tolerance", "passed"), rows)
    report.outputs.append(str(path))


def run_maurey_check(cfg: ExperimentConfig, out: Path, report: RunReport) -> None:
    doc = cfg.document
    instances = int(doc.get("instances", 100))
    m_simplex = int(doc.get("M", 4))
    m_values = [int(v) for v in doc.get("m_values", (1, 2, 3))]
    rng = np.random.Generator(np.random.Philox(key=cfg.base_seed & (2 ** 64 - 1)))
    rows = []
    all_pass = True
    for i in range(instances):
        a = rng.standard_normal((m_simplex, m_simplex))
        problem = QPProblem(a @ a.T, rng.standard_normal(m_simplex))
        for m in m_values:
            grid = maurey_grid_explicit(m_simplex, m)
            gap = maurey_gap(problem, grid)
            bound = maurey_bound(problem, m)
            ok = gap <= bound + 1e-8
            all_pass &= ok
            rows.append({"instance": i, "m": m, "gap": gap, "bound": bound, "passed": ok})
    path = out / "maurey.csv"
    write_csv(path, ("instance", "m", "gap", "bound", "passed"), rows)
    report.outputs.append(str(path))
    report.checks.append(Check("grid discretization gap bound", all_pass,
                               f"{len(rows)} (instance, m) pairs"))


def run_sparsity(cfg: ExperimentConfig, out: Path, report: RunReport) -> None:
    doc = cfg.document
    design = build_design(doc["design"])
    noise = build_noise(doc["noise"])
    f = build_signal(doc["f"])
    if f.shape[0] != design.shape[0]:
        raise ConfigError(f"f has length {f.shape[0]} but the design has {design.shape[0]} rows",
                          field="f")
    khat2 = float(doc.get("khat2", noise.variance))
    spec = SparsitySpec.build(design, khat2, k_max=doc.get("k_max"),
                              support_cap=int(doc.get("support_cap", 100_000)))
    report.checks.append(Check(
        "prior trace condition", not spec.prior_trace_violations,
        f"{len(spec.prior_trace_violations)} violations over {len(spec.supports)} supports"))
    config = _trial_config(cfg, (), f, noise, "sparsity", sparsity=spec)
    records = run_trials(config)
    _write_trials(records, out, report)
    report.checks.append(_deterministic_bound_check(config, records))
    k2 = noise.variance
    gaps = [r.reference_gap for r in records if not r.error]
    delta_slack = float(doc.get("delta_slack", 0.0))
    tail = tail_check(gaps, lambda x: 31.0 * k2 * x, cfg.x_levels,
                      lambda x: 3.0 * math.exp(-x) + delta_slack)
    _write_tail(tail, out, report, "sparse oracle tail bound")


def run_convex(cfg: ExperimentConfig, out: Path, report: RunReport) -> None:
    doc = cfg.document
    estimators = build_bank_estimators(doc["bank"])
    noise = build_noise(doc["noise"])
    f = build_signal(doc["f"])
    config = _trial_config(cfg, estimators, f, noise, "convex",
                           grid_cap=int(doc.get("grid_cap", 200_000)))
    records = run_trials(config)
    _write_trials(records, out, report)
    report.checks.append(_deterministic_bound_check(config, records))
    clean = [r for r in records if not r.error]
    n = f.shape[0]
    from .procedures import maurey_m

    grid_size = math.comb(len(estimators) + maurey_m(len(estimators), n) - 1,
                          maurey_m(len(estimators), n))
    sigma2 = noise.variance
    gaps = [r.reference_gap for r in clean]
    tail = tail_check(gaps, lambda x: 46.0 * sigma2 * (2.0 * math.log(grid_size) + x),
                      cfg.x_levels, lambda x: 2.0 * math.exp(-x),
                      min_records=min(100, len(gaps)))
    _write_tail(tail, out, report, "convex benchmark tail bound")


def run_kregressor(cfg: ExperimentConfig, out: Path, report: RunReport) -> None:
    doc = cfg.document
    design = build_design(doc["design"])
    noise = build_noise(doc["noise"])
    f = build_signal(doc["f"])
    k = int(doc.get("k", 1))
    if f.shape[0] != design.shape[0]:
        raise ConfigError(f"f has length {f.shape[0]} but the design has {design.shape[0]} rows",
                          field="f")
    p = design.shape[1]
    count = column_count_for_kregressors(p, k, int(doc.get("support_cap", 100_000)))
    from .estimators import column_subset_projectors

    estimators = [r.estimator for r in column_subset_projectors(design, k)]
    config = _trial_config(cfg, estimators, f, noise, "penalized",
                           reference_kind="best_k_sparse")
    records = run_trials(config)
    _write_trials(records, out, report)
    report.checks.append(_deterministic_bound_check(config, records))
    sigma2 = noise.variance
    coeff = float(doc.get("bound_coefficient", 92.0))
    gaps = [r.reference_gap for r in records if not r.error]
    tail = tail_check(gaps, lambda x: coeff * sigma2 * (k * math.log(math.e * p / k) + x),
                      cfg.x_levels, lambda x: 3.0 * math.exp(-x))
    _write_tail(tail, out, report, f"k-regressor tail bound (M={count})")


_RUNNERS = {
    "aggregate": run_aggregate,
    "simulate": run_simulate,
    "tail-check": run_tail_experiment,
    "identity-check": run_identity_check,
    "maurey-check": run_maurey_check,
    "sparsity": run_sparsity,
    "convex": run_convex,
    "kregressor": run_kregressor,
}


def run(experiment: str, config_path: str, overrides: list[str] | None = None,
        seed: int | None = None, threads: int | None = None,
        out_dir: str | None = None) -> tuple[int, RunReport]:
    """Execute one experiment; returns (exit status, report)."""
    try:
        document = load_config_document(config_path, overrides or [])
        cfg = parse_config(experiment, document, seed, threads, out_dir)
    except ConfigError as exc:
        report = RunReport(experiment, _version_string({}), SCHEMA_VERSION, {},
                           error=f"config error: {exc}")
        return 2, report
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(cfg.experiment, _version_string(cfg.echo()), SCHEMA_VERSION, cfg.echo())
    report.timestamp = time.time()
    started = time.perf_counter()
    try:
        _RUNNERS[cfg.experiment](cfg, out, report)
    except ConfigError as exc:
        report.error = f"config error: {exc}"
        status = 2
    except AffAggError as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        status = 1
    else:
        failing = [c.name for c in report.checks if not c.passed]
        status = 0 if not failing else 1
        if failing:
            report.error = f"failing checks: {', '.join(failing)}"
    report.wall_time_s = time.perf_counter() - started
    report_path = out / "report.json"
    with open(report_path, "w", encoding="utf-8") as handle:
        handle.write(report.to_json() + "\n")
    report.outputs.append(str(report_path))
    return status, report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="affagg",
        description="Experiment runner for penalized aggregation of affine estimators.")
    parser.add_argument("experiment", choices=EXPERIMENTS + ("list",),
                        help="experiment kind, or 'list' to enumerate them")
    parser.add_argument("--config", help="path to the JSON config document")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY.PATH=VALUE", help="override a config field")
    parser.add_argument("--seed", type=int, default=None,
                        help="base seed (fallback: config, then AFFAGG_SEED)")
    parser.add_argument("--threads", type=int, default=None, help="trial parallelism")
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)

    if args.experiment == "list":
        print(list_experiments())
        return 0
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return 2
    status, report = run(args.experiment, args.config, args.overrides, args.seed,
                         args.threads, args.out)
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    for check in report.checks:
        print(f"[{'PASS' if check.passed else 'FAIL'}] {check.name}: {check.detail}")
    print(f"report: {report.outputs[-1] if report.outputs else '(none)'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
