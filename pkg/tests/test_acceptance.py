"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with its measured statistic and stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines live.
"""

import json
import math
import time

import numpy as np
import pytest

from affagg.cli import run as cli_run
from affagg.criteria import (ObjectiveSpec, SimplexPoint, decomposition_qv, delta_jk,
                             evaluate_objective_direct, mixture_fit, pairwise_fit_distance_sq,
                             penalty, qp_reduce)
from affagg.estimators import AffineEstimator, EstimatorBank, make_projection
from affagg.procedures import maurey_bound, maurey_gap, maurey_grid_explicit, SparsitySpec
from affagg.simplex_qp import brute_force_grid, solve_qp
from affagg.simulation import (NoiseModel, TrialConfig, chaos_tail_check,
                               expectation_identity_check, linear_tail_check, run_trials,
                               solver_tolerance_for, tail_check)


def report(number, name, passed, detail, elapsed, budget):
    status = "PASS" if passed and elapsed < budget else "FAIL"
    print(f"[{status}] criterion {number:>2} ({name}): {detail} [{elapsed:.1f}s / {budget:.0f}s]")
    assert passed, f"criterion {number} failed: {detail}"
    assert elapsed < budget, f"criterion {number} exceeded its {budget:.0f}s budget ({elapsed:.1f}s)"


def admissible_dense_bank(rng, n, m):
    ests = []
    for _ in range(m):
        a = rng.standard_normal((n, n))
        a /= np.linalg.norm(a, 2) * float(rng.uniform(1.0, 2.0))
        ests.append(AffineEstimator.dense(a, rng.standard_normal(n)))
    return ests


# -- criterion 1: algebraic identity suite -----------------------------------


def test_01_algebraic_identities():
    started = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = {"bias_variance": 0.0, "taylor": 0.0, "quadratic_linear": 0.0, "chaos_linear": 0.0}
    for _ in range(1000):
        n = int(rng.integers(3, 51))
        m = int(rng.integers(2, 11))
        sigma2 = float(rng.uniform(0.2, 2.0))
        f = rng.standard_normal(n)
        xi = rng.standard_normal(n)
        ests = admissible_dense_bank(rng, n, m)
        bank = EstimatorBank.build(ests, f + xi)
        theta = SimplexPoint(rng.dirichlet(np.ones(m)))
        theta0 = SimplexPoint(rng.dirichlet(np.ones(m)))
        mu, mu0 = mixture_fit(bank, theta), mixture_fit(bank, theta0)
        pen = penalty(bank, theta)

        g = rng.standard_normal(n)
        lhs = float(theta.weights @ np.sum((bank.fits - g) ** 2, axis=1))
        rhs = float(np.sum((mu - g) ** 2)) + pen
        worst["bias_variance"] = max(worst["bias_variance"], abs(lhs - rhs) / (1 + abs(lhs)))

        spec = ObjectiveSpec.h_pen(sigma2)
        problem = qp_reduce(bank, spec)
        f1 = evaluate_objective_direct(bank, spec, theta)
        f0 = evaluate_objective_direct(bank, spec, theta0)
        gap = mu - mu0
        resid = (f1 - f0 - float(problem.gradient(theta0) @ (theta.weights - theta0.weights))
                 - 0.5 * float(gap @ gap))
        worst["taylor"] = max(worst["taylor"], abs(resid) / (1 + abs(f1)))

        k = int(rng.integers(m))
        lhs_q = pen + float(np.sum((mu - bank.fits[k]) ** 2))
        rhs_q = float(theta.weights @ np.sum((bank.fits - bank.fits[k]) ** 2, axis=1))
        worst["quadratic_linear"] = max(worst["quadratic_linear"],
                                        abs(lhs_q - rhs_q) / (1 + abs(lhs_q)))

        j, k = (int(v) for v in rng.choice(m, size=2, replace=False))
        qm, vv = decomposition_qv(bank, f, j, k)
        bmat = bank.estimators[k].to_dense() - bank.estimators[j].to_dense()
        u = bmat @ f + bank.estimators[k].offset - bank.estimators[j].offset
        lhs_d = delta_jk(bank, f, xi, sigma2, k, j) - 0.5 * pairwise_fit_distance_sq(bank, j, k)
        rhs_d = (float(xi @ qm @ xi) - sigma2 * float(np.trace(qm)) + float(xi @ vv)
                 - 0.5 * sigma2 * float(np.sum(bmat * bmat)) - 0.5 * float(u @ u))
        worst["chaos_linear"] = max(worst["chaos_linear"], abs(lhs_d - rhs_d) / (1 + abs(lhs_d)))

    bad = max(worst.values())
    report(1, "algebraic identities", bad <= 1e-9,
           f"max relative residual {bad:.3g} <= 1e-9 over 1000 instances each",
           time.perf_counter() - started, 10.0)


# -- criterion 2: QP solver vs lattice oracle ---------------------------------


def test_02_qp_solver_vs_grid_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(202)
    worst_gap, worst_kkt_ratio = -math.inf, 0.0
    for i in range(200):
        m = (2, 3, 4)[i % 3]
        n = int(rng.integers(5, 20))
        bank = EstimatorBank.build(admissible_dense_bank(rng, n, m), rng.standard_normal(n))
        problem = qp_reduce(bank, ObjectiveSpec.h_pen(float(rng.uniform(0.1, 2.0))))
        res = solve_qp(problem)
        assert res.converged
        oracle = brute_force_grid(problem, 0.01)
        lip = float(np.linalg.norm(problem.gram, 2) + np.linalg.norm(problem.lin))
        worst_gap = max(worst_gap, res.objective - oracle.objective - lip * 0.01)
        scale = 1.0 + max(float(np.max(np.abs(problem.gram))),
                          float(np.max(np.abs(problem.lin))))
        worst_kkt_ratio = max(worst_kkt_ratio, res.kkt_residual / (1e-9 * scale))
    report(2, "QP solver vs oracle", worst_gap <= 0.0 and worst_kkt_ratio <= 1.0,
           f"max objective overshoot {worst_gap:.3g} <= 0; "
           f"max kkt/(1e-9 scale) {worst_kkt_ratio:.3g} <= 1 over 200 instances",
           time.perf_counter() - started, 30.0)


# -- criteria 3-5: headline deviation bound run -------------------------------


N_HEADLINE, M_HEADLINE, TRIALS_HEADLINE = 200, 20, 5000


@pytest.fixture(scope="module")
def headline_run():
    ests = [AffineEstimator.scaled_identity(0.05 * j, N_HEADLINE, admissible=True)
            for j in range(1, M_HEADLINE + 1)]
    config = TrialConfig(estimators=ests, f=np.ones(N_HEADLINE),
                         noise=NoiseModel("gaussian", 1.0), trials=TRIALS_HEADLINE,
                         base_seed=20260809)
    started = time.perf_counter()
    records = run_trials(config)
    return config, records, time.perf_counter() - started


def test_03_deviation_tail_bound(headline_run):
    config, records, elapsed = headline_run
    started = time.perf_counter()
    excesses = [r.excess_risk for r in records if not r.error]
    assert len(excesses) == TRIALS_HEADLINE
    rep = tail_check(excesses, lambda x: 46.0 * (2.0 * math.log(M_HEADLINE) + x),
                     [1.0, 2.0, 3.0], lambda x: 2.0 * math.exp(-x))
    median = float(np.median(excesses))
    min_trace = 0.05 * N_HEADLINE  # smallest scale times n
    ok = rep.passed and median < 4.0 * min_trace
    detail = "; ".join(f"x={x:g}: wilson {w:.4g} <= {t:.4g}"
                       for x, w, t in zip(rep.x_levels, rep.wilson, rep.theoretical))
    report(3, "deviation tail bound", ok,
           f"{detail}; median excess {median:.3g} < {4.0 * min_trace:g}",
           elapsed + time.perf_counter() - started, 300.0)


def test_04_expected_excess_bound(headline_run):
    _, records, elapsed = headline_run
    started = time.perf_counter()
    excesses = np.array([r.excess_risk for r in records])
    bound = 92.0 * math.log(math.e * M_HEADLINE)
    upper = float(np.mean(excesses) + 1.6448536269514722 * np.std(excesses)
                  / math.sqrt(excesses.size))
    report(4, "expected excess bound", upper <= bound,
           f"mean {np.mean(excesses):.4g} (95% upper {upper:.4g}) <= {bound:.4g}",
           elapsed + time.perf_counter() - started, 300.0)


def test_05_per_trial_deterministic_bound(headline_run):
    config, records, elapsed = headline_run
    started = time.perf_counter()
    tol = solver_tolerance_for(config, records)
    worst = max(r.oracle_slack for r in records)
    all_ok = all(r.converged and not r.error for r in records)
    report(5, "per-trial risk bound", all_ok and worst <= 10.0 * tol,
           f"max slack {worst:.3g} <= 10*tol {10 * tol:.3g} on 100% of "
           f"{len(records)} trials",
           elapsed + time.perf_counter() - started, 300.0)


# -- criterion 6: pairwise fit-distance expectation identity -------------------


def test_06_pairwise_distance_expectation():
    started = time.perf_counter()
    rng = np.random.default_rng(606)
    n = 40
    ests = admissible_dense_bank(rng, n, 2)
    f = rng.standard_normal(n)
    rep = expectation_identity_check(ests, f, 0, 1, NoiseModel("gaussian", 1.0),
                                     trials=100_000, base_seed=4242)
    report(6, "distance expectation identity", abs(rep.z_score) <= 4.0,
           f"mc mean {rep.mc_mean:.6g} vs closed form {rep.closed_form:.6g}, "
           f"|z| = {abs(rep.z_score):.2f} <= 4",
           time.perf_counter() - started, 60.0)


# -- criterion 7: concentration of chaos and linear functionals ----------------


def test_07_concentration_tails():
    started = time.perf_counter()
    rng = np.random.default_rng(707)
    model = NoiseModel("gaussian", 1.0)
    levels = [1.0, 2.0, 4.0]
    all_pass = True
    details = []
    for i in range(5):
        b = rng.standard_normal((30, 30)) / math.sqrt(30)
        rep = chaos_tail_check(b, model, trials=100_000, x_levels=levels,
                               base_seed=1000 + 97 * i)
        all_pass &= rep.passed
        details.append(f"B{i}: {max(rep.wilson):.3g}")
        v = rng.standard_normal(30)
        rep = linear_tail_check(v, model, trials=100_000, x_levels=levels,
                                base_seed=5000 + 89 * i)
        all_pass &= rep.passed
        details.append(f"v{i}: {max(rep.wilson):.3g}")
    report(7, "concentration lemmas", all_pass,
           "max wilson per target: " + ", ".join(details) + " (all <= e^-x per level)",
           time.perf_counter() - started, 120.0)


# -- criterion 8: projector trace Lipschitz bound ------------------------------


def test_08_projector_trace_vs_frobenius():
    started = time.perf_counter()
    rng = np.random.default_rng(808)
    n = 50
    worst = -math.inf
    for _ in range(1000):
        ra = int(rng.integers(1, 21))
        rb = int(rng.integers(1, 21))
        a = make_projection(rng.standard_normal((n, ra)), range(ra)).estimator.to_dense()
        b = make_projection(rng.standard_normal((n, rb)), range(rb)).estimator.to_dense()
        worst = max(worst, abs(np.trace(a - b)) - np.linalg.norm(a - b) ** 2)
    report(8, "projector trace bound", worst <= 1e-9,
           f"max |Tr(A-B)| - ||A-B||_F^2 = {worst:.3g} <= 1e-9 over 1000 pairs",
           time.perf_counter() - started, 5.0)


# -- criterion 9: variance-adaptive aggregation tail ---------------------------


def test_09_adaptive_variance_tail():
    started = time.perf_counter()
    n, m_bank = 100, 10
    eye = np.eye(n)
    ests = [make_projection(eye, range(10 * (j + 1))).estimator for j in range(m_bank)]
    f = np.concatenate([np.full(20, 2.0), np.zeros(n - 20)])
    config = TrialConfig(estimators=ests, f=f, noise=NoiseModel("gaussian", 1.0),
                         trials=3000, base_seed=909, procedure="plugin",
                         sigma2_policy="plugin", sigma2_plugin=1.1)
    records = run_trials(config)
    excesses = [r.excess_risk for r in records if not r.error]
    assert len(excesses) == 3000
    rep = tail_check(excesses, lambda x: 64.0 * (x + 2.0 * math.log(m_bank)),
                     [1.0, 2.0], lambda x: 2.0 * math.exp(-x))
    detail = "; ".join(f"x={x:g}: wilson {w:.4g} <= {t:.4g}"
                       for x, w, t in zip(rep.x_levels, rep.wilson, rep.theoretical))
    report(9, "adaptive variance tail", rep.passed, detail,
           time.perf_counter() - started, 180.0)


# -- criterion 10: subgaussian noise tail --------------------------------------


def test_10_subgaussian_tail():
    started = time.perf_counter()
    ests = [AffineEstimator.scaled_identity(0.05 * j, N_HEADLINE, admissible=True)
            for j in range(1, M_HEADLINE + 1)]
    config = TrialConfig(estimators=ests, f=np.ones(N_HEADLINE),
                         noise=NoiseModel("rademacher", 1.0, subgaussian_bound=2.0),
                         trials=TRIALS_HEADLINE, base_seed=1010, procedure="subgaussian")
    records = run_trials(config)
    excesses = [r.excess_risk for r in records if not r.error]
    assert len(excesses) == TRIALS_HEADLINE
    sbar2 = 4.0
    rep = tail_check(excesses, lambda x: 46.0 * sbar2 * (2.0 * math.log(M_HEADLINE) + x),
                     [1.0, 2.0], lambda x: 2.0 * math.exp(-x))
    detail = "; ".join(f"x={x:g}: wilson {w:.4g} <= {t:.4g}"
                       for x, w, t in zip(rep.x_levels, rep.wilson, rep.theoretical))
    report(10, "subgaussian tail", rep.passed, detail, time.perf_counter() - started, 300.0)


# -- criterion 11: grid discretization lemma -----------------------------------


def test_11_grid_discretization_gap():
    started = time.perf_counter()
    rng = np.random.default_rng(1111)
    from affagg.criteria import QPProblem

    worst = -math.inf
    for _ in range(200):
        a = rng.standard_normal((4, 4))
        problem = QPProblem(a @ a.T, rng.standard_normal(4))
        for m in (1, 2, 3):
            grid = maurey_grid_explicit(4, m)
            worst = max(worst, maurey_gap(problem, grid) - maurey_bound(problem, m))
    report(11, "grid discretization gap", worst <= 1e-8,
           f"max gap minus bound {worst:.3g} <= 1e-8 over 200 quadratics, m in {{1,2,3}}",
           time.perf_counter() - started, 30.0)


# -- criterion 12: sparsity pattern aggregation tail ----------------------------


def test_12_sparsity_oracle_tail():
    started = time.perf_counter()
    p, n = 8, 64
    rng = np.random.Generator(np.random.Philox(key=2))
    design = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[[1, 5]] = [1.5, -2.0]
    f = design @ beta
    spec = SparsitySpec.build(design, khat2=1.0, k_max=3)
    assert spec.prior_trace_violations == ()
    config = TrialConfig(estimators=(), f=f, noise=NoiseModel("gaussian", 1.0),
                         trials=1000, base_seed=1212, procedure="sparsity", sparsity=spec)
    records = run_trials(config)
    gaps = [r.reference_gap for r in records if not r.error]
    assert len(gaps) == 1000
    # khat2 = sigma^2 = K^2 exactly, so the estimator-failure probability is 0
    rep = tail_check(gaps, lambda x: 31.0 * x, [1.0, 2.0], lambda x: 3.0 * math.exp(-x))
    detail = "; ".join(f"x={x:g}: wilson {w:.4g} <= {t:.4g}"
                       for x, w, t in zip(rep.x_levels, rep.wilson, rep.theoretical))
    report(12, "sparsity oracle tail", rep.passed, detail,
           time.perf_counter() - started, 300.0)


# -- criterion 13: k-regressor rate ---------------------------------------------


def test_13_kregressor_tail():
    started = time.perf_counter()
    n, k = 30, 1
    f = np.zeros(n)
    f[0] = 4.0
    eye = np.eye(n)
    ests = [make_projection(eye, [j]).estimator for j in range(n)]
    config = TrialConfig(estimators=ests, f=f, noise=NoiseModel("gaussian", 1.0),
                         trials=2000, base_seed=1313, reference_kind="best_k_sparse")
    records = run_trials(config)
    gaps = [r.reference_gap for r in records if not r.error]
    assert len(gaps) == 2000
    coeff = 46.0 * 2.0
    rep = tail_check(gaps, lambda x: coeff * (k * math.log(math.e * n / k) + x),
                     [1.0, 2.0], lambda x: 3.0 * math.exp(-x))
    detail = "; ".join(f"x={x:g}: wilson {w:.4g} <= {t:.4g}"
                       for x, w, t in zip(rep.x_levels, rep.wilson, rep.theoretical))
    report(13, "k-regressor tail", rep.passed, detail, time.perf_counter() - started, 120.0)


# -- criterion 14: byte-identical reruns ----------------------------------------


def test_14_reproducible_csv(tmp_path):
    started = time.perf_counter()
    base = {
        "trials": 400, "base_seed": 20260809, "x_levels": [1.0, 2.0],
        "procedure": "penalized",
        "bank": {"kind": "scaled_identity_grid", "n": 200, "count": 20,
                 "start": 0.05, "stop": 1.0},
        "f": {"kind": "spike", "n": 200, "k": 200, "amplitude": 1.0},
        "noise": {"kind": "gaussian", "sigma": 1.0},
        "sigma2": {"policy": "known"}, "threads": 2,
    }
    identical = True
    for name, doc in (("simulate", base),):
        runs = []
        for tag in ("a", "b"):
            doc_run = dict(doc)
            doc_run["out"] = str(tmp_path / f"{name}_{tag}")
            cfg_path = tmp_path / f"{name}_{tag}.json"
            cfg_path.write_text(json.dumps(doc_run))
            status, _ = cli_run(name, str(cfg_path))
            assert status == 0
            runs.append((tmp_path / f"{name}_{tag}" / "trials.csv").read_bytes())
        identical &= runs[0] == runs[1]
    report(14, "reproducible CSV", identical,
           "repeated seeded runs produce byte-identical trial records",
           time.perf_counter() - started, 120.0)
