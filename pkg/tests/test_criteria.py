import math

import numpy as np
import pytest

from affagg.criteria import (ObjectiveSpec, Prior, QPProblem, SimplexPoint, cp_criterion,
                             cp_direct, decomposition_qv, delta_jk, entropy_term,
                             evaluate_objective, evaluate_objective_direct, h_pen,
                             h_pen_direct, mixture_fit, pairwise_fit_distance_sq, penalty,
                             penalty_direct, qp_reduce, u_objective, v_pen, w_pen)
from affagg.errors import DimensionMismatch, DomainError
from affagg.estimators import AffineEstimator, EstimatorBank


def random_bank(rng, n=None, m=None, admissible=False, offsets=True):
    n = n or int(rng.integers(3, 12))
    m = m or int(rng.integers(2, 7))
    ests = []
    for _ in range(m):
        a = rng.standard_normal((n, n))
        if admissible:
            a /= np.linalg.norm(a, 2) * (1.0 + rng.uniform(0.0, 1.0))
        b = rng.standard_normal(n) if offsets else np.zeros(n)
        ests.append(AffineEstimator.dense(a, b))
    y = rng.standard_normal(n)
    return EstimatorBank.build(ests, y)


class TestSimplexPoint:
    def test_clipping_and_renormalization(self):
        p = SimplexPoint(np.array([0.5, 0.5 + 1e-13, -1e-13]))
        assert np.min(p.weights) == 0.0
        assert np.sum(p.weights) == 1.0

    def test_rejects_large_negative(self):
        with pytest.raises(DomainError):
            SimplexPoint(np.array([1.1, -0.1]))

    def test_rejects_bad_mass(self):
        with pytest.raises(DomainError):
            SimplexPoint(np.array([0.5, 0.4]))

    def test_vertex_and_uniform(self):
        assert np.allclose(SimplexPoint.vertex(3, 1).weights, [0, 1, 0])
        assert np.allclose(SimplexPoint.uniform(4).weights, 0.25)


class TestPrior:
    def test_must_be_positive_and_normalized(self):
        with pytest.raises(DomainError):
            Prior(np.array([1.0, 0.0]))
        with pytest.raises(DomainError):
            Prior(np.array([0.7, 0.7]))
        pr = Prior.normalized(np.array([2.0, 6.0]))
        assert np.allclose(pr.pi, [0.25, 0.75])


class TestPenalty:
    def test_vanishes_at_vertices(self):
        bank = random_bank(np.random.default_rng(0))
        for j in range(bank.size):
            assert penalty(bank, SimplexPoint.vertex(bank.size, j)) == pytest.approx(0.0, abs=1e-9)

    def test_midpoint_two_estimators(self):
        rng = np.random.default_rng(1)
        bank = random_bank(rng, n=6, m=2)
        expected = 0.25 * np.sum((bank.fits[0] - bank.fits[1]) ** 2)
        assert penalty(bank, SimplexPoint(np.array([0.5, 0.5]))) == pytest.approx(expected)

    def test_bias_variance_decomposition(self):
        # sum_k theta_k ||mu_k - g||^2 = ||mu_theta - g||^2 + pen(theta)
        rng = np.random.default_rng(2)
        bank = random_bank(rng, m=5)
        theta = SimplexPoint(rng.dirichlet(np.ones(5)))
        pen = penalty(bank, theta)
        mu = mixture_fit(bank, theta)
        for _ in range(10):
            g = rng.standard_normal(bank.dim)
            lhs = float(theta.weights @ np.sum((bank.fits - g) ** 2, axis=1))
            rhs = float(np.sum((mu - g) ** 2)) + pen
            assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_nonnegative(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            bank = random_bank(rng)
            theta = SimplexPoint(rng.dirichlet(np.ones(bank.size)))
            assert penalty(bank, theta) >= -1e-9 * np.max(np.diag(bank.gram))

    def test_gram_path_matches_direct(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            bank = random_bank(rng)
            theta = SimplexPoint(rng.dirichlet(np.ones(bank.size)))
            a, b = penalty(bank, theta), penalty_direct(bank, theta)
            assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


class TestCpCriterion:
    def test_perfect_fit_zero_variance(self):
        # with mu_theta = y and sigma = 0 the criterion is -||y||^2
        y = np.array([1.0, -2.0, 0.5])
        bank = EstimatorBank.build([AffineEstimator.identity(3),
                                    AffineEstimator.zero(3)], y)
        val = cp_criterion(bank, 0.0, SimplexPoint.vertex(2, 0))
        assert val == pytest.approx(-float(y @ y))

    def test_constant_for_identical_estimators(self):
        y = np.array([1.0, 2.0])
        est = AffineEstimator.diagonal([0.5, 0.5], [0.1, 0.2])
        bank = EstimatorBank.build([est, est, est], y)
        rng = np.random.default_rng(5)
        vals = [cp_criterion(bank, 1.3, SimplexPoint(rng.dirichlet(np.ones(3))))
                for _ in range(5)]
        assert np.ptp(vals) <= 1e-9 * (1 + abs(vals[0]))

    def test_unbiasedness_algebra(self):
        # Cp(theta) - R(theta) = -2 xi.mu_theta + 2 sigma^2 Tr(A_theta)
        rng = np.random.default_rng(6)
        n, m, sigma2 = 8, 4, 0.7
        f = rng.standard_normal(n)
        xi = rng.standard_normal(n)
        ests = [AffineEstimator.dense(rng.standard_normal((n, n)) / 2, rng.standard_normal(n))
                for _ in range(m)]
        bank = EstimatorBank.build(ests, f + xi)
        theta = SimplexPoint(rng.dirichlet(np.ones(m)))
        mu = mixture_fit(bank, theta)
        r_theta = float(np.sum((mu - f) ** 2) - f @ f)
        tr = float(theta.weights @ bank.traces)
        lhs = cp_criterion(bank, sigma2, theta) - r_theta
        rhs = -2.0 * float(xi @ mu) + 2.0 * sigma2 * tr
        assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_rejects_negative_variance(self):
        bank = random_bank(np.random.default_rng(7))
        with pytest.raises(DomainError):
            cp_criterion(bank, -1.0, SimplexPoint.uniform(bank.size))


class TestPenalizedCriteria:
    def test_h_pen_at_vertices_is_cp(self):
        bank = random_bank(np.random.default_rng(8))
        for j in range(bank.size):
            v = SimplexPoint.vertex(bank.size, j)
            assert h_pen(bank, 0.9, v) == pytest.approx(cp_criterion(bank, 0.9, v), rel=1e-12)

    def test_uniform_prior_shifts_by_log_m(self):
        rng = np.random.default_rng(9)
        bank = random_bank(rng, m=4)
        prior = Prior.uniform(4)
        sigma2 = 1.1
        for _ in range(5):
            theta = SimplexPoint(rng.dirichlet(np.ones(4)))
            expected = h_pen(bank, sigma2, theta) + 46.0 * sigma2 * math.log(4)
            assert v_pen(bank, sigma2, prior, theta) == pytest.approx(expected, rel=1e-12)

    def test_v_pen_vertex(self):
        rng = np.random.default_rng(10)
        bank = random_bank(rng, m=3)
        prior = Prior(np.array([0.5, 0.3, 0.2]))
        sigma2 = 0.8
        for j in range(3):
            v = SimplexPoint.vertex(3, j)
            expected = cp_criterion(bank, sigma2, v) + 46.0 * sigma2 * math.log(1.0 / prior.pi[j])
            assert v_pen(bank, sigma2, prior, v) == pytest.approx(expected, rel=1e-12)

    def test_v_pen_entropy_midpoint(self):
        rng = np.random.default_rng(11)
        bank = random_bank(rng, m=2)
        prior = Prior(np.array([0.9, 0.1]))
        sigma2 = 1.4
        theta = SimplexPoint(np.array([0.5, 0.5]))
        ent = v_pen(bank, sigma2, prior, theta) - h_pen(bank, sigma2, theta)
        expected = 23.0 * sigma2 * (math.log(1.0 / 0.9) + math.log(1.0 / 0.1))
        assert ent == pytest.approx(expected, rel=1e-12)

    def test_w_pen_equals_h_pen_at_true_variance(self):
        rng = np.random.default_rng(12)
        bank = random_bank(rng)
        theta = SimplexPoint(rng.dirichlet(np.ones(bank.size)))
        assert w_pen(bank, 1.7, theta) == pytest.approx(h_pen(bank, 1.7, theta), rel=1e-12)

    def test_w_pen_difference_is_trace_shift(self):
        rng = np.random.default_rng(13)
        bank = random_bank(rng)
        sigma2 = 1.0
        sigma2_hat = 1.1
        for _ in range(5):
            theta = SimplexPoint(rng.dirichlet(np.ones(bank.size)))
            diff = w_pen(bank, sigma2_hat, theta) - h_pen(bank, sigma2, theta)
            expected = 2.0 * (sigma2_hat - sigma2) * float(theta.weights @ bank.traces)
            assert diff == pytest.approx(expected, rel=1e-9, abs=1e-9)

    def test_u_objective_term_accounting(self):
        # uniform prior: U = H_pen - 2 sigma^2 Tr(A_theta) + 32 khat2 log M
        rng = np.random.default_rng(14)
        bank = random_bank(rng, m=5)
        prior = Prior.uniform(5)
        khat2, sigma2 = 0.6, 0.9
        for _ in range(5):
            theta = SimplexPoint(rng.dirichlet(np.ones(5)))
            tr = float(theta.weights @ bank.traces)
            expected = (h_pen(bank, sigma2, theta) - 2.0 * sigma2 * tr
                        + 32.0 * khat2 * math.log(5))
            assert u_objective(bank, khat2, prior, theta) == pytest.approx(expected, rel=1e-9)

    def test_u_vertex(self):
        rng = np.random.default_rng(15)
        bank = random_bank(rng, m=3)
        prior = Prior(np.array([0.2, 0.3, 0.5]))
        khat2 = 1.2
        for j in range(3):
            v = SimplexPoint.vertex(3, j)
            g = bank.gram[j, j]
            expected = (g - 2.0 * bank.fit_dot_y[j]
                        + 32.0 * khat2 * math.log(1.0 / prior.pi[j]))
            assert u_objective(bank, khat2, prior, v) == pytest.approx(expected, rel=1e-9)


class TestQPReduce:
    @pytest.mark.parametrize("kind", ["h_pen", "v_pen", "w_pen", "u", "cp"])
    def test_two_path_agreement(self, kind):
        rng = np.random.default_rng(16)
        for _ in range(20):
            bank = random_bank(rng)
            prior = Prior.normalized(rng.uniform(0.1, 1.0, bank.size))
            spec = {"h_pen": ObjectiveSpec.h_pen(0.8),
                    "cp": ObjectiveSpec.cp(0.8),
                    "v_pen": ObjectiveSpec.v_pen(0.8, prior),
                    "w_pen": ObjectiveSpec.w_pen(1.0),
                    "u": ObjectiveSpec.u(0.5, prior)}[kind]
            problem = qp_reduce(bank, spec)
            for _ in range(5):
                theta = SimplexPoint(rng.dirichlet(np.ones(bank.size)))
                direct = evaluate_objective_direct(bank, spec, theta)
                fast = evaluate_objective(bank, spec, theta)
                reduced = problem.value(theta)
                scale = 1.0 + abs(direct)
                assert abs(reduced - direct) <= 1e-9 * scale
                assert abs(fast - direct) <= 1e-9 * scale

    def test_identical_estimators_give_rank_one_gram(self):
        y = np.array([1.0, 2.0, 3.0])
        est = AffineEstimator.scaled_identity(0.5, 3)
        bank = EstimatorBank.build([est, est], y)
        problem = qp_reduce(bank, ObjectiveSpec.h_pen(1.0))
        assert np.allclose(problem.gram, problem.gram[0, 0])

    def test_cp_quadratic_coefficient_is_doubled_gram(self):
        bank = random_bank(np.random.default_rng(17))
        problem = qp_reduce(bank, ObjectiveSpec.cp(0.3))
        assert np.allclose(problem.gram, 2.0 * bank.gram)

    def test_h_pen_matches_at_vertices_exactly(self):
        rng = np.random.default_rng(18)
        bank = random_bank(rng, m=3)
        problem = qp_reduce(bank, ObjectiveSpec.h_pen(0.5))
        for j in range(3):
            v = SimplexPoint.vertex(3, j)
            assert problem.value(v) == pytest.approx(h_pen_direct(bank, 0.5, v), rel=1e-12)

    def test_unknown_kind_rejected(self):
        with pytest.raises(DomainError):
            ObjectiveSpec("ridge", sigma2=1.0)

    def test_missing_parameter_rejected(self):
        with pytest.raises(DomainError):
            ObjectiveSpec("v_pen", sigma2=1.0)


class TestTaylorExpansion:
    @pytest.mark.parametrize("kind", ["h_pen", "v_pen", "w_pen", "u"])
    def test_exact_second_order_expansion(self, kind):
        rng = np.random.default_rng(19)
        for _ in range(10):
            bank = random_bank(rng)
            prior = Prior.normalized(rng.uniform(0.2, 1.0, bank.size))
            spec = {"h_pen": ObjectiveSpec.h_pen(1.0),
                    "v_pen": ObjectiveSpec.v_pen(1.0, prior),
                    "w_pen": ObjectiveSpec.w_pen(0.7),
                    "u": ObjectiveSpec.u(0.4, prior)}[kind]
            problem = qp_reduce(bank, spec)
            theta = SimplexPoint(rng.dirichlet(np.ones(bank.size)))
            theta0 = SimplexPoint(rng.dirichlet(np.ones(bank.size)))
            f1 = evaluate_objective_direct(bank, spec, theta)
            f0 = evaluate_objective_direct(bank, spec, theta0)
            grad = problem.gradient(theta0)
            gap = mixture_fit(bank, theta) - mixture_fit(bank, theta0)
            lhs = f1 - f0 - float(grad @ (theta.weights - theta0.weights))
            rhs = 0.5 * float(gap @ gap)
            assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9 * (1 + abs(f0)))

    def test_quadratic_becomes_linear(self):
        # pen(theta) + ||mu_theta - mu_k||^2 = sum_j theta_j ||mu_j - mu_k||^2
        rng = np.random.default_rng(20)
        bank = random_bank(rng, m=6)
        theta = SimplexPoint(rng.dirichlet(np.ones(6)))
        mu = mixture_fit(bank, theta)
        pen = penalty(bank, theta)
        for k in range(6):
            lhs = pen + float(np.sum((mu - bank.fits[k]) ** 2))
            rhs = float(theta.weights @ np.sum((bank.fits - bank.fits[k]) ** 2, axis=1))
            assert lhs == pytest.approx(rhs, rel=1e-9)


class TestDeltaAndDecomposition:
    def make_instance(self, rng, admissible=False):
        n, m = 7, 4
        f = rng.standard_normal(n)
        xi = rng.standard_normal(n)
        ests = []
        for _ in range(m):
            a = rng.standard_normal((n, n))
            if admissible:
                a /= np.linalg.norm(a, 2) * (1.0 + rng.uniform(0.0, 0.5))
            ests.append(AffineEstimator.dense(a, rng.standard_normal(n)))
        bank = EstimatorBank.build(ests, f + xi)
        return bank, f, xi

    def test_delta_zero_on_diagonal(self):
        rng = np.random.default_rng(21)
        bank, f, xi = self.make_instance(rng)
        assert delta_jk(bank, f, xi, 1.0, 2, 2) == 0.0

    def test_delta_antisymmetric(self):
        rng = np.random.default_rng(22)
        bank, f, xi = self.make_instance(rng)
        a = delta_jk(bank, f, xi, 0.5, 0, 3)
        b = delta_jk(bank, f, xi, 0.5, 3, 0)
        assert a == pytest.approx(-b, rel=1e-12)

    def test_delta_zero_noise_equal_traces(self):
        y = np.array([1.0, 2.0, 3.0])
        ests = [AffineEstimator.diagonal([1.0, 0.0, 0.0]),
                AffineEstimator.diagonal([0.0, 1.0, 0.0])]
        bank = EstimatorBank.build(ests, y)
        assert delta_jk(bank, y, np.zeros(3), 2.0, 0, 1) == 0.0

    def test_delta_is_criterion_minus_risk_gap(self):
        # delta = Cp(e_k) - Cp(e_j) - (R(e_k) - R(e_j))
        rng = np.random.default_rng(23)
        bank, f, xi = self.make_instance(rng)
        sigma2 = 1.3
        for j, k in [(0, 1), (2, 3), (3, 1)]:
            cp_j = cp_direct(bank, sigma2, SimplexPoint.vertex(4, j))
            cp_k = cp_direct(bank, sigma2, SimplexPoint.vertex(4, k))
            r_j = float(np.sum((bank.fits[j] - f) ** 2) - f @ f)
            r_k = float(np.sum((bank.fits[k] - f) ** 2) - f @ f)
            expected = cp_k - cp_j - (r_k - r_j)
            got = delta_jk(bank, f, xi, sigma2, j, k)
            assert got == pytest.approx(expected, rel=1e-9)

    def test_qv_zero_for_equal_pair(self):
        y = np.ones(3)
        est = AffineEstimator.diagonal([0.5, 0.5, 0.5])
        bank = EstimatorBank.build([est, est], y)
        q, v = decomposition_qv(bank, y, 0, 1)
        assert np.allclose(q, 0.0) and np.allclose(v, 0.0)

    def test_qv_direct_substitution(self):
        # A_j = 0, A_k = I, offsets 0: Q = 1.5 I
        n = 4
        bank = EstimatorBank.build([AffineEstimator.zero(n), AffineEstimator.identity(n)],
                                   np.ones(n))
        q, v = decomposition_qv(bank, np.zeros(n), 0, 1)
        assert np.allclose(q, 1.5 * np.eye(n))
        assert np.allclose(v, 0.0)

    def test_decomposition_identity(self):
        # delta(k, j) - 0.5 ||mu_j - mu_k||^2 splits into a centered chaos, a
        # linear term, and two deterministic compensators
        rng = np.random.default_rng(24)
        for _ in range(20):
            bank, f, xi = self.make_instance(rng, admissible=True)
            sigma2 = float(rng.uniform(0.3, 2.0))
            j, k = rng.choice(4, size=2, replace=False)
            q, v = decomposition_qv(bank, f, j, k)
            b = bank.estimators[k].to_dense() - bank.estimators[j].to_dense()
            db = bank.estimators[k].offset - bank.estimators[j].offset
            u = b @ f + db
            lhs = delta_jk(bank, f, xi, sigma2, k, j) - 0.5 * pairwise_fit_distance_sq(bank, j, k)
            rhs = (float(xi @ q @ xi) - sigma2 * float(np.trace(q)) + float(xi @ v)
                   - 0.5 * sigma2 * float(np.sum(b * b)) - 0.5 * float(u @ u))
            assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-8)

    def test_qv_bounds_for_admissible_pairs(self):
        rng = np.random.default_rng(25)
        for _ in range(10):
            bank, f, xi = self.make_instance(rng, admissible=True)
            q, v = decomposition_qv(bank, f, 0, 1)
            b = bank.estimators[1].to_dense() - bank.estimators[0].to_dense()
            u = b @ f + bank.estimators[1].offset - bank.estimators[0].offset
            assert np.linalg.norm(q, 2) <= 6.0 + 1e-9
            assert np.linalg.norm(q) <= 3.0 * np.linalg.norm(b) + 1e-9
            assert np.linalg.norm(v) <= 4.0 * np.linalg.norm(u) + 1e-9


class TestQPProblemContainer:
    def test_symmetry_enforced(self):
        with pytest.raises(DomainError):
            QPProblem(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2))

    def test_psd_enforced(self):
        with pytest.raises(DomainError):
            QPProblem(np.array([[1.0, 0.0], [0.0, -1.0]]), np.zeros(2))

    def test_json_round_trip(self):
        p = QPProblem(np.array([[2.0, 1.0], [1.0, 2.0]]), np.array([0.5, -0.5]), 3.0)
        q = QPProblem.from_json(p.to_json())
        assert np.array_equal(p.gram, q.gram)
        assert np.array_equal(p.lin, q.lin)
        assert p.const == q.const

    def test_entropy_term(self):
        pr = Prior(np.array([0.25, 0.75]))
        t = SimplexPoint(np.array([0.5, 0.5]))
        expected = 0.5 * (math.log(4.0) + math.log(4.0 / 3.0))
        assert entropy_term(pr, t) == pytest.approx(expected, rel=1e-12)

    def test_dimension_mismatch_raises(self):
        bank = EstimatorBank.build([AffineEstimator.identity(2),
                                    AffineEstimator.zero(2)], np.ones(2))
        with pytest.raises(DimensionMismatch):
            penalty(bank, SimplexPoint.uniform(3))
