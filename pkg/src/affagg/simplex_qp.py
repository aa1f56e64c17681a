"""Minimization of a convex quadratic over the probability simplex.

The solver is accelerated projected gradient (constant step 1/L with a
monotone restart), certified by an exact KKT residual.  A brute-force lattice
search over the simplex is provided as an independent oracle for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .criteria import QPProblem, SimplexPoint
from .errors import DomainError
from .validation import as_vector, check_positive

DEFAULT_TOL_FACTOR = 1e-9
SUPPORT_EPS = 1e-10
_BRUTE_FORCE_MAX_M = 5
_POLISH_EVERY = 25


@dataclass(frozen=True)
class SolveResult:
    """Solver outcome: the point, its objective, and a KKT certificate."""

    theta: SimplexPoint
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool


def project_simplex(v) -> SimplexPoint:
    """Euclidean projection onto the simplex (exact sort-based algorithm).

    The threshold is tau = (sum of the top-k entries - 1)/k for the largest
    k keeping all projected top-k entries positive.
    """
    v = as_vector(v, "v")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.shape[0] + 1)
    k = int(np.max(idx[u - css / idx > 0]))
    tau = css[k - 1] / k
    w = np.maximum(v - tau, 0.0)
    # renormalize away the last-ulp drift so SimplexPoint accepts it
    return SimplexPoint(w / np.sum(w))


def kkt_residual(problem: QPProblem, theta) -> float:
    """Exact optimality certificate for min over the simplex.

    With g = gram theta + lin and lam = min of g over the support, the
    residual is max over j of |g_j - lam| on the support and of the violation
    max(0, lam - g_j) off the support; it is zero exactly at minimizers.
    """
    t = theta.weights if isinstance(theta, SimplexPoint) else as_vector(theta, "theta", problem.size)
    g = problem.gradient(t)
    support = t > SUPPORT_EPS
    lam = float(np.min(g[support]))
    on_support = float(np.max(np.abs(g[support] - lam)))
    off = ~support
    off_support = float(np.max(np.maximum(0.0, lam - g[off]))) if np.any(off) else 0.0
    return max(on_support, off_support)


def default_tolerance(problem: QPProblem) -> float:
    """1e-9 times one plus the objective's coefficient scale."""
    scale = max(float(np.max(np.abs(problem.gram))), float(np.max(np.abs(problem.lin))))
    return DEFAULT_TOL_FACTOR * (1.0 + scale)


def _spectral_bound(gram: np.ndarray) -> float:
    """Largest eigenvalue of the PSD gram via deterministic power iteration."""
    m = gram.shape[0]
    v = np.ones(m) / math.sqrt(m)
    lam = 0.0
    for _ in range(10_000):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        lam_new = float(v @ w)
        v = w / norm
        if abs(lam_new - lam) <= 1e-12 * max(lam_new, 1e-300):
            return lam_new
        lam = lam_new
    return lam


def solve_qp(problem: QPProblem, tol: float | None = None,
             max_iter: int | None = None) -> SolveResult:
    """Accelerated projected gradient descent over the simplex.

    Deterministic: the start point is the best vertex, the step is 1/L with
    L the largest eigenvalue of the quadratic term, and momentum is reset
    whenever the objective would increase.  Stops once the KKT residual falls
    below ``tol``; exhausting ``max_iter`` returns ``converged=False`` rather
    than raising, so the caller decides.
    """
    m = problem.size
    if tol is None:
        tol = default_tolerance(problem)
    else:
        tol = check_positive(tol, "tol")
    if max_iter is None:
        max_iter = 50 * m + 10_000
    gram, lin = problem.gram, problem.lin

    start = int(np.argmin(problem.vertex_values()))
    theta = np.zeros(m)
    theta[start] = 1.0

    lip = _spectral_bound(gram)
    if lip <= 1e-300:
        # no curvature: linear program over the simplex, solved at a vertex
        best = int(np.argmin(lin))
        point = SimplexPoint.vertex(m, best)
        return SolveResult(point, problem.value(point), kkt_residual(problem, point), 0, True)
    step = 1.0 / (lip * (1.0 + 1e-9))

    def value(t):
        return 0.5 * (t @ gram @ t) + lin @ t

    def project(v):
        u = np.sort(v)[::-1]
        css = np.cumsum(u) - 1.0
        idx = np.arange(1, m + 1)
        k = int(np.max(idx[u - css / idx > 0]))
        w = v - css[k - 1] / k
        return np.maximum(w, 0.0)

    obj = value(theta)
    momentum = theta
    t_acc = 1.0
    iterations = 0
    residual = _kkt_raw(gram, lin, theta)
    if residual <= tol:
        return _result(problem, theta, residual, 0, True)

    # starting at the best vertex plus monotone steps keeps the objective at
    # or below every vertex value throughout
    for iterations in range(1, max_iter + 1):
        grad_m = gram @ momentum + lin
        candidate = project(momentum - step * grad_m)
        cand_obj = value(candidate)
        if cand_obj > obj:
            # momentum overshot: restart it and take the plain projected step,
            # which is non-increasing for step <= 1/L and is accepted even when
            # the objective change is below float resolution (the KKT residual
            # keeps contracting)
            momentum = theta
            t_acc = 1.0
            candidate = project(theta - step * (gram @ theta + lin))
            cand_obj = value(candidate)
            if np.array_equal(candidate, theta):
                break
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_acc * t_acc))
        momentum = candidate + ((t_acc - 1.0) / t_next) * (candidate - theta)
        theta, obj, t_acc = candidate, cand_obj, t_next
        residual = _kkt_raw(gram, lin, theta)
        if residual <= tol:
            break
        if iterations % _POLISH_EVERY == 0:
            polished = _support_polish(gram, lin, theta)
            if polished is not None:
                p_res = _kkt_raw(gram, lin, polished)
                p_obj = value(polished)
                if p_res < residual and p_obj <= obj + 1e-12 * (1.0 + abs(obj)):
                    theta, obj, residual = polished, p_obj, p_res
                    momentum, t_acc = theta, 1.0
                    if residual <= tol:
                        break

    return _result(problem, theta, residual, iterations, residual <= tol)


def _kkt_raw(gram, lin, t) -> float:
    g = gram @ t + lin
    support = t > SUPPORT_EPS
    lam = float(np.min(g[support]))
    on_support = float(np.max(np.abs(g[support] - lam)))
    off = ~support
    off_support = float(np.max(np.maximum(0.0, lam - g[off]))) if np.any(off) else 0.0
    return max(on_support, off_support)


def _support_polish(gram, lin, t):
    """Exact KKT solve on the current support face.

    Solves the equality-constrained minimization restricted to the support of
    t (gradient equalization plus the mass constraint) in one least-squares
    solve; min-norm resolves rank-deficient faces, e.g. duplicated
    estimators.  Returns None when the face optimum leaves the simplex.
    """
    support = np.flatnonzero(t > SUPPORT_EPS)
    s = support.shape[0]
    kkt = np.zeros((s + 1, s + 1))
    kkt[:s, :s] = gram[np.ix_(support, support)]
    kkt[:s, s] = -1.0
    kkt[s, :s] = 1.0
    rhs = np.zeros(s + 1)
    rhs[:s] = -lin[support]
    rhs[s] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    w = sol[:s]
    if np.min(w) < -1e-12 or abs(float(np.sum(w)) - 1.0) > 1e-9:
        return None
    out = np.zeros_like(t)
    out[support] = np.maximum(w, 0.0)
    out /= np.sum(out)
    return out


def _result(problem, theta, residual, iterations, converged) -> SolveResult:
    point = SimplexPoint(theta)
    return SolveResult(point, problem.value(point), residual, iterations, converged)


def brute_force_grid(problem: QPProblem, resolution: float) -> SolveResult:
    """Exhaustive search over the lattice of simplex points with coordinates
    that are multiples of ``resolution`` (resolution is snapped to 1/K for
    the nearest integer K).  First lattice point in lexicographic order wins
    ties.  Guarded to M <= 5.
    """
    resolution = float(resolution)
    if not 0.0 < resolution <= 1.0:
        raise DomainError(f"resolution must be in (0, 1], got {resolution}")
    m = problem.size
    if m > _BRUTE_FORCE_MAX_M:
        raise DomainError(f"brute force search is limited to M <= {_BRUTE_FORCE_MAX_M}, got {m}")
    k = max(1, round(1.0 / resolution))
    lattice = _simplex_lattice(m, k)
    values = 0.5 * np.einsum("ij,jk,ik->i", lattice, problem.gram, lattice) \
        + lattice @ problem.lin + problem.const
    best = int(np.argmin(values))
    point = SimplexPoint(lattice[best])
    return SolveResult(point, float(values[best]), kkt_residual(problem, point),
                       lattice.shape[0], True)


def _simplex_lattice(m: int, k: int) -> np.ndarray:
    """All compositions of k into m parts, scaled by 1/k, in lexicographic
    order of the count vectors."""
    if m == 1:
        return np.ones((1, 1))
    dividers = np.array(list(combinations(range(k + m - 1), m - 1)), dtype=np.int64)
    padded = np.column_stack([
        np.full(dividers.shape[0], -1, dtype=np.int64),
        dividers,
        np.full(dividers.shape[0], k + m - 1, dtype=np.int64),
    ])
    counts = np.diff(padded, axis=1) - 1
    return counts.astype(float) / k
