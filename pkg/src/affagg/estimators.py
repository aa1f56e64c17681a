"""Affine estimators mu = A y + b and the families used in the experiments.

The linear part A is stored in a structured representation (dense, diagonal,
projector, scaled identity, zero) so that banks with n up to ~1e4 never
require materializing n x n matrices unless a genuinely dense map is given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, DimensionMismatch, DomainError
from .validation import as_matrix, as_vector, check_positive, readonly

KINDS = ("dense", "diagonal", "projector", "scaled_identity", "zero")

_PROJECTOR_ORTHO_TOL = 1e-10
_RANK_RTOL = 1e-10
_POWER_MAX_ITER = 10_000
_POWER_RESTARTS = 2


@dataclass(frozen=True)
class AffineEstimator:
    """The affine map y -> A y + b with a structured linear part.

    Exactly one payload field is set according to ``kind``:

    - ``dense``: ``matrix`` is the full (n, n) map
    - ``diagonal``: ``weights`` holds the diagonal entries
    - ``projector``: ``basis`` is a column-orthonormal (n, d) map; A = Q Q^T
    - ``scaled_identity``: ``scale`` is the multiplier of the identity
    - ``zero``: no payload; the estimator is the constant b

    Set ``admissible=True`` to assert at construction that the operator norm
    of the linear part is at most 1 (+1e-8), the assumption under which the
    sharp risk bounds hold.
    """

    kind: str
    dim: int
    offset: np.ndarray
    matrix: np.ndarray | None = None
    weights: np.ndarray | None = None
    basis: np.ndarray | None = None
    scale: float | None = None
    admissible: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown estimator kind {self.kind!r}")
        n = int(self.dim)
        if n < 1:
            raise DomainError(f"dim must be >= 1, got {self.dim}")
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "offset", readonly(as_vector(self.offset, "offset", n)))
        if self.kind == "dense":
            object.__setattr__(self, "matrix", readonly(as_matrix(self.matrix, "matrix", (n, n))))
        elif self.kind == "diagonal":
            object.__setattr__(self, "weights", readonly(as_vector(self.weights, "weights", n)))
        elif self.kind == "projector":
            q = as_matrix(self.basis, "basis", (n, None))
            if q.shape[1] > n:
                raise DimensionMismatch("basis", (n, f"<= {n}"), q.shape)
            gram = q.T @ q
            if q.shape[1] and np.max(np.abs(gram - np.eye(q.shape[1]))) > _PROJECTOR_ORTHO_TOL:
                raise DomainError("projector basis is not column-orthonormal within 1e-10")
            object.__setattr__(self, "basis", readonly(q))
        elif self.kind == "scaled_identity":
            s = float(self.scale)
            if not np.isfinite(s):
                raise DomainError("scale must be finite")
            object.__setattr__(self, "scale", s)
        if self.admissible and self.operator_norm() > 1.0 + 1e-8:
            raise DomainError(
                f"estimator flagged admissible but operator norm {self.operator_norm():.6g} > 1"
            )

    # -- constructors -------------------------------------------------

    @classmethod
    def dense(cls, matrix, offset=None, admissible=False) -> "AffineEstimator":
        matrix = as_matrix(matrix, "matrix")
        if matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch("matrix", "(n, n)", matrix.shape)
        n = matrix.shape[0]
        return cls("dense", n, _offset_or_zero(offset, n), matrix=matrix, admissible=admissible)

    @classmethod
    def diagonal(cls, weights, offset=None, admissible=False) -> "AffineEstimator":
        weights = as_vector(weights, "weights")
        n = weights.shape[0]
        return cls("diagonal", n, _offset_or_zero(offset, n), weights=weights, admissible=admissible)

    @classmethod
    def projector(cls, basis, offset=None, admissible=True) -> "AffineEstimator":
        basis = as_matrix(basis, "basis")
        n = basis.shape[0]
        return cls("projector", n, _offset_or_zero(offset, n), basis=basis, admissible=admissible)

    @classmethod
    def scaled_identity(cls, scale, dim, offset=None, admissible=False) -> "AffineEstimator":
        return cls("scaled_identity", dim, _offset_or_zero(offset, dim), scale=scale,
                   admissible=admissible)

    @classmethod
    def identity(cls, dim, offset=None) -> "AffineEstimator":
        return cls.scaled_identity(1.0, dim, offset, admissible=True)

    @classmethod
    def zero(cls, dim, offset=None) -> "AffineEstimator":
        return cls("zero", dim, _offset_or_zero(offset, dim), admissible=True)

    # -- operations ----------------------------------------------------

    def apply_linear(self, v: np.ndarray) -> np.ndarray:
        """Return A v, exploiting the structured representation."""
        v = as_vector(v, "v", self.dim)
        if self.kind == "dense":
            return self.matrix @ v
        if self.kind == "diagonal":
            return self.weights * v
        if self.kind == "projector":
            return self.basis @ (self.basis.T @ v)
        if self.kind == "scaled_identity":
            return self.scale * v
        return np.zeros(self.dim)

    def apply(self, y: np.ndarray) -> np.ndarray:
        """Return A y + b."""
        return self.apply_linear(y) + self.offset

    def trace(self) -> float:
        """Trace of the linear part; exact for structured representations."""
        if self.kind == "dense":
            return float(np.trace(self.matrix))
        if self.kind == "diagonal":
            return float(np.sum(self.weights))
        if self.kind == "projector":
            return float(self.basis.shape[1])
        if self.kind == "scaled_identity":
            return self.scale * self.dim
        return 0.0

    def operator_norm(self, tol: float = 1e-10) -> float:
        """Largest singular value of the linear part.

        Structured representations use closed forms.  The dense fallback runs
        power iteration on A^T A with deterministic restarts; non-convergence
        after the iteration cap raises ConvergenceError carrying the best
        estimate rather than silently returning it.
        """
        check_positive(tol, "tol")
        if self.kind == "diagonal":
            return float(np.max(np.abs(self.weights)))
        if self.kind == "projector":
            return 1.0 if self.basis.shape[1] else 0.0
        if self.kind == "scaled_identity":
            return abs(self.scale)
        if self.kind == "zero":
            return 0.0
        return _power_iteration_norm(self.matrix, tol)

    def frobenius_norm(self) -> float:
        if self.kind == "dense":
            return float(np.linalg.norm(self.matrix))
        if self.kind == "diagonal":
            return float(np.linalg.norm(self.weights))
        if self.kind == "projector":
            return math.sqrt(self.basis.shape[1])
        if self.kind == "scaled_identity":
            return abs(self.scale) * math.sqrt(self.dim)
        return 0.0

    def to_dense(self) -> np.ndarray:
        """Materialize the linear part as an (n, n) array (tests, small n)."""
        if self.kind == "dense":
            return np.array(self.matrix)
        if self.kind == "diagonal":
            return np.diag(self.weights)
        if self.kind == "projector":
            return self.basis @ self.basis.T
        if self.kind == "scaled_identity":
            return self.scale * np.eye(self.dim)
        return np.zeros((self.dim, self.dim))

    def is_projector(self, tol: float = 1e-8) -> bool:
        """True when the linear part is an orthoprojector (P = P^T = P^2)."""
        if self.kind == "projector" or self.kind == "zero":
            return True
        if self.kind == "diagonal":
            return bool(np.all(np.minimum(np.abs(self.weights), np.abs(self.weights - 1)) <= tol))
        if self.kind == "scaled_identity":
            return min(abs(self.scale), abs(self.scale - 1)) <= tol
        a = self.matrix
        return (np.max(np.abs(a - a.T)) <= tol) and (np.max(np.abs(a @ a - a)) <= tol)


def _offset_or_zero(offset, n: int) -> np.ndarray:
    if offset is None:
        return np.zeros(n)
    return as_vector(offset, "offset", n)


def _power_iteration_norm(a: np.ndarray, tol: float) -> float:
    """Power iteration on A^T A; deterministic seeded restarts."""
    n = a.shape[0]
    best = 0.0
    for restart in range(_POWER_RESTARTS + 1):
        rng = np.random.default_rng(restart)
        v = np.ones(n) if restart == 0 else rng.standard_normal(n)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        v /= nv
        sigma = 0.0
        for _ in range(_POWER_MAX_ITER):
            w = a @ v
            z = a.T @ w
            nz = np.linalg.norm(z)
            if nz == 0.0:
                return 0.0
            sigma_new = math.sqrt(float(v @ z))
            v = z / nz
            if abs(sigma_new - sigma) <= tol * max(sigma_new, 1e-300):
                return max(best, sigma_new)
            sigma = sigma_new
        best = max(best, sigma)
    raise ConvergenceError(
        f"operator norm power iteration did not converge in {_POWER_MAX_ITER} iterations", best
    )


def mix(estimators: Sequence[AffineEstimator], weights) -> AffineEstimator:
    """Convex (or any linear) combination of affine estimators.

    A_u = sum_j u_j A_j and b_u = sum_j u_j b_j.  The result keeps the
    cheapest representation that is closed under the combination.
    """
    weights = as_vector(weights, "weights", len(estimators))
    if len(estimators) == 0:
        raise DomainError("mix needs at least one estimator")
    n = estimators[0].dim
    for est in estimators:
        if est.dim != n:
            raise DimensionMismatch("estimator dim", n, est.dim)
    offset = np.zeros(n)
    for w, est in zip(weights, estimators):
        if w != 0.0:
            offset += w * est.offset

    active = [(w, e) for w, e in zip(weights, estimators) if w != 0.0]
    if len(active) == 1 and active[0][0] == 1.0:
        est = active[0][1]
        return AffineEstimator(est.kind, n, offset, matrix=est.matrix, weights=est.weights,
                               basis=est.basis, scale=est.scale)
    kinds = {e.kind for _, e in active}
    if kinds <= {"scaled_identity", "zero"}:
        s = sum(w * (e.scale or 0.0) for w, e in active if e.kind == "scaled_identity")
        return AffineEstimator.scaled_identity(float(s), n, offset)
    if kinds <= {"diagonal", "scaled_identity", "zero"}:
        d = np.zeros(n)
        for w, e in active:
            if e.kind == "diagonal":
                d += w * e.weights
            elif e.kind == "scaled_identity":
                d += w * e.scale
        return AffineEstimator.diagonal(d, offset)
    m = np.zeros((n, n))
    for w, e in active:
        m += w * e.to_dense()
    return AffineEstimator.dense(m, offset)


# -- estimator bank --------------------------------------------------------


@dataclass(frozen=True)
class EstimatorBank:
    """M estimators evaluated on one observation vector, with cached algebra.

    ``fits[j] = A_j y + b_j``; ``gram[j, k] = fits[j] . fits[k]``;
    ``traces[j] = Tr(A_j)``.  The Gram matrix is the single object through
    which every aggregation objective is evaluated.
    """

    estimators: tuple[AffineEstimator, ...]
    observation: np.ndarray
    fits: np.ndarray
    gram: np.ndarray
    traces: np.ndarray

    @classmethod
    def build(cls, estimators: Sequence[AffineEstimator], y) -> "EstimatorBank":
        estimators = tuple(estimators)
        if len(estimators) < 2:
            raise DomainError(f"a bank needs M >= 2 estimators, got {len(estimators)}")
        n = estimators[0].dim
        y = as_vector(y, "y", n)
        for j, est in enumerate(estimators):
            if est.dim != n:
                raise DimensionMismatch(f"estimators[{j}].dim", n, est.dim)
        fits = np.stack([est.apply(y) for est in estimators])
        gram = fits @ fits.T
        gram = 0.5 * (gram + gram.T)
        traces = np.array([est.trace() for est in estimators])
        bank = cls(estimators, readonly(y), readonly(fits), readonly(gram), readonly(traces))
        bank._check_gram()
        return bank

    def _check_gram(self):
        norms_sq = np.sum(self.fits ** 2, axis=1)
        diag = np.diag(self.gram)
        scale = max(1.0, float(np.max(norms_sq)))
        if np.max(np.abs(diag - norms_sq)) > 1e-9 * scale:
            raise DomainError("gram diagonal disagrees with fit norms")
        eigs = np.linalg.eigvalsh(self.gram)
        if eigs[0] < -1e-8 * max(eigs[-1], 1e-300):
            raise DomainError(f"gram matrix is not PSD (min eig {eigs[0]:.3g})")

    @property
    def size(self) -> int:
        return len(self.estimators)

    @property
    def dim(self) -> int:
        return self.estimators[0].dim

    @cached_property
    def fit_dot_y(self) -> np.ndarray:
        """The M inner products y . fits[j], used by every criterion."""
        out = self.fits @ self.observation
        out.setflags(write=False)
        return out

    @cached_property
    def max_operator_norm(self) -> float:
        return max(est.operator_norm(1e-8) for est in self.estimators)


# -- estimator families ----------------------------------------------------


@dataclass(frozen=True)
class ProjectionResult:
    """Outcome of building a column-span projector, with rank diagnostics."""

    estimator: AffineEstimator
    rank: int
    deficient: bool


def make_projection(X, cols: Sequence[int]) -> ProjectionResult:
    """Orthoprojector onto the span of the selected columns of X.

    Columns whose singular values fall below 1e-10 (relative) are dropped;
    when that happens the projector onto the actual span is returned with
    ``deficient=True``.  An empty selection gives the zero map.
    """
    X = as_matrix(X, "X")
    cols = sorted(set(int(c) for c in cols))
    for c in cols:
        if not 0 <= c < X.shape[1]:
            raise DomainError(f"column index {c} out of range [0, {X.shape[1]})")
    n = X.shape[0]
    if not cols:
        return ProjectionResult(AffineEstimator.zero(n), 0, False)
    sub = X[:, cols]
    u, s, _ = np.linalg.svd(sub, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return ProjectionResult(AffineEstimator.zero(n), 0, True)
    rank = int(np.sum(s > _RANK_RTOL * s[0]))
    if rank == 0:
        return ProjectionResult(AffineEstimator.zero(n), 0, True)
    basis = u[:, :rank]
    return ProjectionResult(AffineEstimator.projector(basis), rank, rank < len(cols))


def column_subset_projectors(X, k: int) -> list[ProjectionResult]:
    """Projections onto the spans of all k-subsets of columns, in
    lexicographic order of the index tuples."""
    X = as_matrix(X, "X")
    if not 1 <= k <= X.shape[1]:
        raise DomainError(f"k must be in [1, {X.shape[1]}], got {k}")
    return [make_projection(X, cols) for cols in combinations(range(X.shape[1]), k)]


@dataclass(frozen=True)
class SmoothnessGrid:
    """Geometric grid of smoothness indices for adaptive filter aggregation."""

    n: int
    M: int
    betas: np.ndarray = field(repr=False)


def smoothness_grid(n: int) -> SmoothnessGrid:
    """Grid with M = ceil(120 log(n) (log log n)^2) points and ratio
    1 + 1/(log(n) log log n), starting at 1."""
    n = int(n)
    if n < 3:
        raise DomainError(f"smoothness grid needs n >= 3, got {n}")
    log_n = math.log(n)
    loglog_n = math.log(log_n)
    M = math.ceil(120.0 * log_n * loglog_n ** 2)
    ratio = 1.0 + 1.0 / (log_n * loglog_n)
    betas = np.empty(M)
    betas[0] = 1.0
    for j in range(1, M):
        betas[j] = betas[j - 1] * ratio
    return SmoothnessGrid(n, M, readonly(betas))


def monotone_filter_weights(n: int, beta: float) -> np.ndarray:
    """Default ordered diagonal filter for smoothness index beta.

    l_j = max(0, 1 - (j / n^(1/(2 beta + 1)))^beta) for j = 1..n; weights lie
    in [0, 1] so the filter always has operator norm at most 1.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    beta = check_positive(beta, "beta")
    j = np.arange(1, n + 1, dtype=float)
    cutoff = float(n) ** (1.0 / (2.0 * beta + 1.0))
    return np.maximum(0.0, 1.0 - (j / cutoff) ** beta)


def smoothness_estimators(grid: SmoothnessGrid,
                          filter_family=monotone_filter_weights) -> list[AffineEstimator]:
    """Diagonal filter estimators, one per grid point.

    ``filter_family(n, beta)`` must return n weights with |weight| <= 1 so the
    resulting family is admissible.
    """
    return [AffineEstimator.diagonal(filter_family(grid.n, b), admissible=True)
            for b in grid.betas]


def difference_variance(y) -> float:
    """First-difference noise variance estimate for equispaced designs:
    sum of squared consecutive differences over 2(n-1)."""
    y = as_vector(y, "y")
    if y.shape[0] < 2:
        raise DomainError("difference variance needs n >= 2 observations")
    d = np.diff(y)
    return float(d @ d) / (2.0 * (y.shape[0] - 1))
