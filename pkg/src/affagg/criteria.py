"""Aggregation objectives and their exact reduction to a simplex QP.

Every objective here is a quadratic polynomial in the weight vector theta,
because ||mu_theta||^2 = theta' G theta for the Gram matrix G of the fitted
vectors.  The hot path therefore evaluates through G; direct formulas over
the fitted vectors are kept as an independent slow path for cross-checks.

Conventions: a QPProblem stores (gram, lin, const) for the objective
    0.5 theta' gram theta + lin' theta + const.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, DomainError
from .estimators import EstimatorBank
from .validation import as_vector, check_index, check_nonnegative, readonly

OBJECTIVE_KINDS = ("h_pen", "v_pen", "w_pen", "u", "cp")


@dataclass(frozen=True)
class SimplexPoint:
    """A weight vector in the probability simplex.

    Construction accepts coordinates down to -1e-12 and mass within 1e-10 of
    one, clips the tiny negatives and renormalizes, so stored weights are an
    exact simplex point.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = as_vector(self.weights, "weights")
        if w.shape[0] == 0:
            raise DomainError("weights must be non-empty")
        if np.min(w) < -1e-12:
            raise DomainError(f"weight {np.min(w):.3g} below the -1e-12 tolerance")
        total = float(np.sum(w))
        if abs(total - 1.0) > 1e-10:
            raise DomainError(f"weights sum to {total!r}, not 1 within 1e-10")
        w = np.maximum(w, 0.0)
        w /= np.sum(w)
        object.__setattr__(self, "weights", readonly(w))

    @classmethod
    def vertex(cls, m: int, j: int) -> "SimplexPoint":
        w = np.zeros(m)
        w[check_index(j, "j", m)] = 1.0
        return cls(w)

    @classmethod
    def uniform(cls, m: int) -> "SimplexPoint":
        if m < 1:
            raise DomainError("m must be >= 1")
        return cls(np.full(m, 1.0 / m))

    @property
    def size(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Prior:
    """Strictly positive prior weights over the M estimators, summing to 1."""

    pi: np.ndarray

    def __post_init__(self):
        pi = as_vector(self.pi, "pi")
        if np.min(pi) <= 0:
            raise DomainError("prior weights must be strictly positive")
        if abs(float(np.sum(pi)) - 1.0) > 1e-10:
            raise DomainError(f"prior sums to {float(np.sum(pi))!r}, not 1 within 1e-10")
        object.__setattr__(self, "pi", readonly(pi))

    @classmethod
    def uniform(cls, m: int) -> "Prior":
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def normalized(cls, raw) -> "Prior":
        raw = as_vector(raw, "raw")
        total = float(np.sum(raw))
        if total <= 0 or np.min(raw) <= 0:
            raise DomainError("prior weights must be strictly positive")
        return cls(raw / total)

    @property
    def log_inverse(self) -> np.ndarray:
        return -np.log(self.pi)

    @property
    def size(self) -> int:
        return self.pi.shape[0]


@dataclass(frozen=True)
class QPProblem:
    """Quadratic objective 0.5 theta' gram theta + lin' theta + const."""

    gram: np.ndarray
    lin: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.gram, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DimensionMismatch("gram", "(M, M)", g.shape)
        lin = as_vector(self.lin, "lin", g.shape[0])
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - g.T)) > 1e-9 * scale:
            raise DomainError("gram must be symmetric within 1e-9")
        g = 0.5 * (g + g.T)
        eigs = np.linalg.eigvalsh(g)
        if eigs[0] < -1e-8 * max(abs(eigs[-1]), 1e-300):
            raise DomainError(f"gram must be PSD, min eigenvalue {eigs[0]:.3g}")
        object.__setattr__(self, "gram", readonly(g))
        object.__setattr__(self, "lin", readonly(lin))
        object.__setattr__(self, "const", float(self.const))

    @property
    def size(self) -> int:
        return self.gram.shape[0]

    def value(self, theta) -> float:
        t = theta.weights if isinstance(theta, SimplexPoint) else as_vector(theta, "theta", self.size)
        return float(0.5 * (t @ self.gram @ t) + self.lin @ t + self.const)

    def gradient(self, theta) -> np.ndarray:
        t = theta.weights if isinstance(theta, SimplexPoint) else as_vector(theta, "theta", self.size)
        return self.gram @ t + self.lin

    def vertex_values(self) -> np.ndarray:
        """Objective at every vertex e_j: 0.5 gram_jj + lin_j + const."""
        return 0.5 * np.diag(self.gram) + self.lin + self.const

    def to_json(self) -> str:
        return json.dumps({"gram": self.gram.tolist(), "lin": self.lin.tolist(),
                           "const": self.const})

    @classmethod
    def from_json(cls, text: str) -> "QPProblem":
        data = json.loads(text)
        return cls(np.asarray(data["gram"]), np.asarray(data["lin"]), float(data["const"]))


@dataclass(frozen=True)
class ObjectiveSpec:
    """Names one of the aggregation objectives together with its parameters."""

    kind: str
    sigma2: Optional[float] = None
    sigma2_hat: Optional[float] = None
    khat2: Optional[float] = None
    prior: Optional[Prior] = None

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise DomainError(f"unknown objective kind {self.kind!r}; expected one of {OBJECTIVE_KINDS}")
        need = {"h_pen": ("sigma2",), "cp": ("sigma2",), "v_pen": ("sigma2", "prior"),
                "w_pen": ("sigma2_hat",), "u": ("khat2", "prior")}[self.kind]
        for name in need:
            if getattr(self, name) is None:
                raise DomainError(f"objective {self.kind!r} requires parameter {name!r}")
        for name in ("sigma2", "sigma2_hat", "khat2"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, check_nonnegative(value, name))

    @classmethod
    def h_pen(cls, sigma2: float) -> "ObjectiveSpec":
        return cls("h_pen", sigma2=sigma2)

    @classmethod
    def cp(cls, sigma2: float) -> "ObjectiveSpec":
        return cls("cp", sigma2=sigma2)

    @classmethod
    def v_pen(cls, sigma2: float, prior: Prior) -> "ObjectiveSpec":
        return cls("v_pen", sigma2=sigma2, prior=prior)

    @classmethod
    def w_pen(cls, sigma2_hat: float) -> "ObjectiveSpec":
        return cls("w_pen", sigma2_hat=sigma2_hat)

    @classmethod
    def u(cls, khat2: float, prior: Prior) -> "ObjectiveSpec":
        return cls("u", khat2=khat2, prior=prior)


# -- scalar objectives (Gram fast path) -------------------------------------


def _weights(bank: EstimatorBank, theta) -> np.ndarray:
    t = theta.weights if isinstance(theta, SimplexPoint) else as_vector(theta, "theta")
    if t.shape[0] != bank.size:
        raise DimensionMismatch("theta", (bank.size,), t.shape)
    return t


def penalty(bank: EstimatorBank, theta) -> float:
    """Vertex-vanishing penalty sum_j theta_j ||mu_theta - mu_j||^2,
    via the Gram identity pen = sum_j theta_j G_jj - theta' G theta."""
    t = _weights(bank, theta)
    diag = np.diag(bank.gram)
    return float(t @ diag - t @ bank.gram @ t)


def cp_criterion(bank: EstimatorBank, sigma2: float, theta) -> float:
    """Unbiased risk estimate ||mu_theta||^2 - 2 y.mu_theta + 2 sigma^2 Tr(A_theta)."""
    sigma2 = check_nonnegative(sigma2, "sigma2")
    t = _weights(bank, theta)
    return float(t @ bank.gram @ t + t @ (-2.0 * bank.fit_dot_y + 2.0 * sigma2 * bank.traces))


def h_pen(bank: EstimatorBank, sigma2: float, theta) -> float:
    """Penalized criterion: cp_criterion plus half the penalty."""
    return cp_criterion(bank, sigma2, theta) + 0.5 * penalty(bank, theta)


def v_pen(bank: EstimatorBank, sigma2: float, prior: Prior, theta) -> float:
    """h_pen plus the prior term 46 sigma^2 sum_j theta_j log(1/pi_j)."""
    t = _weights(bank, theta)
    if prior.size != bank.size:
        raise DimensionMismatch("prior", (bank.size,), (prior.size,))
    return h_pen(bank, sigma2, theta) + 46.0 * sigma2 * float(t @ prior.log_inverse)


def w_pen(bank: EstimatorBank, sigma2_hat: float, theta) -> float:
    """h_pen with a plug-in variance in the trace term."""
    sigma2_hat = check_nonnegative(sigma2_hat, "sigma2_hat")
    t = _weights(bank, theta)
    quad = float(t @ bank.gram @ t)
    lin = float(t @ (-2.0 * bank.fit_dot_y + 2.0 * sigma2_hat * bank.traces))
    return quad + lin + 0.5 * penalty(bank, theta)


def u_objective(bank: EstimatorBank, khat2: float, prior: Prior, theta) -> float:
    """Trace-free prior-weighted criterion:
    ||mu_theta||^2 - 2 y.mu_theta + pen/2 + 32 khat2 sum_j theta_j log(1/pi_j)."""
    khat2 = check_nonnegative(khat2, "khat2")
    t = _weights(bank, theta)
    if prior.size != bank.size:
        raise DimensionMismatch("prior", (bank.size,), (prior.size,))
    quad = float(t @ bank.gram @ t)
    lin = float(t @ (-2.0 * bank.fit_dot_y))
    ent = float(t @ prior.log_inverse)
    return quad + lin + 0.5 * penalty(bank, theta) + 32.0 * khat2 * ent


def evaluate_objective(bank: EstimatorBank, spec: ObjectiveSpec, theta) -> float:
    if spec.kind == "h_pen":
        return h_pen(bank, spec.sigma2, theta)
    if spec.kind == "cp":
        return cp_criterion(bank, spec.sigma2, theta)
    if spec.kind == "v_pen":
        return v_pen(bank, spec.sigma2, spec.prior, theta)
    if spec.kind == "w_pen":
        return w_pen(bank, spec.sigma2_hat, theta)
    return u_objective(bank, spec.khat2, spec.prior, theta)


def qp_reduce(bank: EstimatorBank, spec: ObjectiveSpec) -> QPProblem:
    """Exact reduction of the named objective to (gram, lin, const).

    For the penalized objectives the quadratic coefficient is the Gram matrix
    itself (the quadratic parts of Cp and pen/2 partially cancel); for the
    plain cp objective it is twice the Gram matrix.
    """
    g = bank.gram
    diag = np.diag(g)
    if spec.kind == "cp":
        return QPProblem(2.0 * g, -2.0 * bank.fit_dot_y + 2.0 * spec.sigma2 * bank.traces)
    if spec.kind == "h_pen":
        lin = -2.0 * bank.fit_dot_y + 2.0 * spec.sigma2 * bank.traces + 0.5 * diag
        return QPProblem(g, lin)
    if spec.kind == "w_pen":
        lin = -2.0 * bank.fit_dot_y + 2.0 * spec.sigma2_hat * bank.traces + 0.5 * diag
        return QPProblem(g, lin)
    if spec.kind == "v_pen":
        if spec.prior.size != bank.size:
            raise DimensionMismatch("prior", (bank.size,), (spec.prior.size,))
        lin = (-2.0 * bank.fit_dot_y + 2.0 * spec.sigma2 * bank.traces + 0.5 * diag
               + 46.0 * spec.sigma2 * spec.prior.log_inverse)
        return QPProblem(g, lin)
    if spec.prior.size != bank.size:
        raise DimensionMismatch("prior", (bank.size,), (spec.prior.size,))
    lin = -2.0 * bank.fit_dot_y + 0.5 * diag + 32.0 * spec.khat2 * spec.prior.log_inverse
    return QPProblem(g, lin)


# -- direct slow path (independent cross-check route) ------------------------


def mixture_fit(bank: EstimatorBank, theta) -> np.ndarray:
    """The mixed fitted vector mu_theta = sum_j theta_j fits[j]."""
    return _weights(bank, theta) @ bank.fits


def penalty_direct(bank: EstimatorBank, theta) -> float:
    t = _weights(bank, theta)
    mu = t @ bank.fits
    diffs = bank.fits - mu
    return float(t @ np.sum(diffs * diffs, axis=1))


def cp_direct(bank: EstimatorBank, sigma2: float, theta) -> float:
    t = _weights(bank, theta)
    mu = t @ bank.fits
    trace = float(t @ bank.traces)
    return float(mu @ mu - 2.0 * bank.observation @ mu + 2.0 * sigma2 * trace)


def h_pen_direct(bank: EstimatorBank, sigma2: float, theta) -> float:
    return cp_direct(bank, sigma2, theta) + 0.5 * penalty_direct(bank, theta)


def v_pen_direct(bank: EstimatorBank, sigma2: float, prior: Prior, theta) -> float:
    t = _weights(bank, theta)
    return h_pen_direct(bank, sigma2, theta) + 46.0 * sigma2 * float(t @ prior.log_inverse)


def w_pen_direct(bank: EstimatorBank, sigma2_hat: float, theta) -> float:
    t = _weights(bank, theta)
    mu = t @ bank.fits
    trace = float(t @ bank.traces)
    return float(mu @ mu - 2.0 * bank.observation @ mu + 2.0 * sigma2_hat * trace
                 + 0.5 * penalty_direct(bank, theta))


def u_direct(bank: EstimatorBank, khat2: float, prior: Prior, theta) -> float:
    t = _weights(bank, theta)
    mu = t @ bank.fits
    return float(mu @ mu - 2.0 * bank.observation @ mu + 0.5 * penalty_direct(bank, theta)
                 + 32.0 * khat2 * float(t @ prior.log_inverse))


def evaluate_objective_direct(bank: EstimatorBank, spec: ObjectiveSpec, theta) -> float:
    if spec.kind == "h_pen":
        return h_pen_direct(bank, spec.sigma2, theta)
    if spec.kind == "cp":
        return cp_direct(bank, spec.sigma2, theta)
    if spec.kind == "v_pen":
        return v_pen_direct(bank, spec.sigma2, spec.prior, theta)
    if spec.kind == "w_pen":
        return w_pen_direct(bank, spec.sigma2_hat, theta)
    return u_direct(bank, spec.khat2, spec.prior, theta)


# -- decomposition quantities for the deterministic risk bound ---------------


def delta_jk(bank: EstimatorBank, f, xi, sigma2: float, j: int, k: int) -> float:
    """Noise functional 2 xi.((A_j - A_k) f + b_j - b_k)
    + 2 (xi.(A_j - A_k) xi - sigma^2 Tr(A_j - A_k)).

    This is the gap between the risk-estimate difference and the true risk
    difference of the pair; ground truth f and noise xi must be supplied
    (simulation context only).
    """
    sigma2 = check_nonnegative(sigma2, "sigma2")
    j = check_index(j, "j", bank.size)
    k = check_index(k, "k", bank.size)
    f = as_vector(f, "f", bank.dim)
    xi = as_vector(xi, "xi", bank.dim)
    ej, ek = bank.estimators[j], bank.estimators[k]
    mean_diff = (ej.apply_linear(f) + ej.offset) - (ek.apply_linear(f) + ek.offset)
    chaos = float(xi @ ej.apply_linear(xi) - xi @ ek.apply_linear(xi))
    return float(2.0 * (xi @ mean_diff) + 2.0 * (chaos - sigma2 * (bank.traces[j] - bank.traces[k])))


def decomposition_qv(bank: EstimatorBank, f, j: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The matrix/vector pair (Q_jk, v_jk) splitting delta minus half the
    pairwise fit distance into a centered chaos, a linear term and two
    deterministic compensators.

    With B = A_k - A_j:  Q = (2 I - B'/2) B  and  v = (2 I - B') (B f + b_k - b_j).
    When both estimators have operator norm at most 1 the classical bounds
    ||Q||_op <= 6, ||Q||_F <= 3 ||B||_F and ||v|| <= 4 ||B f + b_k - b_j||
    are verified and a violation raises, since it would indicate a bug.
    """
    j = check_index(j, "j", bank.size)
    k = check_index(k, "k", bank.size)
    f = as_vector(f, "f", bank.dim)
    ej, ek = bank.estimators[j], bank.estimators[k]
    b = ek.to_dense() - ej.to_dense()
    q = 2.0 * b - 0.5 * (b.T @ b)
    u = b @ f + (ek.offset - ej.offset)
    v = 2.0 * u - b.T @ u
    if ej.operator_norm(1e-8) <= 1.0 + 1e-8 and ek.operator_norm(1e-8) <= 1.0 + 1e-8:
        b_fro = np.linalg.norm(b)
        if np.linalg.norm(q, 2) > 6.0 + 1e-8:
            raise DomainError("internal bound violated: ||Q||_op > 6 for an admissible pair")
        if np.linalg.norm(q) > 3.0 * b_fro + 1e-8:
            raise DomainError("internal bound violated: ||Q||_F > 3 ||B||_F")
        if np.linalg.norm(v) > 4.0 * np.linalg.norm(u) + 1e-8:
            raise DomainError("internal bound violated: ||v|| > 4 ||B f + db||")
    return q, v


def pairwise_fit_distance_sq(bank: EstimatorBank, j: int, k: int) -> float:
    """||mu_j - mu_k||^2 computed from the Gram matrix."""
    g = bank.gram
    return float(g[j, j] - 2.0 * g[j, k] + g[k, k])


def entropy_term(prior: Prior, theta) -> float:
    """Linear entropy sum_j theta_j log(1/pi_j)."""
    t = theta.weights if isinstance(theta, SimplexPoint) else as_vector(theta, "theta", prior.size)
    return float(t @ prior.log_inverse)
