"""Normalised negative log-likelihood, its derivatives and convexity checks.

The likelihood conditions on the first frame.  With per-pair counts
``a = sum X^t``, ``b = sum X^t X^{t-1}`` and ``d = sum (1-X^t)(1-X^{t-1})``
over ``t = 1..n`` it reads::

    l(theta) = 1/p   * sum_{i<j} log(1 + e^s0 + e^s1)
             - 1/(n p) * sum_{i<j} [ s0 a + d log(1 + e^s1) + b log(1 + e^(s1 - s0)) ]

Every term depends on the parameters only through the pair sums ``s0, s1``,
so each Hessian block is diagonally balanced.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from scipy.special import expit

from .model import ParamVector, SnapshotSeries, _pair_moments, innovation_probs, log_partition, pair_index

DENSE_EIG_LIMIT = 4000
EIG_TOL = 1e-8
SIGN_THRESHOLD = 1e-6


@dataclass(frozen=True)
class SufficientStats:
    """Per-pair counts (lexicographic ``i < j`` order) over ``n`` transitions.

    Counts are integers for observed data; expected counts are real-valued.
    """

    p: int
    n: int
    a: np.ndarray
    b: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        npairs = self.p * (self.p - 1) // 2
        for name in ("a", "b", "d"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (npairs,):
                raise ValueError(f"{name} must have shape ({npairs},)")
            object.__setattr__(self, name, arr)
        if self.n < 1:
            raise ValueError("n must be at least 1")

    def node_degree_totals(self) -> np.ndarray:
        """``sum_t sum_{j != i} X^t_{ij}`` for every node."""
        iu, ju = pair_index(self.p)
        return np.bincount(iu, self.a, self.p) + np.bincount(ju, self.a, self.p)

    def node_totals(self, field: str) -> np.ndarray:
        iu, ju = pair_index(self.p)
        w = getattr(self, field)
        return np.bincount(iu, w, self.p) + np.bincount(ju, w, self.p)


@dataclass(frozen=True)
class HessianBlocks:
    """``[[V1, V2], [V2, V3]]`` in the ``(beta0, beta1)`` ordering."""

    V1: np.ndarray
    V2: np.ndarray
    V3: np.ndarray

    @property
    def p(self) -> int:
        return self.V1.shape[0]

    def full(self) -> np.ndarray:
        return np.block([[self.V1, self.V2], [self.V2, self.V3]])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        p = self.p
        x0, x1 = x[:p], x[p:]
        return np.concatenate([self.V1 @ x0 + self.V2 @ x1, self.V2 @ x0 + self.V3 @ x1])

    def balance_residual(self) -> float:
        """Largest relative gap between a diagonal entry and its off-diagonal row sum."""
        worst = 0.0
        for V in (self.V1, self.V2, self.V3):
            diag = np.diag(V)
            off = V.sum(axis=1) - diag
            scale = np.maximum(np.abs(diag), np.abs(V).sum(axis=1) - np.abs(diag))
            scale = np.where(scale > 0, scale, 1.0)
            worst = max(worst, float(np.max(np.abs(diag - off) / scale)))
        return worst


def sufficient_stats(series: SnapshotSeries) -> SufficientStats:
    if series.n < 1:
        raise ValueError("need at least one transition")
    X = series.edges.astype(np.int64)
    cur, prev = X[1:], X[:-1]
    a = cur.sum(axis=0)
    b = (cur & prev).sum(axis=0)
    d = ((1 - cur) & (1 - prev)).sum(axis=0)
    return SufficientStats(series.p, series.n, a, b, d)


def expected_stats(theta: ParamVector, n: int) -> SufficientStats:
    """Stationary expectations of ``(a, b, d)`` for every pair."""
    s0, s1 = theta.pair_sums()
    a, b, d = _pair_moments(s0, s1, n)
    return SufficientStats(theta.p, n, a, b, d)


def _check_dims(theta: ParamVector, stats: SufficientStats) -> None:
    if theta.p != stats.p:
        raise ValueError(f"dimension mismatch: theta has p = {theta.p}, stats p = {stats.p}")


def _softplus(x):
    return np.logaddexp(0.0, x)


def neg_log_likelihood(theta: ParamVector, stats: SufficientStats) -> float:
    _check_dims(theta, stats)
    s0, s1 = theta.pair_sums()
    p, n = stats.p, stats.n
    data = s0 * stats.a + stats.d * _softplus(s1) + stats.b * _softplus(s1 - s0)
    return float(log_partition(s0, s1).sum() / p - data.sum() / (n * p))


def _pair_gradient(theta, stats):
    s0, s1 = theta.pair_sums()
    p, n = stats.p, stats.n
    q0, q1, _ = innovation_probs(s0, s1)
    sig_diff = expit(s1 - s0)
    g0 = q0 / p - (stats.a - stats.b * sig_diff) / (n * p)
    g1 = q1 / p - (stats.d * expit(s1) + stats.b * sig_diff) / (n * p)
    return g0, g1


def _node_sum(p, w):
    iu, ju = pair_index(p)
    return np.bincount(iu, w, p) + np.bincount(ju, w, p)


def gradient(theta: ParamVector, stats: SufficientStats) -> np.ndarray:
    """``dl/dbeta0`` followed by ``dl/dbeta1`` (length ``2p``)."""
    _check_dims(theta, stats)
    g0, g1 = _pair_gradient(theta, stats)
    return np.concatenate([_node_sum(stats.p, g0), _node_sum(stats.p, g1)])


def loss_and_gradient(theta: ParamVector, stats: SufficientStats) -> tuple[float, np.ndarray]:
    return neg_log_likelihood(theta, stats), gradient(theta, stats)


def _balanced(p: int, off: np.ndarray) -> np.ndarray:
    iu, ju = pair_index(p)
    V = np.zeros((p, p))
    V[iu, ju] = off
    V[ju, iu] = off
    V[np.diag_indices(p)] = V.sum(axis=1)
    return V


def _pair_hessian(theta, stats):
    s0, s1 = theta.pair_sums()
    p, n = stats.p, stats.n
    q0, q1, _ = innovation_probs(s0, s1)
    dsig_diff = expit(s1 - s0) * expit(s0 - s1)
    dsig1 = expit(s1) * expit(-s1)
    h00 = q0 * (1.0 - q0) / p - stats.b * dsig_diff / (n * p)
    h01 = -q0 * q1 / p + stats.b * dsig_diff / (n * p)
    h11 = q1 * (1.0 - q1) / p - (stats.d * dsig1 + stats.b * dsig_diff) / (n * p)
    return h00, h01, h11


def hessian(theta: ParamVector, stats: SufficientStats) -> HessianBlocks:
    _check_dims(theta, stats)
    h00, h01, h11 = _pair_hessian(theta, stats)
    p = stats.p
    return HessianBlocks(_balanced(p, h00), _balanced(p, h01), _balanced(p, h11))


def expected_hessian(theta_eval: ParamVector, theta_true: ParamVector, n: int) -> HessianBlocks:
    """Hessian of the expected loss at ``theta_eval`` for data generated at ``theta_true``."""
    if theta_eval.p != theta_true.p:
        raise ValueError("theta_eval and theta_true must have the same p")
    return hessian(theta_eval, expected_stats(theta_true, n))


def _check_symmetric(blocks: HessianBlocks, tol: float = 1e-12) -> None:
    for name in ("V1", "V2", "V3"):
        V = getattr(blocks, name)
        if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape != blocks.V1.shape:
            raise ValueError(f"{name} must be a square p x p block")
        scale = max(1.0, float(np.abs(V).max(initial=0.0)))
        if np.abs(V - V.T).max(initial=0.0) > tol * scale:
            raise ValueError(f"{name} is not symmetric")


def smallest_eigenvalue(blocks: HessianBlocks) -> float:
    _check_symmetric(blocks)
    dim = 2 * blocks.p
    if dim <= DENSE_EIG_LIMIT:
        return float(scipy.linalg.eigh(blocks.full(), eigvals_only=True, subset_by_index=[0, 0])[0])
    op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=blocks.matvec, dtype=float)
    vals = scipy.sparse.linalg.eigsh(op, k=1, which="SA", tol=EIG_TOL, return_eigenvectors=False)
    return float(vals[0])


def eigen_sign(value: float, threshold: float = SIGN_THRESHOLD) -> str:
    """``'+'``, ``'-'`` or ``'0'`` (indeterminate) for a smallest eigenvalue."""
    if value > threshold:
        return "+"
    if value < -threshold:
        return "-"
    return "0"


def _is_pd(M: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return True


def block_pd_sufficient(blocks: HessianBlocks) -> bool:
    """One-sided certificate: ``-V2``, ``V2 + V3`` and ``V2 + V1`` all positive definite."""
    V1, V2, V3 = blocks.V1, blocks.V2, blocks.V3
    return _is_pd(-V2) and _is_pd(V2 + V3) and _is_pd(V2 + V1)
