"""Method-of-moments start values, the static beta-model and the local MLE.

All three fits are gradient descent with Armijo backtracking on a smooth
objective.  Loss changes are evaluated pair by pair (``delta``) rather than
as a difference of two large totals, so the sufficient-decrease test stays
meaningful down to gradients of order 1e-8.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit, logit

from .model import ParamVector, SnapshotSeries, innovation_probs, log_partition, pair_index
from .objective import (
    SufficientStats,
    _node_sum,
    _pair_gradient,
    _softplus,
    gradient,
    hessian,
    neg_log_likelihood,
    smallest_eigenvalue,
    sufficient_stats,
)

log = logging.getLogger(__name__)


class EstimationError(RuntimeError):
    """Base class for data configurations the estimators cannot handle."""


class DegenerateDegree(EstimationError):
    def __init__(self, node: int, total: float, maximum: float):
        self.node = node
        super().__init__(
            f"DegenerateDegree({node}): pooled degree {total:g} is on the boundary "
            f"[0, {maximum:g}]; no finite moment estimate exists"
        )


class NoFiniteSolution(EstimationError):
    def __init__(self, node: int, total: float, low: float, high: float):
        self.node = node
        super().__init__(
            f"NoFiniteSolution({node}): lagged co-occurrence total {total:g} outside "
            f"the attainable range ({low:g}, {high:g}) with lambda = 0"
        )


class LineSearchFailure(RuntimeError):
    def __init__(self, x: np.ndarray, grad_norm: float):
        self.x = x
        self.grad_norm = grad_norm
        super().__init__(f"no Armijo step found (gradient sup-norm {grad_norm:.3e})")


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverOptions:
    """Gradient-descent controls.

    ``fixed_step`` switches from Armijo backtracking to a constant step.
    The first trial step of each line search is the Barzilai-Borwein step
    ``s.y / y.y`` from the previous move when ``bb_step`` is set (capped at
    ``max_step``); otherwise twice the last accepted step (``warm_step``) or
    ``init_step``.  Backtracking keeps every accepted step a descent step.
    """

    max_iters: int = 5000
    grad_tol: float = 1e-8
    fixed_step: float | None = None
    armijo_c: float = 1e-4
    shrink: float = 0.5
    init_step: float = 1.0
    warm_step: bool = True
    bb_step: bool = True
    max_step: float = 1e6
    box: float | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.fixed_step is not None and not self.fixed_step > 0:
            raise ValueError("fixed_step must be positive")
        if not (0 < self.armijo_c < 1 and 0 < self.shrink < 1 and 0 < self.init_step <= self.max_step):
            raise ValueError("invalid line-search constants")
        if self.box is not None and not self.box > 0:
            raise ValueError("box radius must be positive")


@dataclass
class FitResult:
    theta_hat: ParamVector
    iterations: int
    final_grad_norm: float
    final_loss: float
    converged: bool
    trace: list[float] = field(default_factory=list, repr=False)
    min_eigenvalue: float | None = None


@dataclass
class _Descent:
    x: np.ndarray
    iterations: int
    grad_norm: float
    converged: bool
    trace: list[float]


def gradient_descent(
    value: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    delta: Callable[[np.ndarray, np.ndarray], float],
    x0: np.ndarray,
    opts: SolverOptions,
) -> _Descent:
    """Minimise ``value`` from ``x0``; ``delta(new, old)`` returns ``value(new) - value(old)``.

    ``trace`` holds the loss after every accepted step, accumulated from the
    accurate ``delta`` values.
    """
    x = np.array(x0, dtype=float)
    if opts.box is not None:
        x = np.clip(x, -opts.box, opts.box)
    g = grad(x)
    gnorm = float(np.max(np.abs(g)))
    trace = [value(x)]
    step = opts.init_step
    bb = None
    it = 0
    while gnorm > opts.grad_tol and it < opts.max_iters:
        it += 1
        if opts.fixed_step is not None:
            x_new = x - opts.fixed_step * g
            if opts.box is not None:
                x_new = np.clip(x_new, -opts.box, opts.box)
            change = delta(x_new, x)
        else:
            if bb is not None:
                eta = bb
            elif opts.warm_step:
                eta = min(opts.init_step, 2.0 * step)
            else:
                eta = opts.init_step
            gg = float(g @ g)
            while True:
                x_new = x - eta * g
                if opts.box is not None:
                    x_new = np.clip(x_new, -opts.box, opts.box)
                    decrease = float(g @ (x - x_new))
                else:
                    decrease = eta * gg
                change = delta(x_new, x)
                if change <= -opts.armijo_c * decrease:
                    break
                eta *= opts.shrink
                if eta * math.sqrt(gg) <= 1e-15 * max(1.0, float(np.max(np.abs(x)))):
                    raise LineSearchFailure(x, gnorm)
            step = eta
        trace.append(trace[-1] + change)
        g_new = grad(x_new)
        if opts.bb_step and opts.fixed_step is None:
            sv, yv = x_new - x, g_new - g
            sy, yy = float(sv @ yv), float(yv @ yv)
            bb = min(sy / yy, opts.max_step) if sy > 0 and yy > 0 else None
        x, g = x_new, g_new
        gnorm = float(np.max(np.abs(g)))
    return _Descent(x, it, gnorm, gnorm <= opts.grad_tol, trace)


# Increment identities: exact to relative precision of the change itself,
# unlike differences of two evaluated totals.  Large moves use the direct form.
_SMALL = 1.0


def _softplus_delta(s, ds):
    """``log(1 + e^(s + ds)) - log(1 + e^s)``."""
    small = np.abs(ds) < _SMALL
    fine = np.log1p(expit(s) * np.expm1(np.where(small, ds, 0.0)))
    return np.where(small, fine, _softplus(s + ds) - _softplus(s))


def _log_partition_delta(s0, s1, d0, d1):
    """``log(1 + e^(s0+d0) + e^(s1+d1)) - log(1 + e^s0 + e^s1)``."""
    small = (np.abs(d0) < _SMALL) & (np.abs(d1) < _SMALL)
    q0, q1, _ = innovation_probs(s0, s1)
    z0 = np.where(small, d0, 0.0)
    z1 = np.where(small, d1, 0.0)
    fine = np.log1p(q0 * np.expm1(z0) + q1 * np.expm1(z1))
    return np.where(small, fine, log_partition(s0 + d0, s1 + d1) - log_partition(s0, s1))


# ---------------------------------------------------------------- static block


def _moment_degrees(stats: SufficientStats, strict: bool) -> np.ndarray:
    """Per-node mean degree ``sum_t sum_j X^t_ij / n``, clamped into the interior."""
    p, n = stats.p, stats.n
    totals = stats.node_degree_totals()
    cap = n * (p - 1)
    lo, hi = 1.0 / (2 * cap), 1.0 - 1.0 / (2 * cap)
    bad = np.flatnonzero((totals <= 0) | (totals >= cap))
    if bad.size:
        if strict:
            i = int(bad[0])
            raise DegenerateDegree(i, float(totals[i]), float(cap))
        warnings.warn(
            f"clamping boundary pooled degrees of nodes {bad.tolist()} into the interior",
            stacklevel=3,
        )
    frac = np.clip(totals / cap, lo, hi)
    return frac * (p - 1)


def fit_mme_beta0(stats: SufficientStats, opts: SolverOptions | None = None, *, strict: bool = False) -> np.ndarray:
    """Solve the pooled-degree moment equations for the static parameters.

    Minimises the strictly convex pseudo-loss
    ``sum_{i<j} log(1 + e^{b_i + b_j}) - sum_i b_i * m_i`` where ``m_i`` is the
    mean degree of node ``i``; its gradient is the moment residual.
    """
    opts = opts or SolverOptions()
    p = stats.p
    iu, ju = pair_index(p)
    mdeg = _moment_degrees(stats, strict)

    def value(b):
        return float(_softplus(b[iu] + b[ju]).sum() - b @ mdeg)

    def grad(b):
        return _node_sum(p, expit(b[iu] + b[ju])) - mdeg

    def delta(new, old):
        step = new - old
        return float(_softplus_delta(old[iu] + old[ju], step[iu] + step[ju]).sum() - step @ mdeg)

    start = 0.5 * logit(mdeg / (p - 1))
    res = gradient_descent(value, grad, delta, start, opts)
    if not res.converged:
        warnings.warn(
            f"static moment fit stopped after {res.iterations} iterations "
            f"(residual {res.grad_norm:.2e})",
            ConvergenceWarning,
            stacklevel=2,
        )
    return res.x


def fit_static_beta_model(series: SnapshotSeries, opts: SolverOptions | None = None, *, strict: bool = False) -> np.ndarray:
    """Classical beta-model on the pooled snapshots (frames 1..n treated as i.i.d.)."""
    return fit_mme_beta0(sufficient_stats(series), opts, strict=strict)


# --------------------------------------------------------------- dynamic block


def default_lambda(n: int, p: int) -> float:
    return math.sqrt(math.log(n * p) / (n * p))


def _beta1_check(stats, pi):
    n = stats.n
    B = stats.node_totals("b")
    low = _node_sum(stats.p, n * pi * pi)
    high = _node_sum(stats.p, n * pi)
    bad = np.flatnonzero((B <= low) | (B >= high))
    if bad.size:
        i = int(bad[0])
        raise NoFiniteSolution(i, float(B[i]), float(low[i]), float(high[i]))


def fit_mme_beta1(
    stats: SufficientStats,
    beta0_tilde: np.ndarray,
    lam: float | None = None,
    opts: SolverOptions | None = None,
) -> np.ndarray:
    """Solve the lagged-product moment equations (ridge penalised) for the dynamic parameters.

    Residual for node ``i`` (normalised by ``n p``)::

        -1/(np) sum_j [ b_ij - n pi_ij (1 - 1/(1 + e^{s0} + e^{s1})) ] + lam * beta1_i

    ``lam = None`` uses ``sqrt(log(np) / (np))``; ``lam = 0`` is the plain estimator.
    """
    opts = opts or SolverOptions()
    p, n = stats.p, stats.n
    if lam is None:
        lam = default_lambda(n, p)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    beta0_tilde = np.asarray(beta0_tilde, dtype=float)
    if beta0_tilde.shape != (p,) or not np.all(np.isfinite(beta0_tilde)):
        raise ValueError("beta0_tilde must be a finite length-p vector")
    iu, ju = pair_index(p)
    s0 = beta0_tilde[iu] + beta0_tilde[ju]
    pi = expit(s0)
    log_c = _softplus(s0)  # log(1 + e^s0)
    b = np.asarray(stats.b, dtype=float)
    if lam == 0:
        _beta1_check(stats, pi)
    scale = 1.0 / (n * p)

    def pair_value(s1):
        # antiderivative of n pi (1 - 1/(c + e^s1)) in s1, minus the data term
        return n * pi * (pi * s1 + (1.0 - pi) * np.logaddexp(log_c, s1)) - b * s1

    def pair_delta(s1, ds1):
        # log(c + e^s1) = log c + softplus(s1 - log c)
        return n * pi * (pi * ds1 + (1.0 - pi) * _softplus_delta(s1 - log_c, ds1)) - b * ds1

    def value(x):
        return float(scale * pair_value(x[iu] + x[ju]).sum() + 0.5 * lam * x @ x)

    def grad(x):
        s1 = x[iu] + x[ju]
        g = n * pi * (1.0 - np.exp(-np.logaddexp(log_c, s1))) - b
        return scale * _node_sum(p, g) + lam * x

    def delta(new, old):
        step = new - old
        dv = pair_delta(old[iu] + old[ju], step[iu] + step[ju]).sum()
        return float(scale * dv + 0.5 * lam * step @ (new + old))

    res = gradient_descent(value, grad, delta, np.zeros(p), opts)
    if not res.converged:
        warnings.warn(
            f"dynamic moment fit stopped after {res.iterations} iterations "
            f"(residual {res.grad_norm:.2e})",
            ConvergenceWarning,
            stacklevel=2,
        )
    return res.x


def fit_mme(
    stats: SufficientStats,
    lam: float | None = None,
    opts: SolverOptions | None = None,
    *,
    strict: bool = False,
) -> ParamVector:
    """Both moment blocks; the ridge default for ``lam`` as in :func:`fit_mme_beta1`."""
    beta0 = fit_mme_beta0(stats, opts, strict=strict)
    beta1 = fit_mme_beta1(stats, beta0, lam, opts)
    return ParamVector(beta0, beta1)


# ------------------------------------------------------------------------ MLE


def _nll_delta(stats: SufficientStats):
    p, n = stats.p, stats.n
    iu, ju = pair_index(p)
    a, b, d = (np.asarray(v, dtype=float) for v in (stats.a, stats.b, stats.d))

    def delta(new, old):
        s0 = old[iu] + old[ju]
        s1 = old[p + iu] + old[p + ju]
        step = new - old
        d0 = step[iu] + step[ju]
        d1 = step[p + iu] + step[p + ju]
        terms = _log_partition_delta(s0, s1, d0, d1) / p - (
            d0 * a + d * _softplus_delta(s1, d1) + b * _softplus_delta(s1 - s0, d1 - d0)
        ) / (n * p)
        return float(terms.sum())

    return delta


def fit_mle(
    stats: SufficientStats,
    init: ParamVector,
    opts: SolverOptions | None = None,
    *,
    diagnose: bool = False,
) -> FitResult:
    """Local MLE by gradient descent on the negative log-likelihood from ``init``."""
    opts = opts or SolverOptions()
    if init.p != stats.p:
        raise ValueError("init and stats have different p")

    res = gradient_descent(
        lambda x: neg_log_likelihood(ParamVector.from_flat(x), stats),
        lambda x: gradient(ParamVector.from_flat(x), stats),
        _nll_delta(stats),
        init.flat(),
        opts,
    )
    theta = ParamVector.from_flat(res.x)
    if not res.converged:
        warnings.warn(
            f"MLE stopped after {res.iterations} iterations (gradient {res.grad_norm:.2e})",
            ConvergenceWarning,
            stacklevel=2,
        )
    log.debug("mle: %d iterations, grad %.2e", res.iterations, res.grad_norm)
    out = FitResult(
        theta_hat=theta,
        iterations=res.iterations,
        final_grad_norm=res.grad_norm,
        final_loss=neg_log_likelihood(theta, stats),
        converged=res.converged,
        trace=res.trace,
    )
    if diagnose:
        out.min_eigenvalue = smallest_eigenvalue(hessian(theta, stats))
    return out


def fit(
    stats: SufficientStats,
    lam: float | None = None,
    opts: SolverOptions | None = None,
    *,
    strict: bool = False,
    diagnose: bool = False,
) -> tuple[ParamVector, FitResult]:
    """Ridge moment estimate followed by the local MLE started from it."""
    mme = fit_mme(stats, lam, opts, strict=strict)
    return mme, fit_mle(stats, mme, opts, diagnose=diagnose)


def mme_residual(stats: SufficientStats, theta: ParamVector, lam: float | None = None) -> float:
    """Sup-norm of both moment-equation residuals (static block uses clamped degrees)."""
    p, n = stats.p, stats.n
    if lam is None:
        lam = default_lambda(n, p)
    iu, ju = pair_index(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mdeg = _moment_degrees(stats, strict=False)
    s0, s1 = theta.pair_sums()
    r0 = _node_sum(p, expit(s0)) - mdeg
    # the dynamic block is solved at beta0 fixed to theta.beta0
    pi = expit(s0)
    g = n * pi * (1.0 - np.exp(-np.logaddexp(_softplus(s0), s1))) - np.asarray(stats.b, dtype=float)
    r1 = _node_sum(p, g) / (n * p) + lam * theta.beta1
    return float(max(np.abs(r0).max(), np.abs(r1).max()))
