"""One-step-ahead degree forecasts and link prediction.

Snapshots here are boolean pair vectors in lexicographic ``i < j`` order (a
row of :attr:`SnapshotSeries.edges`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ParamVector, SnapshotSeries, _check_pair, _pair_position, innovation_probs, pair_index

DEFAULT_OMEGA_GRID = tuple(round(0.05 * k, 2) for k in range(21))


@dataclass(frozen=True)
class PredictionConfig:
    """``rule`` is ``"fixed"`` (threshold ``cutoff``), ``"adaptive"`` (blend weight
    ``omega``) or ``"auto"`` (``omega`` chosen from ``omega_grid`` on the history)."""

    rule: str = "fixed"
    cutoff: float = 0.5
    omega: float = 1.0
    omega_grid: tuple[float, ...] = DEFAULT_OMEGA_GRID

    def __post_init__(self):
        if self.rule not in ("fixed", "adaptive", "auto"):
            raise ValueError(f"unknown prediction rule {self.rule!r}")
        if not 0.0 <= self.cutoff <= 1.0:
            raise ValueError("cutoff must lie in [0, 1]")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")
        if not self.omega_grid or any(not 0.0 <= w <= 1.0 for w in self.omega_grid):
            raise ValueError("omega grid must be a non-empty subset of [0, 1]")


def _check_frame(theta: ParamVector, prev: np.ndarray) -> np.ndarray:
    prev = np.asarray(prev, dtype=bool)
    if prev.shape != (theta.p * (theta.p - 1) // 2,):
        raise ValueError("snapshot does not match the node count")
    return prev


def link_probabilities(theta: ParamVector, prev: np.ndarray) -> np.ndarray:
    """``P(X^t_ij = 1 | X^{t-1}_ij)`` for every pair."""
    prev = _check_frame(theta, prev)
    s0, s1 = theta.pair_sums()
    p_new, p_keep, _ = innovation_probs(s0, s1)
    return p_new + p_keep * prev


def link_probability(theta: ParamVector, prev: np.ndarray, i: int, j: int) -> float:
    _check_pair(theta, i, j)
    prev = _check_frame(theta, prev)
    i, j = min(i, j), max(i, j)
    s0 = theta.beta0[i] + theta.beta0[j]
    s1 = theta.beta1[i] + theta.beta1[j]
    p_new, p_keep, _ = innovation_probs(s0, s1)
    return float(p_new + p_keep * prev[_pair_position(theta.p, i, j)])


def predict_degrees(theta: ParamVector, prev: np.ndarray) -> np.ndarray:
    """Conditional expected degree of every node given the previous frame."""
    probs = link_probabilities(theta, prev)
    iu, ju = pair_index(theta.p)
    return np.bincount(iu, probs, theta.p) + np.bincount(ju, probs, theta.p)


def adaptive_cutoffs(theta: ParamVector, omega: float) -> np.ndarray:
    """Per-pair thresholds ``c_ij`` reproducing the blend rule as ``P > c_ij``."""
    s0, s1 = theta.pair_sums()
    # scale numerator and denominator by e^{-m} to avoid overflow
    m = np.maximum(np.maximum(s0, s1), 0.0)
    e0, e1, one = np.exp(s0 - m), np.exp(s1 - m), np.exp(-m)
    w = 1.0 - omega
    return (0.5 * e1 + w * e0) / (w * one + e1 + w * e0)


def predict_links(
    theta: ParamVector,
    prev: np.ndarray,
    cfg: PredictionConfig = PredictionConfig(),
    history: SnapshotSeries | None = None,
) -> np.ndarray:
    """Predicted next frame.

    Ties: the fixed rule predicts an edge when ``P >= cutoff``; the blend rule
    needs ``omega P + (1 - omega) X^{t-1} > 0.5`` strictly.  The ``auto`` rule
    picks ``omega`` with :func:`select_omega` on ``history``.
    """
    probs = link_probabilities(theta, prev)
    if cfg.rule == "fixed":
        return probs >= cfg.cutoff
    omega = cfg.omega
    if cfg.rule == "auto":
        if history is None:
            raise ValueError("the auto rule needs a history window")
        omega = select_omega(history, theta, cfg.omega_grid)
    return omega * probs + (1.0 - omega) * np.asarray(prev, dtype=float) > 0.5


def prediction_accuracy(predicted: np.ndarray, observed: np.ndarray) -> float:
    predicted = np.asarray(predicted, dtype=bool)
    observed = np.asarray(observed, dtype=bool)
    if predicted.shape != observed.shape:
        raise ValueError("snapshots have different sizes")
    return float(np.mean(predicted == observed))


def select_omega(window: SnapshotSeries, theta: ParamVector, grid=DEFAULT_OMEGA_GRID) -> float:
    """Blend weight that best predicts the last frame of ``window`` from the one before.

    Ties go to the largest weight.
    """
    if len(window) < 2:
        raise ValueError("window needs at least two snapshots")
    grid = sorted(set(float(w) for w in grid))
    prev, target = window.edges[-2], window.edges[-1]
    probs = link_probabilities(theta, prev)
    best, best_acc = grid[0], -1.0
    for w in grid:
        acc = prediction_accuracy(w * probs + (1.0 - w) * prev > 0.5, target)
        if acc >= best_acc:
            best, best_acc = w, acc
    return best
