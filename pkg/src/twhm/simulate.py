"""Exact simulation of the edge-level AR(1) network process.

Randomness is counter based: the uniform driving pair ``(i, j)`` at step
``t`` is a SplitMix64 hash of ``(seed, i, j, t)``, so a series does not
depend on the order (or the chunking) in which pairs and steps are visited.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .model import ParamVector, SnapshotSeries, innovation_probs, pair_index

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# frames generated per block when driving long paths
_CHUNK_CELLS = 4_000_000


def _mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser on a uint64 array (wrapping arithmetic)."""
    x = x ^ (x >> np.uint64(30))
    x = x * _M1
    x = x ^ (x >> np.uint64(27))
    x = x * _M2
    return x ^ (x >> np.uint64(31))


def counter_uniforms(seed: int, pair_keys: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Uniforms in [0, 1) of shape ``(len(steps), len(pair_keys))``.

    ``pair_keys`` are 64-bit ``(i << 32) | j`` identifiers, so values do not
    depend on ``p`` either.
    """
    with np.errstate(over="ignore"):
        seed_word = _mix64(np.array([seed & _MASK64], dtype=np.uint64) + _GOLDEN)
        pair_word = _mix64(pair_keys.astype(np.uint64) ^ seed_word)
        step_word = _mix64(steps.astype(np.uint64) * _GOLDEN + _GOLDEN)
        h = _mix64(pair_word[None, :] + step_word[:, None])
    # top 53 bits -> double in [0, 1)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class SimConfig:
    """``init`` is ``None`` for a stationary start, otherwise a boolean pair vector for X^0."""

    theta: ParamVector
    n: int
    seed: int = 0
    init: np.ndarray | None = None

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be at least 1")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.init is not None:
            init = np.asarray(self.init, dtype=bool).reshape(-1)
            p = self.theta.p
            if init.size != p * (p - 1) // 2:
                raise ValueError("initial frame does not match the node count")
            object.__setattr__(self, "init", init)


def simulate(cfg: SimConfig, pairs: np.ndarray | None = None) -> SnapshotSeries | np.ndarray:
    """Draw ``X^0 .. X^n``.

    With ``pairs`` (pair positions in lexicographic order) only those columns
    are generated and a raw ``(n+1, len(pairs))`` boolean array is returned;
    the values coincide with the corresponding columns of the full series.
    """
    theta = cfg.theta
    p = theta.p
    iu, ju = pair_index(p)
    full = pairs is None
    if not full:
        pairs = np.asarray(pairs, dtype=np.int64)
        iu, ju = iu[pairs], ju[pairs]
    keys = (iu.astype(np.uint64) << np.uint64(32)) | ju.astype(np.uint64)
    s0 = theta.beta0[iu] + theta.beta0[ju]
    s1 = theta.beta1[iu] + theta.beta1[ju]
    p_new, p_keep, _ = innovation_probs(s0, s1)
    on_cut = p_new
    keep_cut = p_new + p_keep

    n = int(cfg.n)
    out = np.empty((n + 1, keys.size), dtype=bool)
    if cfg.init is None:
        u0 = counter_uniforms(cfg.seed, keys, np.array([0]))[0]
        out[0] = u0 < expit(s0)
    else:
        out[0] = cfg.init if full else cfg.init[pairs]

    chunk = max(1, _CHUNK_CELLS // max(keys.size, 1))
    prev = out[0]
    t = 1
    while t <= n:
        stop = min(n + 1, t + chunk)
        u = counter_uniforms(cfg.seed, keys, np.arange(t, stop))
        # 1 = forced on, 0 = forced off, -1 = copy previous
        code = np.where(u < on_cut, 1, np.where(u < keep_cut, -1, 0)).astype(np.int8)
        block = _forward_fill(code, prev)
        out[t:stop] = block
        prev = block[-1]
        t = stop
    return SnapshotSeries(p, out) if full else out


def _forward_fill(code: np.ndarray, prev: np.ndarray) -> np.ndarray:
    """Resolve copy innovations: each state is the last forced value, else ``prev``."""
    steps = code.shape[0]
    idx = np.where(code >= 0, np.arange(steps)[:, None], -1)
    last = np.maximum.accumulate(idx, axis=0)
    cols = np.arange(code.shape[1])
    forced = code[np.maximum(last, 0), cols[None, :]] == 1
    return np.where(last >= 0, forced, prev[None, :])


def empirical_density(series: SnapshotSeries) -> float:
    """Fraction of present edges over all pairs in frames ``1 .. n``."""
    if series.n < 1:
        return float(series.edges.mean())
    return float(series.edges[1:].mean())
