"""Parameter and graph containers plus the closed-form laws of the model.

Every node ``i`` carries a static parameter ``beta0[i]`` that sets how likely
it is to be linked and a dynamic parameter ``beta1[i]`` that sets how strongly
its links persist.  For a pair ``(i, j)`` write ``s0 = beta0[i] + beta0[j]``
and ``s1 = beta1[i] + beta1[j]``; each step an innovation forces the edge on
(weight ``e^s0``), copies the previous state (weight ``e^s1``) or forces it
off (weight 1).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit


def pair_index(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the ``p*(p-1)/2`` pairs ``i < j`` in lexicographic order."""
    return np.triu_indices(p, k=1)


def pair_to_nodes(pairs: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = pair_index(p)
    return iu[pairs], ju[pairs]


@dataclass(frozen=True)
class ParamVector:
    """The 2p-vector ``(beta0, beta1)`` on the natural log-odds scale."""

    beta0: np.ndarray
    beta1: np.ndarray

    def __post_init__(self):
        b0 = np.array(self.beta0, dtype=float).reshape(-1)
        b1 = np.array(self.beta1, dtype=float).reshape(-1)
        if b0.shape != b1.shape:
            raise ValueError(f"beta0 and beta1 lengths differ: {b0.size} != {b1.size}")
        if b0.size < 2:
            raise ValueError("need at least p = 2 nodes")
        if not (np.all(np.isfinite(b0)) and np.all(np.isfinite(b1))):
            raise ValueError("parameters must be finite")
        b0.setflags(write=False)
        b1.setflags(write=False)
        object.__setattr__(self, "beta0", b0)
        object.__setattr__(self, "beta1", b1)

    @property
    def p(self) -> int:
        return self.beta0.size

    @classmethod
    def zeros(cls, p: int) -> "ParamVector":
        return cls(np.zeros(p), np.zeros(p))

    @classmethod
    def from_flat(cls, theta: Sequence[float]) -> "ParamVector":
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size % 2:
            raise ValueError("flat parameter vector must have even length 2p")
        p = theta.size // 2
        return cls(theta[:p], theta[p:])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.beta0, self.beta1])

    def permuted(self, perm: np.ndarray) -> "ParamVector":
        """Relabel nodes so that new node ``k`` is old node ``perm[k]``."""
        return ParamVector(self.beta0[perm], self.beta1[perm])

    def pair_sums(self) -> tuple[np.ndarray, np.ndarray]:
        """``(s0, s1)`` for every pair ``i < j`` in lexicographic order."""
        iu, ju = pair_index(self.p)
        return self.beta0[iu] + self.beta0[ju], self.beta1[iu] + self.beta1[ju]


class SnapshotSeries:
    """``n + 1`` undirected snapshots ``X^0 .. X^n`` on ``p`` fixed nodes.

    Stored densely as a boolean array of shape ``(n + 1, p*(p-1)/2)`` whose
    columns are the pairs ``i < j`` in lexicographic order.
    """

    def __init__(self, p: int, edges: np.ndarray):
        edges = np.asarray(edges, dtype=bool)
        if p < 2:
            raise ValueError("need at least p = 2 nodes")
        npairs = p * (p - 1) // 2
        if edges.ndim != 2 or edges.shape[1] != npairs:
            raise ValueError(f"edge array must have shape (frames, {npairs})")
        if edges.shape[0] < 1:
            raise ValueError("need at least one snapshot")
        edges.setflags(write=False)
        self.p = p
        self.edges = edges

    @property
    def n(self) -> int:
        """Number of transitions (snapshots minus one)."""
        return self.edges.shape[0] - 1

    @property
    def npairs(self) -> int:
        return self.edges.shape[1]

    def __len__(self) -> int:
        return self.edges.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SnapshotSeries):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.edges, other.edges)

    def __repr__(self) -> str:
        return f"SnapshotSeries(p={self.p}, n={self.n}, edges={int(self.edges.sum())})"

    @classmethod
    def from_edge_lists(cls, p: int, frames: Iterable[Iterable[tuple[int, int]]]) -> "SnapshotSeries":
        """Build from per-snapshot iterables of node pairs (either orientation)."""
        rows = []
        for frame in frames:
            rows.append(snapshot_from_edges(p, frame))
        return cls(p, np.array(rows, dtype=bool).reshape(len(rows), p * (p - 1) // 2))

    @classmethod
    def from_adjacency(cls, adj: np.ndarray) -> "SnapshotSeries":
        adj = np.asarray(adj)
        if adj.ndim == 2:
            adj = adj[None]
        p = adj.shape[1]
        if adj.shape[2] != p:
            raise ValueError("adjacency matrices must be square")
        if not np.array_equal(adj, adj.transpose(0, 2, 1)):
            raise ValueError("adjacency matrices must be symmetric")
        if np.any(np.diagonal(adj, axis1=1, axis2=2)):
            raise ValueError("self-loops are not allowed")
        iu, ju = pair_index(p)
        return cls(p, adj[:, iu, ju] != 0)

    def frame(self, t: int) -> np.ndarray:
        return self.edges[t]

    def adjacency(self, t: int) -> np.ndarray:
        return snapshot_adjacency(self.p, self.edges[t])

    def edge_list(self, t: int) -> list[tuple[int, int]]:
        iu, ju = pair_index(self.p)
        on = np.flatnonzero(self.edges[t])
        return list(zip(iu[on].tolist(), ju[on].tolist()))

    def degrees(self, t: int | None = None) -> np.ndarray:
        """Degree vector of frame ``t``, or an ``(n+1, p)`` array when ``t`` is None."""
        iu, ju = pair_index(self.p)
        frames = self.edges if t is None else self.edges[t][None]
        deg = np.zeros((frames.shape[0], self.p), dtype=np.int64)
        for k, row in enumerate(frames):
            deg[k] = np.bincount(iu, row, self.p) + np.bincount(ju, row, self.p)
        return deg if t is None else deg[0]

    def window(self, start: int, stop: int) -> "SnapshotSeries":
        """Frames ``start .. stop - 1`` as a new series."""
        return SnapshotSeries(self.p, self.edges[start:stop])

    def permuted(self, perm: np.ndarray) -> "SnapshotSeries":
        """Relabel nodes so that new node ``k`` is old node ``perm[k]``."""
        perm = np.asarray(perm)
        adj = np.stack([self.adjacency(t) for t in range(len(self))])
        return SnapshotSeries.from_adjacency(adj[:, perm][:, :, perm])


def snapshot_from_edges(p: int, edges: Iterable[tuple[int, int]]) -> np.ndarray:
    row = np.zeros(p * (p - 1) // 2, dtype=bool)
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise ValueError(f"self-loop at node {i}")
        if not (0 <= i < p and 0 <= j < p):
            raise ValueError(f"node id out of range in pair ({i}, {j})")
        if i > j:
            i, j = j, i
        row[_pair_position(p, i, j)] = True
    return row


def snapshot_adjacency(p: int, frame: np.ndarray) -> np.ndarray:
    iu, ju = pair_index(p)
    adj = np.zeros((p, p), dtype=np.int8)
    adj[iu, ju] = frame
    adj[ju, iu] = frame
    return adj


def _pair_position(p: int, i: int, j: int) -> int:
    # lexicographic rank of (i, j), i < j
    return i * (2 * p - i - 1) // 2 + (j - i - 1)


def _check_pair(theta: ParamVector, i: int, j: int) -> None:
    p = theta.p
    if not (0 <= i < p and 0 <= j < p):
        raise IndexError(f"node ids ({i}, {j}) out of range for p = {p}")
    if i == j:
        raise ValueError("pair quantities need two distinct nodes")


@dataclass(frozen=True)
class PairProbabilities:
    p_new: float
    p_keep: float
    p_off: float
    p_stat: float
    p_on_given_off: float
    p_off_given_on: float
    rho1: float


def innovation_probs(s0, s1):
    """Vectorised ``(p_new, p_keep, p_off)`` from shifted logits (log-sum-exp)."""
    s0 = np.asarray(s0, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    m = np.maximum(np.maximum(s0, s1), 0.0)
    e0 = np.exp(s0 - m)
    e1 = np.exp(s1 - m)
    eoff = np.exp(-m)
    tot = e0 + e1 + eoff
    return e0 / tot, e1 / tot, eoff / tot


def log_partition(s0, s1):
    """``log(1 + e^s0 + e^s1)`` without overflow."""
    s0 = np.asarray(s0, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    m = np.maximum(np.maximum(s0, s1), 0.0)
    return m + np.log(np.exp(-m) + np.exp(s0 - m) + np.exp(s1 - m))


def pair_probabilities(theta: ParamVector, i: int, j: int) -> PairProbabilities:
    _check_pair(theta, i, j)
    s0 = theta.beta0[i] + theta.beta0[j]
    s1 = theta.beta1[i] + theta.beta1[j]
    p_new, p_keep, p_off = (float(v) for v in innovation_probs(s0, s1))
    return PairProbabilities(
        p_new=p_new,
        p_keep=p_keep,
        p_off=p_off,
        p_stat=float(expit(s0)),
        p_on_given_off=p_new,
        p_off_given_on=p_off,
        rho1=p_keep,
    )


def stationary_probs(theta: ParamVector) -> np.ndarray:
    """Stationary edge probability of every pair ``i < j``."""
    s0, _ = theta.pair_sums()
    return expit(s0)


def expected_density(theta: ParamVector) -> float:
    # each unordered pair appears twice in the i != j sum
    return float(stationary_probs(theta).mean())


def _pair_moments(s0, s1, n):
    """Expected ``(a, b, d)`` per pair under stationarity, ``n`` transitions."""
    p_new, p_keep, p_off = innovation_probs(s0, s1)
    pi = expit(s0)
    # E[X^t X^{t-1}] = pi * P(1|1),  E[(1-X^t)(1-X^{t-1})] = (1-pi) * P(0|0)
    e_b = pi * (p_new + p_keep)
    e_d = expit(-s0) * (p_keep + p_off)
    return n * pi, n * e_b, n * e_d


def expected_pair_moments(theta: ParamVector, i: int, j: int, n: int) -> tuple[float, float, float]:
    _check_pair(theta, i, j)
    if n < 1:
        raise ValueError("n must be at least 1")
    s0 = theta.beta0[i] + theta.beta0[j]
    s1 = theta.beta1[i] + theta.beta1[j]
    return tuple(float(v) for v in _pair_moments(s0, s1, n))


def edge_acf(theta: ParamVector, i: int, j: int, lag: int) -> float:
    _check_pair(theta, i, j)
    if lag < 0:
        raise ValueError("lag must be non-negative")
    return pair_probabilities(theta, i, j).rho1 ** lag


def degree_moments(theta: ParamVector, i: int) -> tuple[float, float]:
    """Stationary mean and variance of the degree of node ``i``."""
    if not 0 <= i < theta.p:
        raise IndexError(f"node id {i} out of range for p = {theta.p}")
    others = np.delete(np.arange(theta.p), i)
    pk = expit(theta.beta0[i] + theta.beta0[others])
    return float(pk.sum()), float((pk * (1.0 - pk)).sum())
