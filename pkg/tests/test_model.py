import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twhm.model import (
    ParamVector,
    SnapshotSeries,
    degree_moments,
    edge_acf,
    expected_density,
    expected_pair_moments,
    pair_probabilities,
)
from twhm.simulate import SimConfig, simulate

from oracles import enumerate_pair_moments


def const_theta(p, b0=0.0, b1=0.0):
    return ParamVector(np.full(p, b0), np.full(p, b1))


finite = st.floats(-30, 30, allow_nan=False)


# --- containers


def test_param_vector_rejects_bad_input():
    with pytest.raises(ValueError):
        ParamVector([0.0], [0.0])
    with pytest.raises(ValueError):
        ParamVector([0.0, 1.0], [0.0])
    with pytest.raises(ValueError):
        ParamVector([0.0, np.nan], [0.0, 0.0])
    with pytest.raises(ValueError):
        ParamVector([0.0, np.inf], [0.0, 0.0])


def test_param_vector_is_read_only():
    th = ParamVector([0.0, 1.0], [2.0, 3.0])
    with pytest.raises(ValueError):
        th.beta0[0] = 5.0
    assert np.array_equal(ParamVector.from_flat(th.flat()).beta1, th.beta1)


def test_snapshot_series_from_edges_and_adjacency_agree():
    frames = [[(0, 1), (2, 1)], [], [(0, 3)]]
    s = SnapshotSeries.from_edge_lists(4, frames)
    assert s.n == 2 and s.p == 4
    assert s.edge_list(0) == [(0, 1), (1, 2)]
    adj = np.stack([s.adjacency(t) for t in range(3)])
    assert np.array_equal(adj, adj.transpose(0, 2, 1))
    assert SnapshotSeries.from_adjacency(adj) == s
    assert s.degrees(0).tolist() == [1, 2, 1, 0]


def test_snapshot_series_rejects_self_loops_and_asymmetry():
    adj = np.zeros((1, 3, 3), dtype=int)
    adj[0, 1, 1] = 1
    with pytest.raises(ValueError):
        SnapshotSeries.from_adjacency(adj)
    adj = np.zeros((1, 3, 3), dtype=int)
    adj[0, 0, 1] = 1
    with pytest.raises(ValueError):
        SnapshotSeries.from_adjacency(adj)


def test_edge_list_rejects_out_of_range_nodes():
    with pytest.raises((IndexError, ValueError)):
        SnapshotSeries.from_edge_lists(3, [[(0, 3)]])
    with pytest.raises((IndexError, ValueError)):
        SnapshotSeries.from_edge_lists(3, [[(1, 1)]])


# --- pair probabilities


def test_zero_theta_probabilities():
    pp = pair_probabilities(const_theta(5), 1, 3)
    for v in (pp.p_new, pp.p_keep, pp.p_off, pp.p_on_given_off, pp.p_off_given_on, pp.rho1):
        assert v == pytest.approx(1 / 3, abs=1e-15)
    assert pp.p_stat == pytest.approx(0.5, abs=1e-15)


def test_stationary_probability_closed_form():
    th = ParamVector([1.5, 0.5, 0.0], [0.3, -0.3, 0.0])
    assert pair_probabilities(th, 0, 1).p_stat == pytest.approx(math.exp(2) / (1 + math.exp(2)), abs=1e-12)


def test_pair_index_errors():
    th = const_theta(3)
    with pytest.raises(IndexError):
        pair_probabilities(th, 0, 3)
    with pytest.raises(ValueError):
        pair_probabilities(th, 2, 2)


@given(finite, finite, finite, finite)
@settings(max_examples=200)
def test_probability_identities(a, b, c, d):
    th = ParamVector([a, b], [c, d])
    pp = pair_probabilities(th, 0, 1)
    assert abs(pp.p_new + pp.p_keep + pp.p_off - 1.0) <= 1e-12
    assert abs(pp.p_stat - pp.p_new / (pp.p_new + pp.p_off)) <= 1e-12
    # detailed balance of the two-state chain
    assert abs(pp.p_stat * pp.p_off_given_on - (1 - pp.p_stat) * pp.p_on_given_off) <= 1e-12
    assert pp.rho1 == pp.p_keep
    for v in (pp.p_new, pp.p_keep, pp.p_off, pp.p_stat):
        assert 0.0 <= v <= 1.0
    assert pair_probabilities(th, 1, 0) == pp


def test_monotonicity_in_each_block():
    grid = np.linspace(-5, 5, 41)
    stat = [pair_probabilities(ParamVector([g, 0.0], [0.7, 0.0]), 0, 1).p_stat for g in grid]
    rho = [pair_probabilities(ParamVector([0.4, 0.0], [g, 0.0]), 0, 1).rho1 for g in grid]
    assert np.all(np.diff(stat) > 0)
    assert np.all(np.diff(rho) > 0)


# --- density


def test_expected_density_zero_theta():
    assert expected_density(const_theta(7)) == 0.5


def test_expected_density_two_block():
    b0 = np.full(200, -1.0)
    b0[:20] = 1.0
    got = expected_density(ParamVector(b0, np.zeros(200)))
    # block counts: C(20,2) pairs at s0 = 2, 20*180 at 0, C(180,2) at -2
    sig = lambda s: 1 / (1 + math.exp(-s))  # noqa: E731
    exact = (190 * sig(2) + 3600 * 0.5 + 16110 * sig(-2)) / 19900
    assert got == pytest.approx(exact, abs=1e-14)
    assert got == pytest.approx(0.19, abs=0.01)


def test_expected_density_sparse_constant():
    assert expected_density(const_theta(200, -1.47)) == pytest.approx(0.05, abs=0.005)


def test_expected_density_matches_ordered_pair_average():
    rng = np.random.default_rng(3)
    th = ParamVector(rng.uniform(-1, 1, 9), rng.uniform(-1, 1, 9))
    tot = sum(pair_probabilities(th, i, j).p_stat for i in range(9) for j in range(9) if i != j)
    assert expected_density(th) == pytest.approx(tot / (9 * 8), abs=1e-14)


# --- moments


def test_expected_pair_moments_zero_theta():
    th = const_theta(4)
    assert expected_pair_moments(th, 0, 1, 3) == pytest.approx((1.5, 1.0, 1.0), abs=1e-14)
    assert expected_pair_moments(th, 2, 3, 1) == pytest.approx((0.5, 1 / 3, 1 / 3), abs=1e-14)


def test_expected_pair_moments_printed_closed_forms():
    th = ParamVector([0.3, -0.8, 0.1], [0.5, 0.2, -0.4])
    a0 = math.exp(0.3 - 0.8)
    a1 = math.exp(0.5 + 0.2)
    Ea, Eb, Ed = expected_pair_moments(th, 0, 1, 4)
    assert Ea == pytest.approx(4 * a0 / (1 + a0), rel=1e-13)
    assert Eb == pytest.approx(4 * a0 * (a0 + a1) / ((1 + a0) * (1 + a0 + a1)), rel=1e-13)
    assert Ed == pytest.approx(4 * (1 + a1) / ((1 + a0) * (1 + a0 + a1)), rel=1e-13)


def test_expected_pair_moments_match_enumeration():
    rng = np.random.default_rng(11)
    b0, b1 = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
    th = ParamVector(b0, b1)
    brute = enumerate_pair_moments(b0, b1)
    for (i, j), ref in brute.items():
        got = expected_pair_moments(th, i, j, 1)
        assert np.max(np.abs(np.array(got) - np.array(ref))) < 1e-12


@given(st.floats(-4, 4), st.floats(-4, 4))
def test_lagged_moment_identity(s0, s1):
    th = ParamVector([s0 / 2, s0 / 2], [s1 / 2, s1 / 2])
    Ea, Eb, Ed = expected_pair_moments(th, 0, 1, 1)
    # E[(1-X)(1-X')] = 1 - 2 E[X] + E[X X'] under stationarity
    assert abs(Ed - (1 - 2 * Ea + Eb)) <= 1e-12


# --- ACF and degrees


def test_edge_acf_values():
    th = const_theta(3)
    assert edge_acf(th, 0, 1, 0) == 1.0
    assert edge_acf(th, 0, 2, 2) == pytest.approx(1 / 9, abs=1e-15)
    with pytest.raises(ValueError):
        edge_acf(th, 0, 1, -1)


def test_edge_acf_monte_carlo():
    th = const_theta(20)
    x = simulate(SimConfig(th, 50_000, seed=5), pairs=np.array([7]))[:, 0].astype(float)
    r = np.corrcoef(x[1:], x[:-1])[0, 1]
    assert r == pytest.approx(1 / 3, abs=0.01)


def test_degree_moments_constant():
    assert degree_moments(const_theta(11), 4) == pytest.approx((5.0, 2.5))
    assert degree_moments(const_theta(2), 1) == pytest.approx((0.5, 0.25))
    with pytest.raises(IndexError):
        degree_moments(const_theta(3), 3)


def test_degree_moments_monte_carlo():
    rng = np.random.default_rng(2)
    p = 50
    th = ParamVector(rng.uniform(-1, 1, p), np.zeros(p))
    # beta1 = 0 still leaves frames dependent; use the stationary X^0 across seeds instead
    degs = np.array([simulate(SimConfig(th, 1, seed=s)).degrees(0) for s in range(20_000)])
    for i in (0, 17, 49):
        mean, var = degree_moments(th, i)
        se_mean = math.sqrt(var / degs.shape[0])
        assert abs(degs[:, i].mean() - mean) < 3 * se_mean
        # sample variance has sd about var * sqrt(2 / N) for near-Gaussian degrees
        assert abs(degs[:, i].var(ddof=1) - var) < 3 * var * math.sqrt(2 / degs.shape[0])
