import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cagm.graph import AttributedGraph, CommunityPartition, structural_census
from cagm.params import (CAGMParams, dp_degree_sequences, dp_estimate_theta_f, dp_estimate_theta_x, dp_fit,
                         dp_triangle_counts, estimate_theta_f, estimate_theta_x, fit, is_graphical, isotonic,
                         make_graphical, split_budget, truncate_degrees)

from conftest import clique_edges, k3


def graphical_oracle(n):
    """Every degree sequence realised by some simple graph on ``n`` labelled vertices."""
    pairs = list(itertools.combinations(range(n), 2))
    seqs = set()
    for mask in range(1 << len(pairs)):
        d = [0] * n
        for b, (u, v) in enumerate(pairs):
            if mask >> b & 1:
                d[u] += 1
                d[v] += 1
        seqs.add(tuple(d))
    return seqs


def isotonic_oracle(y):
    """Best block-mean sequence over all contiguous block splits."""
    n = len(y)
    best, best_err = None, math.inf
    for cuts in itertools.product([0, 1], repeat=n - 1):
        blocks, start = [], 0
        for i, c in enumerate(cuts, start=1):
            if c:
                blocks.append((start, i))
                start = i
        blocks.append((start, n))
        fitted = np.concatenate([[np.mean(y[a:b])] * (b - a) for a, b in blocks])
        if np.all(np.diff(fitted) >= -1e-12):
            err = float(((fitted - y) ** 2).sum())
            if err < best_err:
                best, best_err = fitted, err
    return best


def test_is_graphical_against_enumeration():
    for n in range(1, 6):
        realised = graphical_oracle(n)
        for seq in itertools.product(range(n + 1), repeat=n):
            assert is_graphical(seq) == (seq in realised), seq


def test_isotonic_example_and_oracle():
    assert isotonic([3, 1, 2]).tolist() == pytest.approx([2, 2, 2])
    rng = np.random.default_rng(0)
    for _ in range(100):
        y = rng.normal(0, 3, size=int(rng.integers(1, 7)))
        assert isotonic(y) == pytest.approx(isotonic_oracle(y))


@given(st.lists(st.floats(-20, 60, allow_nan=False), min_size=1, max_size=40), st.integers(1, 50))
def test_make_graphical_properties(seq, cap):
    seq = np.sort(np.asarray(seq))
    out = make_graphical(seq, cap)
    assert is_graphical(out) and out.sum() % 2 == 0
    assert out.min() >= 0 and out.max() <= cap
    assert np.all(np.diff(out) >= 0)


def test_make_graphical_parity_goes_to_largest_slack():
    out = make_graphical([1, 1, 1], [2, 2, 4])
    assert out.tolist() == [1, 1, 2]


def test_estimate_theta_x_examples():
    G = AttributedGraph(5, np.zeros((0, 2)), np.array([[1, 0], [1, 0], [0, 0], [0, 0], [0, 1]]))
    P = CommunityPartition([2, 1, 1, 1, 1], 4)
    tx = estimate_theta_x(G, P)
    assert tx.probs[2].tolist() == [1.0, 0.0]
    assert tx.probs[1].tolist() == [0.25, 0.25]
    assert tx.probs[3].tolist() == [0.0, 0.0]


def test_estimate_theta_x_law_of_large_numbers():
    rng = np.random.default_rng(1)
    G = AttributedGraph(1000, np.zeros((0, 2)), rng.integers(0, 2, (1000, 5)))
    probs = estimate_theta_x(G, CommunityPartition.single(1000)).probs[1]
    assert np.all(np.abs(probs - 0.5) < 0.05)


def test_dp_theta_x_clamps_and_converges():
    rng = np.random.default_rng(2)
    G = AttributedGraph(10, np.zeros((0, 2)), np.zeros((10, 1)))
    P = CommunityPartition.single(10)
    for _ in range(50):
        p = dp_estimate_theta_x(G, P, 0.5, rng).probs
        assert np.all((0 <= p) & (p <= 1))
    assert np.allclose(dp_estimate_theta_x(G, P, 1e9, rng).probs, estimate_theta_x(G, P).probs)
    with pytest.raises(ValueError):
        dp_estimate_theta_x(G, P, 0.0, rng)


def test_estimate_theta_f_examples():
    G = AttributedGraph(2, [(0, 1)], np.array([[1, 0, 1], [1, 0, 1]]))
    tf = estimate_theta_f(G, CommunityPartition.single(2), 0.25)
    assert tf.intra[1].tolist() == [0, 0, 0, 0, 1]
    assert tf.inter.tolist() == pytest.approx([0.2] * 5)
    assert tf.intra[0].tolist() == pytest.approx([0.2] * 5)


def test_estimate_theta_f_inter_two_buckets():
    # similarities 0.1 and 0.9 via 10-bit vectors
    a = np.zeros(100, dtype=int); a[:10] = 1
    b = np.zeros(100, dtype=int); b[:1] = 1; b[10:19] = 1  # cos(a, b) = 1 / sqrt(90) ~ 0.105
    c = np.zeros(100, dtype=int); c[:9] = 1; c[50] = 1  # cos(a, c) = 9 / 10
    X = np.vstack([a, b, c])
    G = AttributedGraph(3, [(0, 1), (0, 2)], X)
    tf = estimate_theta_f(G, CommunityPartition([1, 2, 3]), 0.5)
    assert tf.inter.tolist() == [0.5, 0.5, 0.0]


def test_truncate_degrees():
    star = AttributedGraph.from_edges(6, [(0, i) for i in range(1, 6)])
    assert truncate_degrees(star, 10) is star
    t = truncate_degrees(star, 2)
    assert t.degrees.max() <= 2 and t.m == 2
    K6 = AttributedGraph.from_edges(6, clique_edges(range(6)))
    t = truncate_degrees(K6, 3)
    assert t.degrees.max() <= 3
    assert truncate_degrees(K6, 3).edges.tolist() == t.edges.tolist()


def test_dp_theta_f_zero_noise_limit(planted_small):
    G, P = planted_small
    tf = dp_estimate_theta_f(G, P, 0.25, 100, 1e12, np.random.default_rng(0))
    exact = estimate_theta_f(G, P, 0.25)
    assert np.allclose(tf.intra, exact.intra) and np.allclose(tf.inter, exact.inter)
    assert tf.degree_cap == 100
    for row in dp_estimate_theta_f(G, P, 0.25, 5, 0.1, np.random.default_rng(1)).intra:
        assert row.sum() == pytest.approx(1.0) and row.min() >= 0


@pytest.mark.parametrize("eps_d", [0.1, 1.0])
def test_dp_degree_sequences_graphical(planted_small, eps_d):
    G, P = planted_small
    rng = np.random.default_rng(3)
    for _ in range(10):
        d_intra, d_inter = dp_degree_sequences(G, P, eps_d, rng)
        assert is_graphical(d_inter)
        for members in P.communities:
            if members.size:
                assert is_graphical(d_intra[members])
                assert d_intra[members].max() <= members.size - 1


def test_dp_degree_sequences_zero_noise(planted_small):
    G, P = planted_small
    c = structural_census(G, P)
    d_intra, d_inter = dp_degree_sequences(G, P, 1e12, np.random.default_rng(0))
    assert np.array_equal(d_inter, c.d_inter)
    for members in P.communities:
        assert np.array_equal(np.sort(d_intra[members]), np.sort(c.d_intra[members]))


def test_dp_triangle_counts_examples():
    rng = np.random.default_rng(0)
    assert dp_triangle_counts(k3(), CommunityPartition.single(3), 1e9, 1e9, rng) == (1, 0)
    path = AttributedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    assert dp_triangle_counts(path, CommunityPartition([1, 1, 2, 2]), 1e9, 1e9, rng) == (0, 0)
    for _ in range(100):
        assert dp_triangle_counts(k3(), CommunityPartition.single(3), 0.1, 0.1, rng)[1] >= 0


@pytest.mark.parametrize("eps,shares", [
    (12, (6, 2, 1, 1, 1, 1)),
    (1, (Fraction(1, 2), Fraction(1, 6), Fraction(1, 12), Fraction(1, 12), Fraction(1, 12), Fraction(1, 12))),
])
def test_split_budget_examples(eps, shares):
    assert tuple(split_budget(eps).shares().values()) == shares


@given(st.floats(1e-6, 1e6, allow_nan=False))
def test_split_budget_sums_exactly(eps):
    b = split_budget(eps)
    assert b.total_of_shares() == Fraction(eps)


@pytest.mark.parametrize("eps", [0, -1])
def test_split_budget_rejects(eps):
    with pytest.raises(ValueError):
        split_budget(eps)


def test_fit_k3():
    G = k3(np.array([[1], [1], [0]]))
    params = fit(G, CommunityPartition.single(3), 0.5)
    assert params.theta_m.d_intra.tolist() == [2, 2, 2]
    assert params.theta_m.tri_intra == 1
    assert params.theta_m.edge_target(params.partition) == 3


def test_params_json_roundtrip(tmp_path, planted_small):
    G, _ = planted_small
    params = dp_fit(G, 5.0, rng=np.random.default_rng(0))
    params.save(tmp_path / "p.json")
    back = CAGMParams.load(tmp_path / "p.json")
    back.save(tmp_path / "q.json")
    assert (tmp_path / "p.json").read_bytes() == (tmp_path / "q.json").read_bytes()
    assert back.ledger.total == Fraction(5)
    assert np.array_equal(back.theta_m.d_intra, params.theta_m.d_intra)
    assert back.partition == params.partition


@pytest.mark.parametrize("eps", [1, 2, 5, 12])
def test_dp_fit_ledger(planted_small, eps):
    G, _ = planted_small
    params = dp_fit(G, eps, rng=np.random.default_rng(eps))
    assert params.ledger.total == Fraction(eps)
    assert params.private and params.theta_m.tri_inter >= 0


def test_load_rejects_foreign_file(tmp_path):
    (tmp_path / "x.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        CAGMParams.load(tmp_path / "x.json")
