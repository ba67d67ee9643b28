import numpy as np
import pytest
from scipy import stats
from scipy.sparse.csgraph import connected_components

from cagm.graph import CommunityPartition, structural_census
from cagm.params import ThetaF, ThetaM, ThetaX, CAGMParams, fit
from cagm.sampler import (CandidateEdgeDistribution, SamplerError, build_acceptance_tables,
                          empirical_bucket_distributions, gen_initial_edge_set, get_final_edge_set, reconnect,
                          sample_attribute_matrix, sample_graph)

from conftest import brute_triangles


def theta(d_intra, d_inter, tri_intra=0, tri_inter=0):
    return ThetaM(np.asarray(d_intra, dtype=np.int64), np.asarray(d_inter, dtype=np.int64), tri_intra, tri_inter)


def intra_inter_counts(edges, memb):
    same = memb[edges[:, 0]] == memb[edges[:, 1]]
    per = np.bincount(memb[edges[same, 0]], minlength=memb.max() + 1)
    return per, int((~same).sum())


def test_attribute_matrix_extremes_and_mean():
    P = CommunityPartition([1] * 5 + [2] * 5)
    X = sample_attribute_matrix(ThetaX(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])), P, np.random.default_rng(0))
    assert X[:5, 0].all() and not X[:5, 1].any() and X[5:, 1].all() and not X[5:, 0].any()
    big = CommunityPartition.single(10_000)
    col = sample_attribute_matrix(ThetaX(np.array([[0.0], [0.5]])), big, np.random.default_rng(1))[:, 0]
    assert abs(col.mean() - 0.5) < 0.02


def test_attribute_matrix_missing_community():
    with pytest.raises(ValueError):
        sample_attribute_matrix(ThetaX(np.zeros((2, 1))), CommunityPartition([1, 2, 3]), np.random.default_rng(0))


def test_initial_edges_forced_pair_and_no_inter():
    P = CommunityPartition([1, 1, 2, 2, 2])
    edges = gen_initial_edge_set(theta([1, 1, 0, 0, 0], [0] * 5), P, np.random.default_rng(0))
    assert edges.tolist() == [[0, 1]]


def test_initial_edges_exact_counts_and_types(planted_small):
    G, P = planted_small
    params = fit(G, P)
    edges = gen_initial_edge_set(params.theta_m, P, np.random.default_rng(0))
    per, inter = intra_inter_counts(edges, P.membership)
    assert per.tolist() == params.theta_m.m_intra(P)[: per.size].tolist()
    assert inter == params.theta_m.m_inter
    assert len({tuple(e) for e in edges.tolist()}) == len(edges)


def test_initial_edges_track_planted_degrees():
    rng = np.random.default_rng(5)
    P = CommunityPartition([1] * 50 + [2] * 50)
    d = np.concatenate([rng.integers(1, 20, 50), rng.integers(1, 20, 50)])
    for c in (slice(0, 50), slice(50, 100)):
        if d[c].sum() % 2:
            d[c.start] += 1
    rhos = []
    for s in range(10):
        edges = gen_initial_edge_set(theta(d, np.zeros(100, dtype=int)), P, np.random.default_rng(s))
        realised = np.bincount(edges.ravel(), minlength=100)
        rhos.append(stats.spearmanr(realised, d).statistic)
    assert np.mean(rhos) > 0.8


def test_final_edge_set_identity_when_targets_met():
    P = CommunityPartition.single(4)
    edges = np.array([[0, 1], [1, 2], [0, 2], [2, 3]])
    out = get_final_edge_set(edges, theta([2, 2, 3, 1], [0] * 4, 1, 0), P, np.random.default_rng(0))
    assert sorted(map(tuple, out.tolist())) == sorted(map(tuple, edges.tolist()))


def test_final_edge_set_closes_four_cycle():
    P = CommunityPartition.single(4)
    edges = np.array([[0, 1], [1, 2], [2, 3], [0, 3]])
    out = get_final_edge_set(edges, theta([2, 2, 2, 2], [0] * 4, 1, 0), P, np.random.default_rng(0))
    assert len(out) == 4
    assert brute_triangles(4, out, P.membership)[0] >= 1


def test_phase_two_keeps_intra_triangles(planted_small):
    G, P = planted_small
    params = fit(G, P)
    edges = gen_initial_edge_set(params.theta_m, P, np.random.default_rng(1))
    before = structural_census(G.with_edges(edges), P)
    tm = theta(params.theta_m.d_intra, params.theta_m.d_inter, 0, before.tri_inter + 40)
    out = get_final_edge_set(edges, tm, P, np.random.default_rng(2))
    after = structural_census(G.with_edges(out), P)
    assert after.tri_intra == before.tri_intra
    assert after.tri_inter > before.tri_inter
    assert intra_inter_counts(out, P.membership)[1] == intra_inter_counts(edges, P.membership)[1]


def test_phase_one_raises_intra_and_keeps_types(planted_small):
    G, P = planted_small
    params = fit(G, P)
    edges = gen_initial_edge_set(params.theta_m, P, np.random.default_rng(3))
    before = structural_census(G.with_edges(edges), P)
    tm = theta(params.theta_m.d_intra, params.theta_m.d_inter, params.theta_m.tri_intra, 0)
    out = get_final_edge_set(edges, tm, P, np.random.default_rng(4))
    after = structural_census(G.with_edges(out), P)
    assert after.tri_intra >= min(params.theta_m.tri_intra, before.tri_intra)
    assert after.tri_intra >= params.theta_m.tri_intra
    per0, inter0 = intra_inter_counts(edges, P.membership)
    per1, inter1 = intra_inter_counts(out, P.membership)
    assert per0.tolist() == per1.tolist() and inter0 == inter1


def test_reconnect_identity_and_two_components():
    P = CommunityPartition.single(6)
    tm = theta([2, 2, 2, 1, 1, 0], [0] * 6)
    tri = np.array([[0, 1], [1, 2], [0, 2]])
    out = reconnect(tri, theta([2, 2, 2], [0] * 3), CommunityPartition.single(3), np.random.default_rng(0))
    assert sorted(map(tuple, out.tolist())) == [(0, 1), (0, 2), (1, 2)]
    edges = np.array([[0, 1], [1, 2], [0, 2], [3, 4]])
    out = reconnect(edges, tm, P, np.random.default_rng(0))
    assert len(out) == 4
    adj = np.zeros((6, 6))
    adj[out[:, 0], out[:, 1]] = 1
    labels = connected_components(adj, directed=False)[1]
    assert len(set(labels[:5])) == 1  # vertex 5 has no target degree and stays isolated


def test_reconnect_respects_edge_types():
    P = CommunityPartition([1, 1, 1, 2, 2, 2, 2])
    edges = np.array([[0, 1], [1, 2], [0, 2], [2, 3], [5, 6]])
    tm = theta([2, 2, 2, 0, 0, 1, 1], [0, 0, 1, 1, 0, 0, 0])
    out = reconnect(edges, tm, P, np.random.default_rng(0))
    assert intra_inter_counts(out, P.membership)[1] == 1
    assert intra_inter_counts(out, P.membership)[0].tolist() == intra_inter_counts(edges, P.membership)[0].tolist()


def _tf(intra, inter, delta=0.25):
    return ThetaF(delta, np.atleast_2d(np.asarray(intra, dtype=float)), np.asarray(inter, dtype=float))


def test_acceptance_tables_self_consistent():
    emp = (np.full((2, 5), 0.2), np.full(5, 0.2))
    t = build_acceptance_tables(_tf(np.full((2, 5), 0.2), np.full(5, 0.2)), emp, CommunityPartition([1, 1]))
    assert np.allclose(t.as_matrix(), 1.0)


def test_acceptance_tables_point_mass():
    emp = (np.full((2, 5), 0.2), np.full(5, 0.2))
    t = build_acceptance_tables(_tf([[0.2] * 5, [0, 0, 0, 0, 1]], np.full(5, 0.2)), emp, CommunityPartition([1, 1]))
    assert t.intra[1].tolist() == [0, 0, 0, 0, 1]
    assert t.as_matrix().max() == 1.0
    assert np.allclose(t.inter, 0.2)


def test_acceptance_tables_single_bucket():
    tf = _tf([[0.5, 0.5], [1.0, 0.0]], [1.0, 0.0], 1.0)
    emp = (np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.5, 0.5]))
    t = build_acceptance_tables(tf, emp, CommunityPartition([1, 1]), active=[False, True, False])
    assert t.intra[1, 0] == 1.0


def test_acceptance_tables_reject_empty_buckets():
    with pytest.raises(SamplerError):
        build_acceptance_tables(_tf([[1, 0]], [1, 0], 1.0), (np.array([[1.0, 0.0]]), np.array([0.5, 0.5])),
                                CommunityPartition([0]))


def test_empirical_distribution_is_smoothed():
    X = np.array([[1, 0], [1, 0], [0, 1]])
    intra, inter = empirical_bucket_distributions(np.array([[0, 1]]), X, CommunityPartition([1, 1, 2]), 0.5)
    assert intra[1].tolist() == pytest.approx([0.25, 0.25, 0.5])
    assert inter.tolist() == pytest.approx([1 / 3] * 3)


def test_block_masses_match_pair_sums():
    P = CommunityPartition([1, 1, 1, 2, 2])
    dist = CandidateEdgeDistribution.build(theta([1, 2, 3, 1, 1], [1, 0, 2, 1, 2]), P)
    masses = dist.block_masses()
    for g in range(dist.n_groups):
        assert sum(dist.pair_weights(g).values()) == pytest.approx(masses[g])


def test_sample_graph_exact_edges_and_simple(planted_small):
    G, P = planted_small
    params = fit(G, P)
    H, diag = sample_graph(params, np.random.default_rng(0), return_diagnostics=True)
    assert H.m == G.m
    assert np.all(H.edges[:, 0] < H.edges[:, 1])
    assert len(np.unique(H.edges, axis=0)) == H.m
    per, inter = intra_inter_counts(H.edges, P.membership)
    assert per.sum() + inter == G.m
    assert H.X.shape == G.X.shape
    assert diag.within_window()


def test_sample_graph_is_reproducible(planted_small):
    G, P = planted_small
    params = fit(G, P)
    a = sample_graph(params, np.random.default_rng(9))
    b = sample_graph(params, np.random.default_rng(9))
    assert np.array_equal(a.edges, b.edges) and np.array_equal(a.X, b.X)


def test_sample_graph_stall_detected():
    # a community of three with degree 2 each and an acceptance table that never fires
    P = CommunityPartition([1, 1, 1])
    X = ThetaX(np.array([[0.0], [1.0]]))
    tf = _tf([[0.2] * 5, [1, 0, 0, 0, 0]], np.full(5, 0.2))
    params = CAGMParams(3, P, theta([2, 2, 2], [0, 0, 0]), X, tf)
    with pytest.raises(SamplerError):
        sample_graph(params, np.random.default_rng(0))
