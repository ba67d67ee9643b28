"""Modularity, the attribute-augmented objective and private divisive partitioning."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import AttributedGraph, CommunityPartition
from .mechanisms import exponential_select

log = logging.getLogger(__name__)

# edge-count floor under which the structural sensitivity 0.0003 is trusted
ASSUMED_MIN_EDGES = 10_000


@dataclass(frozen=True)
class ObjectiveConfig:
    w_s: float
    aux_edge_quota: int
    sensitivity_bound: float

    @property
    def w_a(self):
        return 1.0 - self.w_s

    @classmethod
    def for_graph(cls, G, w_s=0.98):
        if not 0.0 <= w_s <= 1.0:
            raise ValueError(f"w_s must lie in [0, 1], got {w_s}")
        n, m = G.n, G.m
        quota = aux_edge_quota(n)
        if m >= ASSUMED_MIN_EDGES:
            ds = 3.0 / ASSUMED_MIN_EDGES
        else:
            ds = 3.0 / max(m, 1)
            log.info("graph has m=%d < %d edges; structural sensitivity raised to 3/m=%.3g",
                     m, ASSUMED_MIN_EDGES, ds)
        da = 60.0 / n if n else 0.0
        return cls(w_s=w_s, aux_edge_quota=quota, sensitivity_bound=w_s * ds + (1.0 - w_s) * da)


@dataclass(frozen=True)
class SearchConfig:
    rounds: int = 8
    fanout: int = 4
    lp_iterations: int = 30

    def __post_init__(self):
        if self.rounds < 1 or self.fanout < 1:
            raise ValueError("rounds and fanout must be >= 1")


def aux_edge_quota(n):
    return math.ceil(n * (n - 1) / 20)


def modularity(G, P):
    """Newman modularity ``sum_C l_C/m - (d_C/2m)^2``; C0 counts as a community."""
    m = G.m
    if m == 0:
        raise ValueError("modularity is undefined for a graph without edges")
    return _modularity_from(G.edges, G.degrees, m, P.membership, P.n_communities)


def _modularity_from(edges, degrees, m, membership, n_comm):
    cu = membership[edges[:, 0]]
    same = cu == membership[edges[:, 1]]
    inner = np.bincount(cu[same], minlength=n_comm)
    dsum = np.bincount(membership, weights=degrees, minlength=n_comm)
    return float((inner / m).sum() - ((dsum / (2.0 * m)) ** 2).sum())


def similarity_matrix(X):
    Xf = X.astype(np.float64)
    norms = np.sqrt(Xf.sum(axis=1))
    S = Xf @ Xf.T
    denom = np.outer(norms, norms)
    with np.errstate(invalid="ignore", divide="ignore"):
        S = np.where(denom > 0, S / np.where(denom > 0, denom, 1.0), 0.0)
    return S


def build_auxiliary_graph(G):
    """Graph on G's vertices joining the ``ceil(n(n-1)/20)`` most similar attribute pairs.

    Ties in similarity are broken in lexicographic pair order. Similarities are
    rounded to 12 decimals first so that mathematically equal cosines compare equal.
    """
    n = G.n
    if n < 2:
        raise ValueError("auxiliary graph needs at least two vertices")
    S = similarity_matrix(G.X)
    iu, ju = np.triu_indices(n, k=1)
    key = np.round(S[iu, ju], 12)
    top = np.argsort(-key, kind="stable")[: aux_edge_quota(n)]
    top.sort()
    return AttributedGraph(n, np.column_stack([iu[top], ju[top]]), G.X, G.labels)


class _Objective:
    """Caches what is needed to score many partitions of the same graph."""

    def __init__(self, G, G_aux, cfg):
        self.cfg = cfg
        self.G = G
        self.G_aux = G_aux

    def __call__(self, membership):
        n_comm = int(membership.max()) + 1
        value = 0.0
        if self.cfg.w_s > 0:
            value += self.cfg.w_s * _modularity_from(self.G.edges, self.G.degrees, self.G.m, membership, n_comm)
        if self.cfg.w_a > 0:
            A = self.G_aux
            value += self.cfg.w_a * _modularity_from(A.edges, A.degrees, A.m, membership, n_comm)
        return value


def combined_objective(G, G_aux, P, cfg):
    """``w_s * modularity(G) + w_a * modularity(G_aux)``."""
    return _Objective(G, G_aux, cfg)(P.membership)


def label_propagation(A, rng, max_iter=30):
    """Semi-synchronous label propagation on a sparse symmetric matrix.

    Each sweep half the vertices (chosen at random) adopt a most frequent
    neighbour label, ties broken at random. Stops once every vertex already
    carries one of its most frequent neighbour labels.
    """
    n = A.shape[0]
    labels = np.arange(n)
    has_nbrs = np.diff(A.indptr) > 0
    if not has_nbrs.any():
        return labels
    for _ in range(max_iter):
        onehot = sp.csr_matrix((np.ones(n), (np.arange(n), labels)), shape=(n, n))
        counts = (A @ onehot).tocsr()
        own = np.asarray(counts[np.arange(n), labels]).ravel()
        top = np.zeros(n)
        nz = np.diff(counts.indptr) > 0
        top[nz] = np.maximum.reduceat(counts.data, counts.indptr[:-1][nz])
        if np.all((own >= top) | ~has_nbrs):
            break
        counts.data = counts.data + 0.5 * rng.random(counts.data.size)
        best = np.asarray(counts.argmax(axis=1)).ravel()
        move = has_nbrs & (rng.random(n) < 0.5)
        labels = np.where(move, best, labels)
    return labels


def propose_bisection(G, membership, rng, lp_iterations=30):
    """Split one random community into its largest label-propagation cluster and the rest.

    Returns ``membership`` unchanged when the chosen community yields one cluster.
    """
    sizes = np.bincount(membership)
    splittable = np.flatnonzero(sizes >= 2)
    if splittable.size == 0:
        return membership
    c = int(splittable[rng.integers(splittable.size)])
    members = np.flatnonzero(membership == c)
    sub = G.csr[members][:, members].tocsr()
    labels = label_propagation(sub, rng, lp_iterations)
    uniq, counts = np.unique(labels, return_counts=True)
    if uniq.size < 2:
        return membership
    keep = uniq[np.argmax(counts)]
    out = membership.copy()
    out[members[labels != keep]] = int(membership.max()) + 1
    return out


def dp_partition(G, eps_c, cfg=None, search=None, rng=None, G_aux=None):
    """Private top-down community search.

    Starting from one community, each of ``search.rounds`` rounds proposes
    ``search.fanout`` bisections and picks one of them, or the unchanged
    partition, with the exponential mechanism scored by the combined objective.
    Each selection spends ``eps_c / rounds``.
    """
    if not eps_c > 0:
        raise ValueError(f"eps_c must be positive, got {eps_c}")
    if G.m == 0:
        raise ValueError("cannot partition a graph without edges")
    cfg = cfg or ObjectiveConfig.for_graph(G)
    search = search or SearchConfig()
    rng = rng if rng is not None else np.random.default_rng()
    if cfg.w_a > 0 and G_aux is None:
        G_aux = build_auxiliary_graph(G)
    score = _Objective(G, G_aux, cfg)
    eps_round = eps_c / search.rounds
    membership = np.ones(G.n, dtype=np.int64)
    for _ in range(search.rounds):
        candidates = [membership]
        for _ in range(search.fanout):
            candidates.append(propose_bisection(G, membership, rng, search.lp_iterations))
        scores = [score(c) for c in candidates]
        if math.isinf(eps_round):
            best = np.flatnonzero(np.isclose(scores, max(scores), rtol=0, atol=1e-12))
            membership = candidates[int(rng.choice(best))]
        else:
            membership = exponential_select(candidates, scores, cfg.sensitivity_bound, eps_round, rng)
    return CommunityPartition(membership).compact()
