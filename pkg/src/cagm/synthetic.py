"""Small synthetic graphs with known structure, used for checks and benchmarks."""

from __future__ import annotations

import numpy as np

from .graph import AttributedGraph, CommunityPartition


def planted_partition(n=2000, n_communities=4, p_in=0.02, p_out=0.001, closure=0.3, k=10,
                      attr_in=0.6, attr_out=0.1, rng=None):
    """Stochastic block model plus one round of triadic closure, with attributes.

    Each community favours its own block of ``k // n_communities`` attribute
    columns (probability ``attr_in``) over the others (``attr_out``).
    ``closure`` is the chance that an open intra wedge rooted at a vertex is
    closed, applied to one random wedge per vertex.
    Returns ``(graph, planted partition)``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if n_communities < 1 or n < n_communities:
        raise ValueError("need 1 <= n_communities <= n")
    membership = np.sort(np.arange(n) % n_communities) + 1
    same = membership[:, None] == membership[None, :]
    prob = np.where(same, p_in, p_out)
    upper = np.triu(rng.random((n, n)) < prob, 1)
    adj = upper | upper.T

    for v in rng.permutation(n):
        if rng.random() >= closure:
            continue
        nb = np.flatnonzero(adj[v] & same[v])
        if nb.size < 2:
            continue
        a, b = rng.choice(nb, size=2, replace=False)
        adj[a, b] = adj[b, a] = True

    u, w = np.nonzero(np.triu(adj, 1))
    edges = np.column_stack([u, w])

    X = np.zeros((n, k), dtype=np.uint8)
    if k:
        block = max(1, k // n_communities)
        favoured = np.zeros((n_communities + 1, k), dtype=bool)
        for c in range(1, n_communities + 1):
            lo = ((c - 1) * block) % k
            favoured[c, lo:lo + block] = True
        p = np.where(favoured[membership], attr_in, attr_out)
        X = (rng.random((n, k)) < p).astype(np.uint8)
    return AttributedGraph(n, edges, X), CommunityPartition(membership, n_communities + 1)


def chung_lu(degrees, rng=None, X=None):
    """Community-blind Chung-Lu graph with exactly ``sum(degrees) // 2`` distinct edges.

    Pairs are drawn with probability proportional to ``d_v d_w``; self-pairs and
    repeats are redrawn.
    """
    rng = rng if rng is not None else np.random.default_rng()
    d = np.asarray(degrees, dtype=np.float64)
    n = d.size
    target = int(d.sum()) // 2
    if target > n * (n - 1) // 2:
        raise ValueError("more edges requested than vertex pairs")
    p = d / d.sum() if d.sum() > 0 else None
    seen = set()
    while len(seen) < target:
        need = target - len(seen)
        v = rng.choice(n, size=2 * need + 16, p=p)
        w = rng.choice(n, size=2 * need + 16, p=p)
        for a, b in zip(v.tolist(), w.tolist()):
            if a == b:
                continue
            seen.add((a, b) if a < b else (b, a))
            if len(seen) == target:
                break
    edges = np.array(sorted(seen), dtype=np.int64).reshape(-1, 2)
    return AttributedGraph(n, edges, X if X is not None else np.zeros((n, 0), dtype=np.uint8))


def random_graph(n, p, k=0, rng=None):
    """Erdős–Rényi graph with uniform random binary attributes."""
    rng = rng if rng is not None else np.random.default_rng()
    upper = np.triu(rng.random((n, n)) < p, 1)
    u, w = np.nonzero(upper)
    X = (rng.random((n, k)) < 0.5).astype(np.uint8)
    return AttributedGraph(n, np.column_stack([u, w]), X)
