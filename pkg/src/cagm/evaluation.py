"""Fidelity metrics between an original and a synthetic attributed graph."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, fields

import numpy as np
import scipy.sparse as sp

from . import kernels
from .community import modularity
from .graph import CommunityPartition, structural_census, triangle_counts, wedge_count

NORM_TOL = 1e-9
DETECTION_SEEDS = 5


def _as_pair(p1, p2):
    if isinstance(p1, dict) or isinstance(p2, dict):
        keys = sorted(set(p1) | set(p2))
        return (np.array([p1.get(k, 0.0) for k in keys], dtype=np.float64),
                np.array([p2.get(k, 0.0) for k in keys], dtype=np.float64))
    a = np.asarray(p1, dtype=np.float64)
    b = np.asarray(p2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("distributions live on different domains")
    return a, b


def hellinger(p1, p2):
    """``(1/sqrt 2) * ||sqrt p1 - sqrt p2||_2`` for arrays on one domain or sparse dicts."""
    a, b = _as_pair(p1, p2)
    for p in (a, b):
        if np.any(p < -NORM_TOL) or abs(p.sum() - 1.0) > NORM_TOL:
            raise ValueError("input is not a normalised distribution")
    d = np.sqrt(np.clip(a, 0, None)) - np.sqrt(np.clip(b, 0, None))
    return float(min(1.0, math.sqrt(0.5 * float(d @ d))))


def _rel(a, b):
    return abs(b - a) / a if a else math.nan


def gcc(G):
    w = wedge_count(G)
    if w == 0:
        return math.nan
    _, _, intra, inter = triangle_counts(G)
    return 3.0 * (intra + inter) / w


def relative_errors(G, G_syn):
    """``(rho_E, rho_tri, rho_c)``; NaN marks a metric whose denominator is zero."""
    _, _, t0, _ = triangle_counts(G)
    _, _, t1, _ = triangle_counts(G_syn)
    g0, g1 = gcc(G), gcc(G_syn)
    rho_c = math.nan if math.isnan(g0) or g0 == 0 else abs((0.0 if math.isnan(g1) else g1) - g0) / g0
    return _rel(G.m, G_syn.m), _rel(int(t0), int(t1)), rho_c


def local_clustering(G):
    tri, _, _, _ = triangle_counts(G)
    d = G.degrees.astype(np.float64)
    pairs = d * (d - 1) / 2.0
    return np.where(d >= 2, tri / np.where(pairs > 0, pairs, 1.0), 0.0)


def degree_distribution(G):
    return np.bincount(G.degrees, minlength=G.n)[: G.n] / G.n


def _value_distribution(values):
    counts = Counter(np.round(values, 12).tolist())
    total = len(values)
    return {k: v / total for k, v in counts.items()}


def degree_and_lcc_distances(G, G_syn):
    if G.n != G_syn.n:
        raise ValueError(f"vertex counts differ: {G.n} vs {G_syn.n}")
    H_d = hellinger(degree_distribution(G), degree_distribution(G_syn))
    H_lc = hellinger(_value_distribution(local_clustering(G)), _value_distribution(local_clustering(G_syn)))
    return H_d, H_lc


def _attribute_distribution(X, members):
    rows = Counter(X[v].tobytes() for v in members)
    return {k: c / len(members) for k, c in rows.items()}


def rho_a(G, G_syn, P):
    """Largest per-community Hellinger distance between attribute-vector distributions."""
    worst = 0.0
    for members in P.nonempty():
        worst = max(worst, hellinger(_attribute_distribution(G.X, members),
                                     _attribute_distribution(G_syn.X, members)))
    return worst


def _f1_matrix(P1, P2):
    a, b = P1.membership, P2.membership
    keep1 = np.flatnonzero(P1.sizes > 0)
    keep2 = np.flatnonzero(P2.sizes > 0)
    keep1, keep2 = keep1[keep1 > 0], keep2[keep2 > 0]
    inter = sp.coo_matrix((np.ones(a.size), (a, b)), shape=(P1.n_communities, P2.n_communities)).toarray()
    inter = inter[np.ix_(keep1, keep2)]
    s1 = P1.sizes[keep1][:, None].astype(np.float64)
    s2 = P2.sizes[keep2][None, :].astype(np.float64)
    return 2.0 * inter / (s1 + s2)


def avg_f1(P1, P2):
    """Symmetric best-match F1; the discard community C0 is not matched."""
    if P1.n != P2.n:
        raise ValueError("partitions cover different vertex sets")
    F = _f1_matrix(P1, P2)
    if F.size == 0:
        raise ValueError("partition has no communities to match")
    return float(0.5 * F.max(axis=1).mean() + 0.5 * F.max(axis=0).mean())


def _symmetric_csr(G):
    A = G.csr.astype(np.float64)
    A.sort_indices()
    return A


def louvain(G, rng, max_passes=50, max_levels=20):
    """Greedy modularity optimisation: local moves then aggregation, repeated until stable."""
    if G.m == 0:
        raise ValueError("louvain needs at least one edge")
    A = _symmetric_csr(G)
    membership = np.arange(G.n)
    m2 = float(A.sum())
    for _ in range(max_levels):
        n = A.shape[0]
        k = np.asarray(A.sum(axis=1)).ravel()
        comm = np.arange(n, dtype=np.int64)
        tot = k.copy()
        order = rng.permutation(n).astype(np.int64)
        moves = kernels.louvain_move(A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data,
                                     k, comm, tot, m2, order, max_passes)
        if moves == 0:
            break
        _, comm = np.unique(comm, return_inverse=True)
        membership = comm[membership]
        Pm = sp.csr_matrix((np.ones(n), (np.arange(n), comm)), shape=(n, comm.max() + 1))
        A = (Pm.T @ A @ Pm).tocsr()
        A.sort_indices()
    _, membership = np.unique(membership, return_inverse=True)
    return CommunityPartition(membership + 1)


def detectability(G, G_syn, seeds=DETECTION_SEEDS, seed=0):
    """Mean Avg-F1 between Louvain runs on both graphs that share a seed."""
    scores = []
    for i in range(seeds):
        ss = np.random.SeedSequence(seed, spawn_key=(i,))
        P1 = louvain(G, np.random.default_rng(ss))
        P2 = louvain(G_syn, np.random.default_rng(ss))
        scores.append(avg_f1(P1, P2))
    return float(np.mean(scores))


def _ccdf(values, grid):
    values = np.sort(np.asarray(values, dtype=np.float64))
    return 1.0 - np.searchsorted(values, grid, side="right") / max(values.size, 1)


def ccdf_tables(G, G_syn):
    """Rows ``(value, ccdf original, ccdf synthetic)`` for degrees and local clustering."""
    d0, d1 = G.degrees, G_syn.degrees
    top = int(max(d0.max(initial=0), d1.max(initial=0)))
    dgrid = np.arange(top + 1, dtype=np.float64)
    l0, l1 = local_clustering(G), local_clustering(G_syn)
    lgrid = np.unique(np.concatenate([np.round(l0, 12), np.round(l1, 12), np.linspace(0.0, 1.0, 21)]))
    return {
        "degree": np.column_stack([dgrid, _ccdf(d0, dgrid), _ccdf(d1, dgrid)]),
        "lcc": np.column_stack([lgrid, _ccdf(l0, lgrid), _ccdf(l1, lgrid)]),
    }


def write_ccdf_tables(tables, prefix):
    paths = []
    for name, rows in tables.items():
        path = f"{prefix}_{name}_ccdf.txt"
        np.savetxt(path, rows, fmt="%.6g", header="value original synthetic")
        paths.append(path)
    return paths


@dataclass
class FidelityReport:
    rho_E: float
    rho_tri: float
    rho_c: float
    H_d: float
    H_lc: float
    rho_a: float
    avg_f1: float

    @classmethod
    def header(cls):
        return "\t".join(f.name for f in fields(cls))

    def to_row(self):
        return "\t".join(f"{v:.6g}" for v in asdict(self).values())

    def to_text(self):
        return "\n".join(f"{k:8s} {v:.6g}" for k, v in asdict(self).items())


def evaluate(G, G_syn, P=None, seeds=DETECTION_SEEDS, seed=0):
    """All fidelity metrics; ``P`` (for rho_a) defaults to a Louvain partition of ``G``."""
    if P is None:
        P = louvain(G, np.random.default_rng(seed))
    rho_E, rho_tri, rho_c = relative_errors(G, G_syn)
    H_d, H_lc = degree_and_lcc_distances(G, G_syn)
    f1 = detectability(G, G_syn, seeds, seed) if G.m and G_syn.m else math.nan
    return FidelityReport(rho_E, rho_tri, rho_c, H_d, H_lc, rho_a(G, G_syn, P), f1)


def census_summary(G, P):
    c = structural_census(G, P)
    return {"edges": G.m, "triangles": c.tri_total, "tri_intra": c.tri_intra, "tri_inter": c.tri_inter,
            "gcc": gcc(G), "modularity": modularity(G, P) if G.m else math.nan}
