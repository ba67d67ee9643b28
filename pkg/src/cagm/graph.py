"""Attributed graphs, community partitions, file I/O and exact structural counts."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels

BUCKET_EPS = 1e-9
_SPLIT = re.compile(r"[\s,]+")


class GraphFormatError(ValueError):
    """Raised for malformed edge, attribute or partition files."""


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Undirected simple graph with a binary attribute matrix.

    ``edges`` is an ``(m, 2)`` int64 array with ``u < v`` in every row, sorted
    lexicographically and free of duplicates. ``X`` is ``(n, k)`` uint8.
    ``labels`` maps dense vertex indices back to the ids used in the input files.
    """

    n: int
    edges: np.ndarray
    X: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                raise GraphFormatError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise GraphFormatError("self-loops are not allowed")
            edges = np.sort(edges, axis=1)
            edges = np.unique(edges, axis=0)
        X = np.asarray(self.X)
        if X.ndim == 1:
            X = X.reshape(self.n, -1)
        if X.shape[0] != self.n:
            raise GraphFormatError(f"attribute matrix has {X.shape[0]} rows, expected {self.n}")
        if X.size and not np.isin(X, (0, 1)).all():
            raise GraphFormatError("attribute values must be 0 or 1")
        labels = np.arange(self.n) if self.labels is None else np.asarray(self.labels)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "X", X.astype(np.uint8))
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_edges(cls, n, edges, X=None):
        if X is None:
            X = np.zeros((n, 0), dtype=np.uint8)
        return cls(n, np.asarray(edges, dtype=np.int64).reshape(-1, 2), X)

    @property
    def k(self):
        return self.X.shape[1]

    @property
    def m(self):
        return self.edges.shape[0]

    @cached_property
    def csr(self):
        """Symmetric adjacency as CSR with sorted column indices."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        A = sp.csr_matrix((np.ones(rows.shape[0], dtype=np.int64), (rows, cols)), shape=(self.n, self.n))
        A.sort_indices()
        return A

    @cached_property
    def degrees(self):
        return np.diff(self.csr.indptr).astype(np.int64)

    def neighbours(self, v):
        A = self.csr
        return A.indices[A.indptr[v]:A.indptr[v + 1]]

    def dense_adjacency(self):
        adj = np.zeros((self.n, self.n), dtype=np.uint8)
        adj[self.edges[:, 0], self.edges[:, 1]] = 1
        adj[self.edges[:, 1], self.edges[:, 0]] = 1
        return adj

    def with_edges(self, edges):
        return AttributedGraph(self.n, edges, self.X, self.labels)

    def with_attributes(self, X):
        return AttributedGraph(self.n, self.edges, X, self.labels)


class CommunityPartition:
    """Disjoint cover of ``0..n-1``; community 0 is the discard community C0."""

    def __init__(self, membership, n_communities=None):
        membership = np.array(membership, dtype=np.int64)
        if membership.ndim != 1:
            raise ValueError("membership must be one-dimensional")
        if membership.size and membership.min() < 0:
            raise ValueError("community indices must be non-negative")
        top = int(membership.max()) + 1 if membership.size else 1
        self.membership = membership
        self.membership.setflags(write=False)
        self.n_communities = max(top, n_communities or 1, 1)

    @classmethod
    def from_communities(cls, n, communities, discard=()):
        """Build from a list of vertex collections for C1..Cp (plus optional C0)."""
        membership = np.full(n, -1, dtype=np.int64)
        for v in discard:
            membership[v] = 0
        for i, comm in enumerate(communities, start=1):
            idx = np.fromiter(comm, dtype=np.int64)
            if np.any(membership[idx] != -1):
                raise ValueError("communities overlap")
            membership[idx] = i
        if np.any(membership < 0):
            raise ValueError("communities do not cover every vertex")
        return cls(membership, len(communities) + 1)

    @classmethod
    def single(cls, n):
        return cls(np.ones(n, dtype=np.int64))

    @property
    def n(self):
        return self.membership.shape[0]

    @cached_property
    def sizes(self):
        return np.bincount(self.membership, minlength=self.n_communities)

    @cached_property
    def communities(self):
        order = np.argsort(self.membership, kind="stable")
        bounds = np.searchsorted(self.membership[order], np.arange(self.n_communities + 1))
        return [order[bounds[i]:bounds[i + 1]] for i in range(self.n_communities)]

    def nonempty(self, include_discard=True):
        start = 0 if include_discard else 1
        return [c for c in self.communities[start:] if c.size]

    def compact(self):
        """Renumber C1..Cp so that no community beyond C0 is empty."""
        used = np.unique(self.membership[self.membership > 0])
        remap = np.zeros(self.n_communities, dtype=np.int64)
        remap[used] = np.arange(1, used.size + 1)
        return CommunityPartition(remap[self.membership], used.size + 1)

    def __eq__(self, other):
        if not isinstance(other, CommunityPartition):
            return NotImplemented
        return self.n == other.n and {frozenset(c.tolist()) for c in self.nonempty()} == {
            frozenset(c.tolist()) for c in other.nonempty()
        }

    def __repr__(self):
        return f"CommunityPartition(n={self.n}, sizes={self.sizes.tolist()})"


@dataclass
class StructuralCensus:
    d_intra: np.ndarray
    d_inter: np.ndarray
    m_intra: np.ndarray
    m_inter: int
    tri_intra: int
    tri_inter: int
    tri_total: int
    wedges: int
    tri_per_community: np.ndarray


def _strip(line):
    return line.split("#", 1)[0].strip()


def load_attributed_graph(edge_path, attr_path):
    """Read an edge list and a dense 0/1 attribute matrix.

    The attribute file fixes ``n`` (one row per vertex); edge endpoints must be
    integers in ``0..n-1``. Duplicate edges are merged, self-loops rejected.
    """
    X = load_attributes(attr_path)
    n = X.shape[0]
    pairs = []
    with open(edge_path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = _strip(raw)
            if not line:
                continue
            parts = _SPLIT.split(line)
            if len(parts) < 2:
                raise GraphFormatError(f"{edge_path}:{lineno}: expected 'u v'")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"{edge_path}:{lineno}: non-integer vertex id") from None
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"{edge_path}:{lineno}: vertex id out of range 0..{n - 1}")
            if u == v:
                raise GraphFormatError(f"{edge_path}:{lineno}: self-loop on vertex {u}")
            pairs.append((u, v))
    return AttributedGraph(n, np.array(pairs, dtype=np.int64).reshape(-1, 2), X)


def load_attributes(attr_path):
    rows = []
    with open(attr_path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = _strip(raw)
            if not line:
                continue
            try:
                row = [int(tok) for tok in _SPLIT.split(line)]
            except ValueError:
                raise GraphFormatError(f"{attr_path}:{lineno}: non-integer attribute value") from None
            if any(b not in (0, 1) for b in row):
                raise GraphFormatError(f"{attr_path}:{lineno}: attribute values must be 0 or 1")
            if rows and len(row) != len(rows[0]):
                raise GraphFormatError(f"{attr_path}:{lineno}: ragged row ({len(row)} vs {len(rows[0])})")
            rows.append(row)
    if not rows:
        raise GraphFormatError(f"{attr_path}: no attribute rows")
    return np.array(rows, dtype=np.uint8)


def load_partition(path, n):
    """Read ``v community_index`` lines; unlisted vertices go to C0."""
    membership = np.zeros(n, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = _strip(raw)
            if not line:
                continue
            parts = _SPLIT.split(line)
            try:
                v, c = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                raise GraphFormatError(f"{path}:{lineno}: expected 'v community_index'") from None
            if not 0 <= v < n:
                raise GraphFormatError(f"{path}:{lineno}: vertex id out of range")
            if c < 0:
                raise GraphFormatError(f"{path}:{lineno}: negative community index")
            if seen[v]:
                raise GraphFormatError(f"{path}:{lineno}: vertex {v} listed twice")
            seen[v] = True
            membership[v] = c
    return CommunityPartition(membership)


def write_edges(G, path):
    with open(path, "w") as fh:
        for u, v in G.edges:
            fh.write(f"{G.labels[u]} {G.labels[v]}\n")


def write_attributes(G, path):
    with open(path, "w") as fh:
        for row in G.X:
            fh.write(" ".join(map(str, row.tolist())) + "\n")


def write_partition(P, path, labels=None):
    labels = np.arange(P.n) if labels is None else labels
    with open(path, "w") as fh:
        for v, c in enumerate(P.membership):
            fh.write(f"{labels[v]} {c}\n")


def wedge_count(G):
    d = G.degrees
    return int((d * (d - 1) // 2).sum())


def triangle_counts(G, P=None):
    """Per-vertex triangle counts and the intra/inter split under ``P``."""
    membership = np.zeros(G.n, dtype=np.int64) if P is None else P.membership
    n_comm = 1 if P is None else P.n_communities
    A = G.csr
    return kernels.triangle_census(
        A.indptr.astype(np.int64), A.indices.astype(np.int64), membership, n_comm
    )


def structural_census(G, P):
    # C0 is counted as a community: its internal edges and triangles are intra
    memb = P.membership
    u, v = G.edges[:, 0], G.edges[:, 1]
    same = memb[u] == memb[v]
    d_intra = np.bincount(np.concatenate([u[same], v[same]]), minlength=G.n)
    d_inter = np.bincount(np.concatenate([u[~same], v[~same]]), minlength=G.n)
    m_intra = np.bincount(memb[u[same]], minlength=P.n_communities)
    _, tri_comm, tri_intra, tri_inter = triangle_counts(G, P)
    return StructuralCensus(
        d_intra=d_intra.astype(np.int64),
        d_inter=d_inter.astype(np.int64),
        m_intra=m_intra.astype(np.int64),
        m_inter=int((~same).sum()),
        tri_intra=int(tri_intra),
        tri_inter=int(tri_inter),
        tri_total=int(tri_intra + tri_inter),
        wedges=wedge_count(G),
        tri_per_community=tri_comm,
    )


def cosine_similarity(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    nx_, ny_ = math.sqrt(x @ x), math.sqrt(y @ y)
    if nx_ == 0.0 or ny_ == 0.0:
        return 0.0
    return float((x @ y) / (nx_ * ny_))


def n_buckets(delta):
    _check_delta(delta)
    return int(math.floor(1.0 / delta + BUCKET_EPS)) + 1


def _check_delta(delta):
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")


def aggregate_feature(x, y, delta):
    """Cosine-similarity bucket ``floor(s / delta)``."""
    _check_delta(delta)
    b = int(math.floor(cosine_similarity(x, y) / delta + BUCKET_EPS))
    return min(b, n_buckets(delta) - 1)


def edge_buckets(X, edges, delta):
    """Vectorised ``aggregate_feature`` over an ``(m, 2)`` edge array."""
    _check_delta(delta)
    Xf = X.astype(np.float64)
    norms = np.sqrt(Xf.sum(axis=1))
    u, v = edges[:, 0], edges[:, 1]
    dot = (Xf[u] * Xf[v]).sum(axis=1)
    denom = norms[u] * norms[v]
    zero = denom == 0.0
    s = np.where(zero, 0.0, dot / np.where(zero, 1.0, denom))
    b = np.floor(s / delta + BUCKET_EPS).astype(np.int64)
    b[zero] = 0
    return np.minimum(b, n_buckets(delta) - 1)
