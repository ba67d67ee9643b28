"""Drawing synthetic attributed graphs from fitted C-AGM parameters.

The structural part follows a community-preserving Chung-Lu process: degree
driven candidate pairs inside each community and across communities, a
triangle-raising edge-swap pass, and a reconnection pass. Attribute-edge
correlations enter through acceptance-rejection on cosine buckets.

Every random choice inside a hot loop is read from a pre-drawn uniform stream
(four numbers per proposal) so that both kernel backends produce the same graph.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import kernels
from .graph import AttributedGraph, n_buckets, triangle_counts

log = logging.getLogger(__name__)

CHUNK = 1 << 16
STALL_DRAWS = 1_000_000
PROPOSAL_FACTOR = 50
MAX_ALTERNATIONS = 20
TOLERANCE = 0.02


class SamplerError(RuntimeError):
    """A sampling stage cannot make progress."""


@dataclass
class CandidateEdgeDistribution:
    """Weighted vertex groups: one per community (intra degrees) and a final inter group.

    Inside each group vertices of zero weight come first, so a draw never lands
    on them. ``members[g_start[g]:g_end[g]]`` is the whole vertex set of group ``g``.
    """

    membership: np.ndarray
    members: np.ndarray
    cum: np.ndarray
    g_start: np.ndarray
    g_end: np.ndarray
    g_base: np.ndarray
    g_weight: np.ndarray
    g_inter: np.ndarray

    @classmethod
    def build(cls, theta_m, P):
        memb = np.ascontiguousarray(P.membership, dtype=np.int64)
        groups, weights = [], []
        for members in P.communities:
            w = theta_m.d_intra[members]
            groups.append(members[np.lexsort((members, w > 0))])
            weights.append(theta_m.d_intra[groups[-1]])
        everyone = np.arange(P.n)
        groups.append(everyone[np.lexsort((everyone, theta_m.d_inter > 0))])
        weights.append(theta_m.d_inter[groups[-1]])
        sizes = np.array([g.size for g in groups], dtype=np.int64)
        g_end = np.cumsum(sizes)
        g_start = g_end - sizes
        cum = np.cumsum(np.concatenate(weights).astype(np.float64))
        padded = np.concatenate([[0.0], cum])
        g_base = padded[g_start]
        g_weight = padded[g_end] - g_base
        g_inter = np.zeros(sizes.size, dtype=np.bool_)
        g_inter[-1] = True
        return cls(memb, np.concatenate(groups).astype(np.int64), cum, g_start, g_end, g_base, g_weight, g_inter)

    @property
    def n_groups(self):
        return self.g_start.size

    @property
    def inter_group(self):
        return self.n_groups - 1

    def arrays(self):
        return (self.membership, self.members, self.cum, self.g_start, self.g_end, self.g_base, self.g_weight)

    def block_masses(self):
        """Expected edge mass of each group once self and same-community pairs are removed."""
        out = np.zeros(self.n_groups)
        for g in range(self.n_groups):
            S = self.g_weight[g]
            if S <= 0:
                continue
            lo, hi = self.g_start[g], self.g_end[g]
            w = np.diff(np.concatenate([[self.g_base[g]], self.cum[lo:hi]]))
            if self.g_inter[g]:
                per_comm = np.bincount(self.membership[self.members[lo:hi]], weights=w)
                out[g] = (S * S - (per_comm ** 2).sum()) / (2.0 * S)
            else:
                out[g] = (S * S - (w ** 2).sum()) / (2.0 * S)
        return out

    def pair_weights(self, g):
        """Normalised-by-group candidate mass ``d_v d_w / S_g`` for every valid pair of group ``g``."""
        lo, hi = self.g_start[g], self.g_end[g]
        verts = self.members[lo:hi]
        w = np.diff(np.concatenate([[self.g_base[g]], self.cum[lo:hi]]))
        S = self.g_weight[g]
        pairs = {}
        for i in range(verts.size):
            for j in range(i + 1, verts.size):
                a, b = verts[i], verts[j]
                if self.g_inter[g] and self.membership[a] == self.membership[b]:
                    continue
                if w[i] > 0 and w[j] > 0:
                    pairs[(min(a, b), max(a, b))] = w[i] * w[j] / S
        return pairs


@dataclass
class AcceptanceTables:
    intra: np.ndarray  # (n_communities, |B|)
    inter: np.ndarray  # (|B|,)

    def as_matrix(self):
        """One row per sampling group: communities, then the inter group."""
        return np.ascontiguousarray(np.vstack([self.intra, self.inter[None, :]]), dtype=np.float64)


@dataclass
class SampleDiagnostics:
    draws: int = 0
    intra_proposals: int = 0
    inter_proposals: int = 0
    alternations: int = 0
    swaps: int = 0
    triangle_target: int = 0
    triangles: int = 0
    components: int = 1
    notes: list = field(default_factory=list)

    def within_window(self):
        if self.triangle_target == 0:
            return True
        return abs(self.triangles - self.triangle_target) <= TOLERANCE * self.triangle_target


# --- attributes ----------------------------------------------------------------

def sample_attribute_matrix(theta_x, P, rng):
    """Each bit independently Bernoulli with its community's probability."""
    probs = np.asarray(theta_x.probs, dtype=np.float64)
    if probs.shape[0] < P.n_communities:
        raise ValueError(f"attribute parameters cover {probs.shape[0]} communities, partition has {P.n_communities}")
    p = probs[P.membership]
    return (rng.random(p.shape) < p).astype(np.uint8)


# --- edge drawing ----------------------------------------------------------------

def _uniforms(rng, n_proposals):
    return rng.random(kernels.DRAW_STRIDE * n_proposals)


def _draw(dist, adj, block_weights, target, rng, Xf=None, norms=None, delta=1.0, gamma=None, dedup=True):
    """Draw ``target`` accepted edges from the groups weighted by ``block_weights``."""
    out = np.zeros((max(target, 0), 2), dtype=np.int64)
    if target <= 0:
        return out, 0
    if Xf is None:
        Xf = np.zeros((adj.shape[0], 1))
        norms = np.zeros(adj.shape[0])
        gamma = np.ones((dist.n_groups, 1))
    block_cum = np.cumsum(np.asarray(block_weights, dtype=np.float64))
    if block_cum[-1] <= 0:
        raise SamplerError("no vertex carries weight for the requested edges")
    placed = draws = since_progress = 0
    while placed < target:
        chunk = min(CHUNK, STALL_DRAWS)
        got, used = kernels.draw_edges(
            adj, dist.membership, dist.members, dist.cum, dist.g_start, dist.g_end,
            dist.g_base, dist.g_weight, dist.g_inter, block_cum, Xf, norms, float(delta), gamma,
            target - placed, _uniforms(rng, chunk), dedup, out[placed:])
        placed += got
        draws += used
        since_progress = 0 if got else since_progress + used
        if since_progress >= STALL_DRAWS:
            raise SamplerError(f"edge sampling stalled at {placed}/{target} edges after {draws} draws")
    return out, draws


def gen_initial_edge_set(theta_m, P, rng, dist=None, adj=None):
    """Chung-Lu edges: exactly ``m_C`` distinct intra edges per community, then ``m_inter`` inter edges.

    Rows come back in creation order.
    """
    dist = dist or CandidateEdgeDistribution.build(theta_m, P)
    adj = adj if adj is not None else np.zeros((P.n, P.n), dtype=np.uint8)
    m_intra = theta_m.m_intra(P)
    pieces = []
    for g in range(dist.n_groups):
        target = int(theta_m.m_inter if g == dist.inter_group else m_intra[g])
        if target == 0:
            continue
        if dist.g_weight[g] <= 0:
            raise SamplerError(f"group {g} needs {target} edges but has no positive degree")
        onehot = np.zeros(dist.n_groups)
        onehot[g] = dist.g_weight[g]
        edges, _ = _draw(dist, adj, onehot, target, rng)
        pieces.append(edges)
    if not pieces:
        return np.zeros((0, 2), dtype=np.int64)
    return np.vstack(pieces)


# --- triangle enforcement ------------------------------------------------------

def _triangle_split(n, edges, P):
    G = AttributedGraph.from_edges(n, edges)
    _, _, intra, inter = triangle_counts(G, P)
    return int(intra), int(inter)


def _edges_from_adj(adj):
    u, v = np.nonzero(np.triu(adj, 1))
    return np.column_stack([u, v]).astype(np.int64)


def _rings(edges, P):
    memb = P.membership
    same = memb[edges[:, 0]] == memb[edges[:, 1]]
    intra, inter = edges[same], edges[~same]
    comm = memb[intra[:, 0]]
    order = np.argsort(comm, kind="stable")
    intra = intra[order]
    ring_len = np.bincount(comm, minlength=P.n_communities).astype(np.int64)
    ring_off = np.concatenate([[0], np.cumsum(ring_len)[:-1]]).astype(np.int64)
    return (np.ascontiguousarray(intra[:, 0]), np.ascontiguousarray(intra[:, 1]), ring_off, ring_len,
            np.ascontiguousarray(inter[:, 0]), np.ascontiguousarray(inter[:, 1]))


def _final_edge_set(adj, edges, theta_m, P, rng, dist, diag, factor=PROPOSAL_FACTOR):
    """Raise intra then inter triangle counts to their targets by swapping out the oldest edges.

    ``edges`` must be in creation order; the returned array keeps the ring order
    (oldest first per community, then inter edges).
    """
    n = P.n
    cap = factor * max(edges.shape[0], 1)
    ru, rv, roff, rlen, iu, iv = _rings(edges, P)
    mu_in, mu_out = _triangle_split(n, edges, P)

    eligible = np.flatnonzero((rlen > 0) & (dist.g_weight[:-1] > 0) & (P.sizes >= 3)).astype(np.int64)
    head = np.zeros(P.n_communities, dtype=np.int64)
    done = 0
    target_in = int(theta_m.tri_intra)
    while mu_in < target_in and done < cap and eligible.size:
        chunk = min(CHUNK, cap - done)
        mu_in, used = kernels.enforce_intra(adj, *dist.arrays(), eligible, ru, rv, roff, rlen, head,
                                            mu_in, target_in, _uniforms(rng, chunk))
        done += used
    diag.intra_proposals += done
    if mu_in < target_in:
        diag.notes.append(f"intra triangles {mu_in} below target {target_in} after {done} proposals")

    # phase 1 may have moved the inter count
    _, mu_out = _triangle_split(n, _edges_from_adj(adj), P)
    target_out = int(theta_m.tri_inter)
    head1 = np.zeros(1, dtype=np.int64)
    done = 0
    while mu_out < target_out and done < cap and iu.size:
        chunk = min(CHUNK, cap - done)
        mu_out, used = kernels.enforce_inter(adj, *dist.arrays(), dist.inter_group, iu, iv, head1,
                                             mu_out, target_out, _uniforms(rng, chunk))
        done += used
    diag.inter_proposals += done
    if mu_out < target_out:
        diag.notes.append(f"inter triangles {mu_out} below target {target_out} after {done} proposals")
    # rotate rings so the next call starts from the current oldest edge
    parts = []
    for c in range(P.n_communities):
        if rlen[c]:
            seg = np.column_stack([ru[roff[c]:roff[c] + rlen[c]], rv[roff[c]:roff[c] + rlen[c]]])
            parts.append(np.roll(seg, -head[c], axis=0))
    if iu.size:
        parts.append(np.roll(np.column_stack([iu, iv]), -head1[0], axis=0))
    return np.vstack(parts) if parts else np.zeros((0, 2), dtype=np.int64)


def get_final_edge_set(edges, theta_m, P, rng, factor=PROPOSAL_FACTOR):
    """Triangle-raising swaps on ``edges`` (creation order); edge count is unchanged."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    adj = np.zeros((P.n, P.n), dtype=np.uint8)
    adj[edges[:, 0], edges[:, 1]] = adj[edges[:, 1], edges[:, 0]] = 1
    dist = CandidateEdgeDistribution.build(theta_m, P)
    return _final_edge_set(adj, edges, theta_m, P, rng, dist, SampleDiagnostics(), factor)


# --- reconnection ----------------------------------------------------------------

def _bridges(n, edges):
    """Set of bridge edges ``(min, max)`` via an iterative low-link DFS."""
    A = sp.csr_matrix((np.ones(2 * len(edges)), (np.r_[edges[:, 0], edges[:, 1]], np.r_[edges[:, 1], edges[:, 0]])),
                      shape=(n, n))
    indptr, indices = A.indptr, A.indices
    disc = np.full(n, -1)
    low = np.zeros(n, dtype=np.int64)
    out = set()
    t = 0
    for root in range(n):
        if disc[root] >= 0 or indptr[root] == indptr[root + 1]:
            continue
        disc[root] = low[root] = t
        t += 1
        stack = [(root, -1, indptr[root])]
        while stack:
            v, parent, p = stack[-1]
            if p < indptr[v + 1]:
                stack[-1] = (v, parent, p + 1)
                w = indices[p]
                if w == parent:
                    continue
                if disc[w] < 0:
                    disc[w] = low[w] = t
                    t += 1
                    stack.append((w, v, indptr[w]))
                else:
                    low[v] = min(low[v], disc[w])
            else:
                stack.pop()
                if parent >= 0:
                    low[parent] = min(low[parent], low[v])
                    if low[v] > disc[parent]:
                        out.add((min(v, parent), max(v, parent)))
    return out


def _components(adj):
    n_comp, labels = connected_components(sp.csr_matrix(adj), directed=False)
    return n_comp, labels


def _main_label(labels):
    sizes = np.bincount(labels)
    best = np.flatnonzero(sizes == sizes.max())
    # tie: component holding the smallest vertex id
    firsts = [int(np.flatnonzero(labels == b)[0]) for b in best]
    return int(best[int(np.argmin(firsts))])


def _reconnect(adj, theta_m, P, rng, diag):
    memb = P.membership
    target_deg = theta_m.d_intra + theta_m.d_inter
    swaps = 0
    stuck = np.zeros(P.n, dtype=bool)
    while True:
        n_comp, labels = _components(adj)
        main = _main_label(labels)
        live = np.bincount(labels, weights=(target_deg > 0) & ~stuck, minlength=n_comp)
        small = [c for c in range(n_comp) if c != main and live[c] > 0]
        if not small:
            break
        edges = _edges_from_adj(adj)
        bridges = _bridges(P.n, edges)
        in_main = labels[edges[:, 0]] == main
        cn = (adj[edges[:, 0]].astype(np.int32) * adj[edges[:, 1]]).sum(axis=1)
        progressed = False
        for c in small:
            verts = np.flatnonzero((labels == c) & (target_deg > 0))
            verts = verts[rng.permutation(verts.size)]
            done = False
            for u in verts:
                kinds = ["intra", "inter"] if theta_m.d_intra[u] >= theta_m.d_inter[u] else ["inter", "intra"]
                for kind in kinds:
                    same = memb[edges[:, 0]] == memb[edges[:, 1]]
                    ok = in_main & (same if kind == "intra" else ~same)
                    cand = []
                    for side in (0, 1):
                        a = edges[:, side]
                        match = memb[a] == memb[u] if kind == "intra" else memb[a] != memb[u]
                        for i in np.flatnonzero(ok & match):
                            cand.append((int(cn[i]), i, side))
                    if not cand:
                        continue
                    perm = rng.permutation(len(cand))
                    cand = sorted((cand[j] for j in perm), key=lambda x: x[0])
                    for _, i, side in cand:
                        a, b = int(edges[i, side]), int(edges[i, 1 - side])
                        if (min(a, b), max(a, b)) in bridges:
                            continue
                        adj[a, b] = adj[b, a] = 0
                        adj[u, a] = adj[a, u] = 1
                        swaps += 1
                        done = True
                        break
                    if done:
                        break
                if done:
                    break
            if done:
                progressed = True
                break  # topology changed; recompute bridges
            stuck[labels == c] = True
            diag.notes.append(f"component of {int((labels == c).sum())} vertices could not be attached")
        if not progressed and not small:
            break
    diag.swaps += swaps
    n_comp, labels = _components(adj)
    live = np.bincount(labels, weights=target_deg > 0, minlength=n_comp)
    diag.components = int((live > 0).sum())
    return swaps


def reconnect(edges, theta_m, P, rng):
    """Attach every non-main component carrying positive target degree with type-preserving swaps."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    adj = np.zeros((P.n, P.n), dtype=np.uint8)
    adj[edges[:, 0], edges[:, 1]] = adj[edges[:, 1], edges[:, 0]] = 1
    _reconnect(adj, theta_m, P, rng, SampleDiagnostics())
    return _edges_from_adj(adj)


def _finalise(adj, edges, theta_m, P, rng, dist, diag):
    """Alternate triangle enforcement and reconnection until inside the tolerance window."""
    target = int(theta_m.tri_intra) + int(theta_m.tri_inter)
    diag.triangle_target = target
    for r in range(MAX_ALTERNATIONS):
        diag.alternations = r + 1
        edges = _final_edge_set(adj, edges, theta_m, P, rng, dist, diag)
        _reconnect(adj, theta_m, P, rng, diag)
        tri = sum(_triangle_split(P.n, _edges_from_adj(adj), P))
        diag.triangles = tri
        if tri >= (1.0 - TOLERANCE) * target:
            break
        edges = _order_like(adj, edges)
    else:
        diag.notes.append(f"triangles {diag.triangles} outside window of {target}")
    return _edges_from_adj(adj)


def _order_like(adj, previous):
    """Keep surviving edges in their previous order and append new ones."""
    current = _edges_from_adj(adj)
    n = adj.shape[0]
    key_prev = previous[:, 0] * n + previous[:, 1]
    key_cur = current[:, 0] * n + current[:, 1]
    alive = np.isin(key_prev, key_cur)
    fresh = ~np.isin(key_cur, key_prev)
    return np.vstack([previous[alive], current[fresh]])


# --- acceptance tables -----------------------------------------------------------

def empirical_bucket_distributions(edges, X, P, delta):
    """Add-one smoothed bucket distributions per community and across communities."""
    from .graph import edge_buckets

    nb = n_buckets(delta)
    memb = P.membership
    b = edge_buckets(X, edges, delta) if len(edges) else np.zeros(0, dtype=np.int64)
    same = memb[edges[:, 0]] == memb[edges[:, 1]] if len(edges) else np.zeros(0, dtype=bool)
    intra = np.ones((P.n_communities, nb))
    np.add.at(intra, (memb[edges[same, 0]], b[same]), 1.0)
    inter = np.ones(nb) + np.bincount(b[~same], minlength=nb)
    return intra / intra.sum(axis=1, keepdims=True), inter / inter.sum()


def build_acceptance_tables(theta_f, empirical, P, active=None):
    """``Gamma = R / SupR`` with ``R`` the target over empirical bucket probability.

    ``active`` flags the sampling groups (communities, then inter) that can
    receive edges; only those take part in ``SupR``.
    """
    emp_intra, emp_inter = empirical
    emp_intra = np.atleast_2d(np.asarray(emp_intra, dtype=np.float64))
    emp_inter = np.asarray(emp_inter, dtype=np.float64)
    tf_intra = np.atleast_2d(np.asarray(theta_f.intra, dtype=np.float64))
    tf_inter = np.asarray(theta_f.inter, dtype=np.float64)
    if tf_intra.shape[0] < P.n_communities:
        raise ValueError("correlation parameters do not cover every community")
    tf_intra = tf_intra[: P.n_communities]
    if np.any(emp_intra <= 0) or np.any(emp_inter <= 0):
        raise SamplerError("empirical bucket distribution has empty buckets after smoothing")
    R = np.vstack([tf_intra / emp_intra, (tf_inter / emp_inter)[None, :]])
    active = np.ones(R.shape[0], dtype=bool) if active is None else np.asarray(active, dtype=bool)
    sup = R[active].max() if active.any() else 0.0
    if not sup > 0:
        raise SamplerError("degenerate acceptance ratios")
    gamma = np.clip(R / sup, 0.0, 1.0)
    return AcceptanceTables(gamma[:-1], gamma[-1])


# --- full pipeline ---------------------------------------------------------------

def sample_graph(params, rng, return_diagnostics=False, enforce=True):
    """Synthetic attributed graph from ``params``.

    An auxiliary CPGM edge set on the sampled attributes provides the empirical
    bucket distributions; acceptance-rejection then draws exactly the target
    number of distinct edges, after which triangle enforcement and reconnection
    run with edge-count-preserving swaps.
    """
    P, tm, tf = params.partition, params.theta_m, params.theta_f
    n = params.n
    diag = SampleDiagnostics()
    X = sample_attribute_matrix(params.theta_x, P, rng)
    dist = CandidateEdgeDistribution.build(tm, P)

    aux_adj = np.zeros((n, n), dtype=np.uint8)
    aux = gen_initial_edge_set(tm, P, rng, dist, aux_adj)
    if enforce and len(aux):
        aux = _final_edge_set(aux_adj, aux, tm, P, rng, dist, SampleDiagnostics())
    empirical = empirical_bucket_distributions(aux, X, P, tf.delta)
    del aux_adj

    m_intra = tm.m_intra(P)
    active = np.append(m_intra > 0, tm.m_inter > 0) & (dist.g_weight > 0)
    tables = build_acceptance_tables(tf, empirical, P, active)
    gamma = tables.as_matrix()
    target = tm.edge_target(P)
    Xf = np.ascontiguousarray(X, dtype=np.float64)
    norms = np.sqrt(Xf.sum(axis=1))
    weights = np.where(active, dist.g_weight, 0.0)

    adj = np.zeros((n, n), dtype=np.uint8)
    edges, diag.draws = _draw(dist, adj, weights, target, rng, Xf, norms, tf.delta, gamma)
    if enforce:
        edges = _finalise(adj, edges, tm, P, rng, dist, diag)
    G = AttributedGraph(n, edges, X)
    if diag.notes:
        log.info("sampler diagnostics: %s", "; ".join(diag.notes))
    return (G, diag) if return_diagnostics else G


def candidate_stream(params, X, rng, n_draws, gamma=None):
    """Accepted pairs from ``n_draws`` proposals without de-duplication.

    Exposes the raw proposal/acceptance process so its target distribution can be checked.
    """
    P, tm, tf = params.partition, params.theta_m, params.theta_f
    dist = CandidateEdgeDistribution.build(tm, P)
    if gamma is None:
        gamma = np.ones((dist.n_groups, n_buckets(tf.delta)))
    adj = np.zeros((P.n, P.n), dtype=np.uint8)
    Xf = np.ascontiguousarray(X, dtype=np.float64)
    norms = np.sqrt(Xf.sum(axis=1))
    out = np.zeros((n_draws, 2), dtype=np.int64)
    block_cum = np.cumsum(dist.g_weight)
    placed, _ = kernels.draw_edges(adj, dist.membership, dist.members, dist.cum, dist.g_start, dist.g_end,
                                   dist.g_base, dist.g_weight, dist.g_inter, block_cum, Xf, norms,
                                   float(tf.delta), np.ascontiguousarray(gamma, dtype=np.float64),
                                   n_draws, _uniforms(rng, n_draws), False, out)
    return out[:placed]
