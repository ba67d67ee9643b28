"""numba implementations. Keep the arithmetic in lockstep with ``_numpy.py``."""

import numpy as np
from numba import njit

BUCKET_EPS = 1e-9


@njit(cache=True)
def triangle_census(indptr, indices, membership, n_comm):
    n = indptr.shape[0] - 1
    tri_vertex = np.zeros(n, dtype=np.int64)
    tri_comm = np.zeros(n_comm, dtype=np.int64)
    tri_intra = 0
    tri_inter = 0
    for u in range(n):
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if v <= u:
                continue
            # merge-intersect the sorted rows, counting w > v only
            i = indptr[u]
            j = indptr[v]
            iend = indptr[u + 1]
            jend = indptr[v + 1]
            while i < iend and j < jend:
                a = indices[i]
                b = indices[j]
                if a < b:
                    i += 1
                elif b < a:
                    j += 1
                else:
                    if a > v:
                        tri_vertex[u] += 1
                        tri_vertex[v] += 1
                        tri_vertex[a] += 1
                        cu = membership[u]
                        if cu == membership[v] and cu == membership[a]:
                            tri_intra += 1
                            tri_comm[cu] += 1
                        else:
                            tri_inter += 1
                    i += 1
                    j += 1
    return tri_vertex, tri_comm, tri_intra, tri_inter


@njit(cache=True)
def _pick(members, cum, g_start, g_end, g_base, g_weight, g, u):
    x = g_base[g] + u * g_weight[g]
    i = np.searchsorted(cum, x, side="right")
    if i < g_start[g]:
        i = g_start[g]
    if i > g_end[g] - 1:
        i = g_end[g] - 1
    return members[i]


@njit(cache=True)
def _bucket(Xf, norms, v, w, delta, nb):
    nv = norms[v]
    nw = norms[w]
    if nv == 0.0 or nw == 0.0:
        return 0
    dot = 0.0
    for ell in range(Xf.shape[1]):
        dot += Xf[v, ell] * Xf[w, ell]
    s = dot / (nv * nw)
    b = int(np.floor(s / delta + BUCKET_EPS))
    if b > nb - 1:
        b = nb - 1
    return b


@njit(cache=True)
def draw_edges(adj, membership, members, cum, g_start, g_end, g_base, g_weight, g_inter,
               block_cum, Xf, norms, delta, gamma, target, uniforms, dedup, out):
    nb = gamma.shape[1]
    n_blocks = block_cum.shape[0]
    total = block_cum[n_blocks - 1]
    n_draws = uniforms.shape[0] // 4
    placed = 0
    if target <= 0:
        return 0, 0
    for t in range(n_draws):
        u0 = uniforms[4 * t]
        u1 = uniforms[4 * t + 1]
        u2 = uniforms[4 * t + 2]
        u3 = uniforms[4 * t + 3]
        g = np.searchsorted(block_cum, u0 * total, side="right")
        if g > n_blocks - 1:
            g = n_blocks - 1
        v = _pick(members, cum, g_start, g_end, g_base, g_weight, g, u1)
        w = _pick(members, cum, g_start, g_end, g_base, g_weight, g, u2)
        if v == w:
            continue
        if g_inter[g] and membership[v] == membership[w]:
            continue
        if dedup and adj[v, w]:
            continue
        b = _bucket(Xf, norms, v, w, delta, nb)
        if u3 > gamma[g, b]:
            continue
        if dedup:
            adj[v, w] = 1
            adj[w, v] = 1
        if v < w:
            out[placed, 0] = v
            out[placed, 1] = w
        else:
            out[placed, 0] = w
            out[placed, 1] = v
        placed += 1
        if placed == target:
            return placed, t + 1
    return placed, n_draws


@njit(cache=True)
def _kth_neighbour(adj, v, members, lo, hi, u):
    cnt = 0
    for q in range(lo, hi):
        if adj[v, members[q]]:
            cnt += 1
    if cnt == 0:
        return -1
    k = int(u * cnt)
    if k > cnt - 1:
        k = cnt - 1
    for q in range(lo, hi):
        w = members[q]
        if adj[v, w]:
            if k == 0:
                return w
            k -= 1
    return -1


@njit(cache=True)
def _kth_foreign_neighbour(adj, membership, v, u):
    n = adj.shape[0]
    cv = membership[v]
    cnt = 0
    for w in range(n):
        if adj[v, w] and membership[w] != cv:
            cnt += 1
    if cnt == 0:
        return -1
    k = int(u * cnt)
    if k > cnt - 1:
        k = cnt - 1
    for w in range(n):
        if adj[v, w] and membership[w] != cv:
            if k == 0:
                return w
            k -= 1
    return -1


@njit(cache=True)
def _common_in(adj, a, b, members, lo, hi):
    c = 0
    for q in range(lo, hi):
        w = members[q]
        if adj[a, w] and adj[b, w]:
            c += 1
    return c


@njit(cache=True)
def _common_all(adj, a, b):
    c = 0
    for w in range(adj.shape[0]):
        if adj[a, w] and adj[b, w]:
            c += 1
    return c


@njit(cache=True)
def enforce_intra(adj, membership, members, cum, g_start, g_end, g_base, g_weight, eligible,
                  ring_u, ring_v, ring_off, ring_len, ring_head, mu, target, uniforms):
    n_prop = uniforms.shape[0] // 4
    ne = eligible.shape[0]
    if mu >= target or ne == 0:
        return mu, 0
    for t in range(n_prop):
        u0 = uniforms[4 * t]
        idx = int(u0 * ne)
        if idx > ne - 1:
            idx = ne - 1
        c = eligible[idx]
        lo = g_start[c]
        hi = g_end[c]
        v1 = _pick(members, cum, g_start, g_end, g_base, g_weight, c, uniforms[4 * t + 1])
        v2 = _kth_neighbour(adj, v1, members, lo, hi, uniforms[4 * t + 2])
        if v2 < 0:
            continue
        v3 = _kth_neighbour(adj, v2, members, lo, hi, uniforms[4 * t + 3])
        if v3 < 0 or v3 == v1 or adj[v1, v3]:
            continue
        h = ring_head[c]
        pos = ring_off[c] + h
        a = ring_u[pos]
        b = ring_v[pos]
        adj[a, b] = 0
        adj[b, a] = 0
        prev = _common_in(adj, a, b, members, lo, hi)
        new = _common_in(adj, v1, v3, members, lo, hi)
        if prev < new:
            adj[v1, v3] = 1
            adj[v3, v1] = 1
            ring_u[pos] = v1
            ring_v[pos] = v3
            mu += new - prev
        else:
            adj[a, b] = 1
            adj[b, a] = 1
        ring_head[c] = (h + 1) % ring_len[c]
        if mu >= target:
            return mu, t + 1
    return mu, n_prop


@njit(cache=True)
def enforce_inter(adj, membership, members, cum, g_start, g_end, g_base, g_weight, inter_group,
                  ring_u, ring_v, ring_head, mu, target, uniforms):
    n_prop = uniforms.shape[0] // 4
    m = ring_u.shape[0]
    if mu >= target or m == 0:
        return mu, 0
    for t in range(n_prop):
        v1 = _pick(members, cum, g_start, g_end, g_base, g_weight, inter_group, uniforms[4 * t + 1])
        v2 = _kth_foreign_neighbour(adj, membership, v1, uniforms[4 * t + 2])
        if v2 < 0:
            continue
        c2 = membership[v2]
        v3 = _kth_neighbour(adj, v2, members, g_start[c2], g_end[c2], uniforms[4 * t + 3])
        if v3 < 0 or v3 == v1 or adj[v1, v3]:
            continue
        h = ring_head[0]
        a = ring_u[h]
        b = ring_v[h]
        adj[a, b] = 0
        adj[b, a] = 0
        prev = _common_all(adj, a, b)
        new = _common_all(adj, v1, v3)
        if prev < new:
            adj[v1, v3] = 1
            adj[v3, v1] = 1
            ring_u[h] = v1
            ring_v[h] = v3
            mu += new - prev
        else:
            adj[a, b] = 1
            adj[b, a] = 1
        ring_head[0] = (h + 1) % m
        if mu >= target:
            return mu, t + 1
    return mu, n_prop


@njit(cache=True)
def louvain_move(indptr, indices, weights, k, comm, tot, m2, order, max_passes):
    n = indptr.shape[0] - 1
    acc = np.zeros(n, dtype=np.float64)
    seen = np.zeros(n, dtype=np.bool_)
    cand = np.empty(n + 1, dtype=np.int64)
    total_moves = 0
    for _ in range(max_passes):
        moves = 0
        for oi in range(order.shape[0]):
            v = order[oi]
            cv = comm[v]
            nc = 0
            for p in range(indptr[v], indptr[v + 1]):
                j = indices[p]
                if j == v:
                    continue
                c = comm[j]
                if not seen[c]:
                    seen[c] = True
                    cand[nc] = c
                    nc += 1
                acc[c] += weights[p]
            kv = k[v]
            tot[cv] -= kv
            best = cv
            best_gain = acc[cv] - tot[cv] * kv / m2
            for q in range(nc):
                c = cand[q]
                gain = acc[c] - tot[c] * kv / m2
                if gain > best_gain:
                    best_gain = gain
                    best = c
            for q in range(nc):
                c = cand[q]
                acc[c] = 0.0
                seen[c] = False
            tot[best] += kv
            if best != cv:
                comm[v] = best
                moves += 1
        total_moves += moves
        if moves == 0:
            break
    return total_moves
