"""Pure numpy/scipy fallbacks. Results match ``_numba.py`` draw for draw."""

import numpy as np
import scipy.sparse as sp

BUCKET_EPS = 1e-9


def triangle_census(indptr, indices, membership, n_comm):
    n = indptr.shape[0] - 1
    data = np.ones(indices.shape[0], dtype=np.int64)
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    tri_vertex = np.asarray(((A @ A).multiply(A)).sum(axis=1)).ravel() // 2
    rows = np.repeat(np.arange(n), np.diff(indptr))
    same = membership[rows] == membership[indices]
    A_in = sp.csr_matrix((data[same], (rows[same], indices[same])), shape=(n, n))
    per_vertex_in = np.asarray(((A_in @ A_in).multiply(A_in)).sum(axis=1)).ravel() // 2
    tri_comm = np.bincount(membership, weights=per_vertex_in, minlength=n_comm).astype(np.int64) // 3
    tri_intra = int(tri_comm.sum())
    tri_total = int(tri_vertex.sum()) // 3
    return tri_vertex.astype(np.int64), tri_comm, tri_intra, tri_total - tri_intra


def _pick(members, cum, g_start, g_end, g_base, g_weight, g, u):
    x = g_base[g] + u * g_weight[g]
    i = np.searchsorted(cum, x, side="right")
    i = np.clip(i, g_start[g], g_end[g] - 1)
    return members[i]


def _buckets(Xf, norms, v, w, delta, nb):
    nv = norms[v]
    nw = norms[w]
    dot = (Xf[v] * Xf[w]).sum(axis=1)
    denom = nv * nw
    zero = denom == 0.0
    s = np.where(zero, 0.0, dot / np.where(zero, 1.0, denom))
    b = np.floor(s / delta + BUCKET_EPS).astype(np.int64)
    b[zero] = 0
    return np.minimum(b, nb - 1)


def draw_edges(adj, membership, members, cum, g_start, g_end, g_base, g_weight, g_inter,
               block_cum, Xf, norms, delta, gamma, target, uniforms, dedup, out):
    if target <= 0:
        return 0, 0
    nb = gamma.shape[1]
    n_draws = uniforms.shape[0] // 4
    U = uniforms[: 4 * n_draws].reshape(n_draws, 4)
    total = block_cum[-1]
    g = np.minimum(np.searchsorted(block_cum, U[:, 0] * total, side="right"), block_cum.shape[0] - 1)
    v = _pick(members, cum, g_start, g_end, g_base, g_weight, g, U[:, 1])
    w = _pick(members, cum, g_start, g_end, g_base, g_weight, g, U[:, 2])
    ok = v != w
    ok &= ~(g_inter[g] & (membership[v] == membership[w]))
    idx = np.flatnonzero(ok)
    v, w, g, u3 = v[idx], w[idx], g[idx], U[idx, 3]
    if dedup:
        fresh = adj[v, w] == 0
        idx, v, w, g, u3 = idx[fresh], v[fresh], w[fresh], g[fresh], u3[fresh]
    b = _buckets(Xf, norms, v, w, delta, nb)
    acc = u3 <= gamma[g, b]
    idx, v, w = idx[acc], v[acc], w[acc]
    lo = np.minimum(v, w)
    hi = np.maximum(v, w)
    if dedup:
        n = adj.shape[0]
        _, first = np.unique(lo.astype(np.int64) * n + hi, return_index=True)
        first.sort()
        idx, lo, hi = idx[first], lo[first], hi[first]
    placed = min(target, idx.shape[0])
    out[:placed, 0] = lo[:placed]
    out[:placed, 1] = hi[:placed]
    if dedup:
        adj[lo[:placed], hi[:placed]] = 1
        adj[hi[:placed], lo[:placed]] = 1
    used = int(idx[placed - 1]) + 1 if placed == target else n_draws
    return placed, used


def _kth(row_mask, pool, u):
    nz = np.flatnonzero(row_mask)
    cnt = nz.shape[0]
    if cnt == 0:
        return -1
    k = min(int(u * cnt), cnt - 1)
    return int(pool[nz[k]])


def enforce_intra(adj, membership, members, cum, g_start, g_end, g_base, g_weight, eligible,
                  ring_u, ring_v, ring_off, ring_len, ring_head, mu, target, uniforms):
    n_prop = uniforms.shape[0] // 4
    ne = eligible.shape[0]
    if mu >= target or ne == 0:
        return mu, 0
    for t in range(n_prop):
        u0, u1, u2, u3 = uniforms[4 * t: 4 * t + 4]
        c = eligible[min(int(u0 * ne), ne - 1)]
        pool = members[g_start[c]:g_end[c]]
        v1 = int(_pick(members, cum, g_start, g_end, g_base, g_weight, c, u1))
        v2 = _kth(adj[v1, pool], pool, u2)
        if v2 < 0:
            continue
        v3 = _kth(adj[v2, pool], pool, u3)
        if v3 < 0 or v3 == v1 or adj[v1, v3]:
            continue
        h = ring_head[c]
        pos = ring_off[c] + h
        a, b = ring_u[pos], ring_v[pos]
        adj[a, b] = adj[b, a] = 0
        prev = np.count_nonzero(adj[a, pool] & adj[b, pool])
        new = np.count_nonzero(adj[v1, pool] & adj[v3, pool])
        if prev < new:
            adj[v1, v3] = adj[v3, v1] = 1
            ring_u[pos], ring_v[pos] = v1, v3
            mu += new - prev
        else:
            adj[a, b] = adj[b, a] = 1
        ring_head[c] = (h + 1) % ring_len[c]
        if mu >= target:
            return mu, t + 1
    return mu, n_prop


def enforce_inter(adj, membership, members, cum, g_start, g_end, g_base, g_weight, inter_group,
                  ring_u, ring_v, ring_head, mu, target, uniforms):
    n_prop = uniforms.shape[0] // 4
    m = ring_u.shape[0]
    if mu >= target or m == 0:
        return mu, 0
    everyone = np.arange(adj.shape[0])
    for t in range(n_prop):
        _, u1, u2, u3 = uniforms[4 * t: 4 * t + 4]
        v1 = int(_pick(members, cum, g_start, g_end, g_base, g_weight, inter_group, u1))
        v2 = _kth((adj[v1] != 0) & (membership != membership[v1]), everyone, u2)
        if v2 < 0:
            continue
        c2 = membership[v2]
        pool = members[g_start[c2]:g_end[c2]]
        v3 = _kth(adj[v2, pool], pool, u3)
        if v3 < 0 or v3 == v1 or adj[v1, v3]:
            continue
        h = ring_head[0]
        a, b = ring_u[h], ring_v[h]
        adj[a, b] = adj[b, a] = 0
        prev = np.count_nonzero(adj[a] & adj[b])
        new = np.count_nonzero(adj[v1] & adj[v3])
        if prev < new:
            adj[v1, v3] = adj[v3, v1] = 1
            ring_u[h], ring_v[h] = v1, v3
            mu += new - prev
        else:
            adj[a, b] = adj[b, a] = 1
        ring_head[0] = (h + 1) % m
        if mu >= target:
            return mu, t + 1
    return mu, n_prop


def louvain_move(indptr, indices, weights, k, comm, tot, m2, order, max_passes):
    total_moves = 0
    for _ in range(max_passes):
        moves = 0
        for v in order:
            s, e = indptr[v], indptr[v + 1]
            nb = indices[s:e]
            wt = weights[s:e]
            keep = nb != v
            nc = comm[nb[keep]]
            cv = comm[v]
            kv = k[v]
            tot[cv] -= kv
            acc_cv = wt[keep][nc == cv].sum() if nc.size else 0.0
            best, best_gain = cv, acc_cv - tot[cv] * kv / m2
            if nc.size:
                uniq, first, inv = np.unique(nc, return_index=True, return_inverse=True)
                sums = np.bincount(inv, weights=wt[keep], minlength=uniq.shape[0])
                order_first = np.argsort(first, kind="stable")
                cands = uniq[order_first]
                gains = sums[order_first] - tot[cands] * kv / m2
                i = int(np.argmax(gains))
                if gains[i] > best_gain:
                    best = int(cands[i])
            tot[best] += kv
            if best != cv:
                comm[v] = best
                moves += 1
        total_moves += moves
        if moves == 0:
            break
    return total_moves
