"""Differential-privacy building blocks.

Laplace noise, exponential-mechanism selection, and ladder-function release of
triangle counts driven by local sensitivity at distance ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


def _check_eps(eps, name="eps"):
    if not eps > 0:
        raise ValueError(f"{name} must be positive, got {eps}")


def laplace_noise(value, sensitivity, eps, rng):
    """Return ``value + Lap(sensitivity / eps)`` (elementwise for arrays)."""
    _check_eps(eps)
    if not sensitivity > 0:
        raise ValueError(f"sensitivity must be positive, got {sensitivity}")
    value = np.asarray(value, dtype=np.float64)
    noisy = value + rng.laplace(0.0, sensitivity / eps, size=value.shape)
    return float(noisy) if noisy.ndim == 0 else noisy


def exponential_probabilities(scores, delta_u, eps):
    if delta_u <= 0:
        raise ValueError("delta_u must be positive")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("no candidates to select from")
    logits = eps * scores / (2.0 * delta_u)
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def exponential_select(candidates, scores, delta_u, eps, rng):
    """Pick one candidate with probability proportional to ``exp(eps*u/(2*delta_u))``."""
    if len(candidates) == 0:
        raise ValueError("no candidates to select from")
    if len(candidates) != len(scores):
        raise ValueError("candidates and scores differ in length")
    p = exponential_probabilities(scores, delta_u, eps)
    return candidates[int(rng.choice(len(candidates), p=p))]


@dataclass
class LadderSpec:
    """A count together with its ladder ``t -> LS(G, t)`` for ``t = 0..len-1``.

    The last ladder entry must equal ``ceiling``; the ladder is taken to stay at
    the ceiling for every larger ``t``.
    """

    true_count: int
    ladder: np.ndarray
    ceiling: int

    def validate(self):
        lad = np.asarray(self.ladder)
        if lad.ndim != 1 or lad.size == 0:
            raise ValueError("ladder must be a non-empty sequence")
        if np.any(lad < 0) or np.any(np.diff(lad) < 0):
            raise ValueError("ladder must be non-negative and non-decreasing")
        if lad.max() > self.ceiling or lad[-1] != self.ceiling:
            raise ValueError("ladder must end at, and never exceed, its ceiling")
        if self.true_count < 0:
            raise ValueError("true_count must be non-negative")


def rung_log_weights(spec, eps):
    """Log selection weights of rungs ``0..len(ladder)`` and of the geometric tail.

    Rung 0 is ``{true_count}``; rung ``r >= 1`` holds the ``2 * ladder[r-1]``
    integers whose distance from the true count lies in
    ``(sum(ladder[:r-1]), sum(ladder[:r])]``. Each integer in rung ``r`` scores
    ``-r`` with unit sensitivity.
    """
    lad = np.asarray(spec.ladder, dtype=np.float64)
    r = np.arange(1, lad.size + 1)
    with np.errstate(divide="ignore"):
        logw = np.concatenate([[0.0], np.log(2.0 * lad) - eps * r / 2.0])
        if spec.ceiling > 0:
            first = lad.size + 1
            tail = math.log(2.0 * spec.ceiling) - eps * first / 2.0 - math.log(-math.expm1(-eps / 2.0))
        else:
            tail = -math.inf
    return logw, tail


def ladder_count(spec, eps, rng):
    """Release ``spec.true_count`` through the ladder mechanism; result clamped at 0."""
    _check_eps(eps)
    spec.validate()
    if spec.ceiling == 0:
        return int(spec.true_count)
    lad = np.asarray(spec.ladder, dtype=np.int64)
    logw, tail = rung_log_weights(spec, eps)
    allw = np.append(logw, tail)
    allw = np.exp(allw - allw.max())
    choice = int(rng.choice(allw.size, p=allw / allw.sum()))
    if choice == 0:
        return int(spec.true_count)
    bounds = np.concatenate([[0], np.cumsum(lad)])
    if choice < allw.size - 1:
        lo, width = int(bounds[choice - 1]), int(lad[choice - 1])
    else:
        extra = int(rng.geometric(-math.expm1(-eps / 2.0))) - 1
        lo, width = int(bounds[-1]) + extra * spec.ceiling, int(spec.ceiling)
    dist = lo + 1 + int(rng.integers(width))
    sign = 1 if rng.random() < 0.5 else -1
    return max(0, int(spec.true_count) + sign * dist)


def _pair_profiles(A_in, groups, cap_of_group):
    """Collapse all same-group vertex pairs to ``(a, b, cap)`` profiles.

    ``a`` counts common neighbours inside the group, ``b`` the group vertices
    (other than the pair itself) adjacent to exactly one of the two. For a
    fixed ``(cap, a)`` only the largest ``b`` matters, so one row is kept per
    such key.
    """
    rows = []
    for members, cap in zip(groups, cap_of_group):
        if members.size < 2:
            continue
        sub = A_in[members][:, members]
        dense = sub.toarray().astype(np.int64)
        cn = (sub @ sub).toarray().astype(np.int64)
        deg = dense.sum(axis=1)
        iu, ju = np.triu_indices(members.size, k=1)
        a = cn[iu, ju]
        b = deg[iu] + deg[ju] - 2 * a - 2 * dense[iu, ju]
        order = np.lexsort((-b, a))
        a, b = a[order], b[order]
        keep = np.concatenate([[True], a[1:] != a[:-1]])
        rows.append(np.column_stack([a[keep], b[keep], np.full(keep.sum(), cap)]))
    if not rows:
        return np.zeros((0, 3), dtype=np.int64)
    return np.vstack(rows).astype(np.int64)


def _ls_from_profiles(profiles, t):
    if profiles.shape[0] == 0:
        return 0
    a, b, cap = profiles.T
    vals = np.minimum(a + (t + np.minimum(t, b)) // 2, cap)
    return int(max(vals.max(), 0))


def _ladder_from_profiles(profiles, ceiling):
    if ceiling <= 0 or profiles.shape[0] == 0:
        return np.zeros(1, dtype=np.int64)
    out = []
    t = 0
    while True:
        v = _ls_from_profiles(profiles, t)
        out.append(v)
        if v >= ceiling:
            break
        t += 1
    return np.array(out, dtype=np.int64)


def _intra_setup(G, P):
    memb = P.membership
    u, v = G.edges[:, 0], G.edges[:, 1]
    same = memb[u] == memb[v]
    rows = np.concatenate([u[same], v[same]])
    cols = np.concatenate([v[same], u[same]])
    A_in = sp.csr_matrix((np.ones(rows.size, dtype=np.int64), (rows, cols)), shape=(G.n, G.n))
    groups = P.communities
    caps = [c.size - 2 for c in groups]
    return A_in, groups, caps


def intra_triangle_ceiling(P):
    """Global sensitivity of the intra-community triangle count: ``max |C| - 2``."""
    return max(0, int(P.sizes.max()) - 2)


def ls_intra_triangles_at_t(G, P, t):
    """Local sensitivity at distance ``t`` of the intra-community triangle count."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return _ls_from_profiles(_pair_profiles(*_intra_setup(G, P)), t)


def ls_total_triangles_at_t(G, t):
    """Local sensitivity at distance ``t`` of the whole-graph triangle count."""
    if t < 1:
        raise ValueError("t must be >= 1")
    groups = [np.arange(G.n)]
    return _ls_from_profiles(_pair_profiles(G.csr, groups, [G.n - 2]), t)


def intra_triangle_ladder(G, P, true_count):
    A_in, groups, caps = _intra_setup(G, P)
    ceiling = intra_triangle_ceiling(P)
    ladder = _ladder_from_profiles(_pair_profiles(A_in, groups, caps), ceiling)
    if ladder[-1] != ceiling:
        ladder = np.append(ladder, ceiling)
    return LadderSpec(int(true_count), ladder, ceiling)


def total_triangle_ladder(G, true_count):
    ceiling = max(0, G.n - 2)
    profiles = _pair_profiles(G.csr, [np.arange(G.n)], [G.n - 2])
    ladder = _ladder_from_profiles(profiles, ceiling)
    if ladder[-1] != ceiling:
        ladder = np.append(ladder, ceiling)
    return LadderSpec(int(true_count), ladder, ceiling)
