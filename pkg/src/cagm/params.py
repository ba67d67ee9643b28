"""Estimating the C-AGM parameters from a graph and a partition.

Exact estimators and their differentially private counterparts, degree-sequence
post-processing, budget splitting and (de)serialisation of fitted parameters.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import isotonic_regression

from . import mechanisms
from .community import ObjectiveConfig, SearchConfig, build_auxiliary_graph, dp_partition
from .graph import CommunityPartition, edge_buckets, n_buckets, structural_census

log = logging.getLogger(__name__)

FORMAT_NAME = "cagm-params"
FORMAT_VERSION = 1
DEFAULT_DELTA = 0.25
DEFAULT_DEGREE_CAP = 100


@dataclass
class PrivacyBudget:
    """Exact rational split of a total budget into the six per-query shares."""

    eps_total: Fraction
    eps_c: Fraction
    eps_F: Fraction
    eps_d: Fraction
    eps_tri: Fraction
    eps_tri_intra: Fraction
    eps_X: Fraction

    SHARE_NAMES = ("eps_c", "eps_F", "eps_d", "eps_tri", "eps_tri_intra", "eps_X")

    def shares(self):
        return {name: getattr(self, name) for name in self.SHARE_NAMES}

    def total_of_shares(self):
        return sum(self.shares().values(), Fraction(0))


def split_budget(eps_total):
    """Half to the partition, a sixth to correlations, a twelfth to each of the rest."""
    if not eps_total > 0:
        raise ValueError(f"privacy budget must be positive, got {eps_total}")
    eps = Fraction(eps_total)
    twelfth = eps / 12
    budget = PrivacyBudget(eps, eps / 2, eps / 6, twelfth, twelfth, twelfth, twelfth)
    assert budget.total_of_shares() == eps
    return budget


@dataclass
class BudgetLedger:
    entries: list = field(default_factory=list)

    def spend(self, name, eps):
        self.entries.append((name, Fraction(eps)))

    @property
    def total(self):
        return sum((e for _, e in self.entries), Fraction(0))

    def to_rows(self):
        return [{"query": name, "eps": float(e), "exact": str(e)} for name, e in self.entries]


@dataclass
class ThetaM:
    d_intra: np.ndarray
    d_inter: np.ndarray
    tri_intra: int
    tri_inter: int

    def m_intra(self, P):
        return np.bincount(P.membership, weights=self.d_intra, minlength=P.n_communities).astype(np.int64) // 2

    @property
    def m_inter(self):
        return int(self.d_inter.sum()) // 2

    def edge_target(self, P):
        return int(self.m_intra(P).sum()) + self.m_inter


@dataclass
class ThetaX:
    probs: np.ndarray  # (n_communities, k): Pr(attribute = 1 | community)


@dataclass
class ThetaF:
    delta: float
    intra: np.ndarray  # (n_communities, |B|)
    inter: np.ndarray  # (|B|,)
    degree_cap: int | None = None


@dataclass
class CAGMParams:
    n: int
    partition: CommunityPartition
    theta_m: ThetaM
    theta_x: ThetaX
    theta_f: ThetaF
    private: bool = False
    budget: PrivacyBudget | None = None
    ledger: BudgetLedger | None = None
    meta: dict = field(default_factory=dict)

    @property
    def k(self):
        return self.theta_x.probs.shape[1]

    def to_dict(self):
        d = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "n": self.n,
            "k": self.k,
            "private": self.private,
            "membership": self.partition.membership.tolist(),
            "n_communities": self.partition.n_communities,
            "theta_m": {
                "d_intra": self.theta_m.d_intra.tolist(),
                "d_inter": self.theta_m.d_inter.tolist(),
                "tri_intra": int(self.theta_m.tri_intra),
                "tri_inter": int(self.theta_m.tri_inter),
            },
            "theta_x": {"probs": self.theta_x.probs.tolist()},
            "theta_f": {
                "delta": self.theta_f.delta,
                "intra": self.theta_f.intra.tolist(),
                "inter": self.theta_f.inter.tolist(),
                "degree_cap": self.theta_f.degree_cap,
            },
            "meta": self.meta,
        }
        if self.budget is not None:
            d["budget"] = {"eps_total": float(self.budget.eps_total), **{
                k: {"eps": float(v), "exact": str(v)} for k, v in self.budget.shares().items()}}
        if self.ledger is not None:
            d["ledger"] = self.ledger.to_rows()
        return d

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT_NAME:
            raise ValueError("not a C-AGM parameter file")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported parameter file version {d.get('version')}")
        P = CommunityPartition(d["membership"], d["n_communities"])
        tm, tx, tf = d["theta_m"], d["theta_x"], d["theta_f"]
        k = d["k"]
        budget = ledger = None
        if "budget" in d:
            b = d["budget"]
            budget = PrivacyBudget(Fraction(b["eps_total"]), *(Fraction(b[name]["exact"]) for name in PrivacyBudget.SHARE_NAMES))
        if "ledger" in d:
            ledger = BudgetLedger([(row["query"], Fraction(row["exact"])) for row in d["ledger"]])
        return cls(
            n=d["n"],
            partition=P,
            theta_m=ThetaM(np.array(tm["d_intra"], dtype=np.int64), np.array(tm["d_inter"], dtype=np.int64),
                           tm["tri_intra"], tm["tri_inter"]),
            theta_x=ThetaX(np.array(tx["probs"], dtype=np.float64).reshape(-1, k)),
            theta_f=ThetaF(tf["delta"], np.array(tf["intra"], dtype=np.float64), np.array(tf["inter"], dtype=np.float64),
                           tf["degree_cap"]),
            private=d["private"],
            budget=budget,
            ledger=ledger,
            meta=d.get("meta", {}),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# --- Theta_X -----------------------------------------------------------------

def _attribute_counts(G, P):
    counts = np.zeros((P.n_communities, G.k), dtype=np.float64)
    np.add.at(counts, P.membership, G.X.astype(np.float64))
    return counts


def _probs_from_counts(counts, sizes):
    sizes = sizes.astype(np.float64)[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(sizes > 0, counts / np.where(sizes > 0, sizes, 1.0), 0.0)
    return np.clip(probs, 0.0, 1.0)


def estimate_theta_x(G, P):
    return ThetaX(_probs_from_counts(_attribute_counts(G, P), P.sizes))


def dp_estimate_theta_x(G, P, eps_X, rng):
    """Per-community attribute counts with ``Lap(k / eps_X)`` noise, clamped to ``[0, |C|]``."""
    if not eps_X > 0:
        raise ValueError("eps_X must be positive")
    counts = _attribute_counts(G, P)
    if G.k:
        counts = mechanisms.laplace_noise(counts, G.k, eps_X, rng)
    counts = np.clip(counts, 0.0, P.sizes[:, None].astype(np.float64))
    return ThetaX(_probs_from_counts(counts, P.sizes))


# --- Theta_F -----------------------------------------------------------------

def _bucket_counts(G, P, delta):
    nb = n_buckets(delta)
    memb = P.membership
    u, v = G.edges[:, 0], G.edges[:, 1]
    b = edge_buckets(G.X, G.edges, delta)
    same = memb[u] == memb[v]
    intra = np.zeros((P.n_communities, nb))
    np.add.at(intra, (memb[u[same]], b[same]), 1.0)
    inter = np.bincount(b[~same], minlength=nb).astype(np.float64)
    return intra, inter


def _normalise_rows(counts):
    counts = np.clip(np.atleast_2d(counts), 0.0, None)
    totals = counts.sum(axis=1, keepdims=True)
    uniform = np.full_like(counts, 1.0 / counts.shape[1])
    return np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), uniform)


def estimate_theta_f(G, P, delta=DEFAULT_DELTA):
    intra, inter = _bucket_counts(G, P, delta)
    return ThetaF(delta, _normalise_rows(intra), _normalise_rows(inter)[0])


def truncate_degrees(G, p):
    """Drop edges until every degree is at most ``p``.

    Vertices are visited from the highest id down; an over-full vertex sheds the
    edge whose other endpoint currently has the largest degree (larger id on ties).
    """
    if p < 1:
        raise ValueError("degree cap must be >= 1")
    if G.m == 0 or G.degrees.max() <= p:
        return G
    nbrs = [set(G.neighbours(v).tolist()) for v in range(G.n)]
    deg = G.degrees.copy()
    for v in range(G.n - 1, -1, -1):
        while deg[v] > p:
            w = max(nbrs[v], key=lambda x: (deg[x], x))
            nbrs[v].discard(w)
            nbrs[w].discard(v)
            deg[v] -= 1
            deg[w] -= 1
    edges = [(v, w) for v in range(G.n) for w in nbrs[v] if v < w]
    return G.with_edges(np.array(edges, dtype=np.int64).reshape(-1, 2))


def dp_estimate_theta_f(G, P, delta, p, eps_F, rng):
    """Bucket counts on the degree-truncated graph with ``Lap(2p / eps_F)`` noise, rounded and clamped at 0."""
    if not eps_F > 0:
        raise ValueError("eps_F must be positive")
    Gt = truncate_degrees(G, p)
    intra, inter = _bucket_counts(Gt, P, delta)
    # counts are integers, so rounding is free post-processing
    intra = np.rint(mechanisms.laplace_noise(intra, 2.0 * p, eps_F, rng))
    inter = np.rint(mechanisms.laplace_noise(inter, 2.0 * p, eps_F, rng))
    return ThetaF(delta, _normalise_rows(intra), _normalise_rows(inter)[0], degree_cap=int(p))


# --- degree sequences --------------------------------------------------------

def is_graphical(seq):
    """Erdős–Gallai test (including even sum) for a simple-graph degree sequence."""
    d = np.sort(np.asarray(seq, dtype=np.int64))[::-1]
    if d.size == 0:
        return True
    if d[-1] < 0 or d.sum() % 2:
        return False
    n = d.size
    prefix = np.concatenate([[0], np.cumsum(d)])
    k = np.arange(1, n + 1)
    asc = d[::-1]
    at_least_k = n - np.searchsorted(asc, k, side="left")
    split = np.maximum(k, at_least_k)
    rhs = k * (k - 1) + k * np.maximum(0, at_least_k - k) + (prefix[-1] - prefix[split])
    return bool(np.all(prefix[1:] <= rhs))


def make_graphical(seq, cap):
    """Round, clip to ``[0, cap]``, fix parity, then shave the largest entries until graphical.

    Order is preserved for non-decreasing input: increments go to the rightmost
    entry with the most slack, decrements to the leftmost maximal entries.
    """
    cap = np.broadcast_to(np.asarray(cap, dtype=np.int64), np.shape(seq))
    d = np.clip(np.rint(np.asarray(seq, dtype=np.float64)), 0, cap).astype(np.int64)
    if d.size == 0:
        return d
    if d.sum() % 2:
        slack = cap - d
        if slack.max() > 0:
            i = d.size - 1 - int(np.argmax(slack[::-1]))
            d[i] += 1
        else:
            d[int(np.argmax(d))] -= 1
    while not is_graphical(d):
        for _ in range(2):
            i = int(np.argmax(d))
            d[i] -= 1
    return d


def isotonic(values):
    """L2-closest non-decreasing sequence (pool-adjacent-violators)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values
    return isotonic_regression(values, increasing=True).x


def dp_degree_sequences(G, P, eps_d, rng, census=None):
    """Private per-vertex intra- and inter-community degrees.

    Each community's sorted intra-degree sequence and the per-vertex inter-degree
    vector receive ``Lap(2 / eps_d)`` noise. Intra sequences are made monotone and
    graphical inside their community and the inter vector graphical overall.
    Sorted intra values are then handed to the community's vertices in order of
    their released inter degree, which is post-processing only.
    """
    if not eps_d > 0:
        raise ValueError("eps_d must be positive")
    census = census or structural_census(G, P)
    memb = P.membership
    d_inter_noisy = mechanisms.laplace_noise(census.d_inter.astype(float), 2.0, eps_d, rng)
    d_inter = make_graphical(d_inter_noisy, G.n - P.sizes[memb])
    d_intra = np.zeros(G.n, dtype=np.int64)
    for members in P.communities:
        if members.size == 0:
            continue
        exact = np.sort(census.d_intra[members])
        noisy = mechanisms.laplace_noise(exact.astype(float), 2.0, eps_d, rng)
        seq = make_graphical(isotonic(noisy), members.size - 1)
        order = members[np.lexsort((members, d_inter[members]))]
        d_intra[order] = seq
    return d_intra, d_inter


# --- triangles ---------------------------------------------------------------

def dp_triangle_counts(G, P, eps_tri, eps_tri_intra, rng, census=None):
    """Ladder releases of the intra and total triangle counts; inter = max(0, total - intra)."""
    if not (eps_tri > 0 and eps_tri_intra > 0):
        raise ValueError("triangle budgets must be positive")
    census = census or structural_census(G, P)
    intra_spec = mechanisms.intra_triangle_ladder(G, P, census.tri_intra)
    total_spec = mechanisms.total_triangle_ladder(G, census.tri_total)
    tri_intra = mechanisms.ladder_count(intra_spec, eps_tri_intra, rng)
    tri_total = mechanisms.ladder_count(total_spec, eps_tri, rng)
    return tri_intra, max(0, tri_total - tri_intra)


# --- full fits ---------------------------------------------------------------

def estimate_theta_m(G, P, census=None):
    census = census or structural_census(G, P)
    return ThetaM(census.d_intra.copy(), census.d_inter.copy(), census.tri_intra, census.tri_inter)


def fit(G, P, delta=DEFAULT_DELTA):
    """Exact C-AGM parameters for graph ``G`` under partition ``P``."""
    census = structural_census(G, P)
    return CAGMParams(
        n=G.n,
        partition=P,
        theta_m=estimate_theta_m(G, P, census),
        theta_x=estimate_theta_x(G, P),
        theta_f=estimate_theta_f(G, P, delta),
        meta={"edges": G.m, "triangles": census.tri_total},
    )


def dp_fit(G, eps_total, delta=DEFAULT_DELTA, degree_cap=DEFAULT_DEGREE_CAP, w_s=0.98,
           search=None, rng=None):
    """Differentially private C-AGM parameters; the ledger spends exactly ``eps_total``."""
    rng = rng if rng is not None else np.random.default_rng()
    budget = split_budget(eps_total)
    ledger = BudgetLedger()
    cfg = ObjectiveConfig.for_graph(G, w_s)
    search = search or SearchConfig()
    G_aux = build_auxiliary_graph(G) if cfg.w_a > 0 else None

    P = dp_partition(G, float(budget.eps_c), cfg, search, rng, G_aux=G_aux)
    ledger.spend("community_partition", budget.eps_c)
    theta_x = dp_estimate_theta_x(G, P, float(budget.eps_X), rng)
    ledger.spend("theta_x", budget.eps_X)
    theta_f = dp_estimate_theta_f(G, P, delta, degree_cap, float(budget.eps_F), rng)
    ledger.spend("theta_f", budget.eps_F)
    census = structural_census(G, P)
    d_intra, d_inter = dp_degree_sequences(G, P, float(budget.eps_d), rng, census)
    ledger.spend("degree_sequences", budget.eps_d)
    tri_intra, tri_inter = dp_triangle_counts(G, P, float(budget.eps_tri), float(budget.eps_tri_intra), rng, census)
    ledger.spend("triangles_total", budget.eps_tri)
    ledger.spend("triangles_intra", budget.eps_tri_intra)

    if ledger.total != budget.eps_total:
        raise AssertionError(f"ledger spends {ledger.total}, budget is {budget.eps_total}")
    return CAGMParams(
        n=G.n,
        partition=P,
        theta_m=ThetaM(d_intra, d_inter, tri_intra, tri_inter),
        theta_x=theta_x,
        theta_f=theta_f,
        private=True,
        budget=budget,
        ledger=ledger,
        meta={"w_s": w_s, "rounds": search.rounds, "fanout": search.fanout,
              "sensitivity_bound": cfg.sensitivity_bound},
    )
