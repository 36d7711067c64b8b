"""Spanning tree samplers and exact small-graph laws.

Random-walk samplers (Wilson, Aldous-Broder) use the non-lazy kernel, which
leaves the tree law unchanged; the lazy kernel is exposed separately for
mixing diagnostics.  For extreme disorder strengths, where walk-based
sampling stalls in deep conductance basins, ``gibbs_sequential_sample``
draws exact samples edge by edge through the spatial Markov property with
per-step weight recentering, and ``gap_restricted_view`` shrinks a graph to
the edges a tree can plausibly use, with an explicit total-variation error
bound for everything thrown away.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .electric import conditioned_view, kirchhoff_edge_probability
from .environment import ENV_STREAM, Environment, Uniform01, WeightedGraphView
from .graph import (GraphError, MultiGraph, SpanningTree, contract_edges,
                    delete_edges_mapped)
from .rng import RngStream, as_supply, keyed_uniforms

DEFAULT_STEP_CAP = 10 ** 9


class NonterminationSuspected(RuntimeError):
    """A walk exceeded its step cap.

    For very large beta prefer gibbs_sequential_sample, possibly after a
    gap_restricted_view reduction.
    """


class TooLargeError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# random walks and loop erasure
# --------------------------------------------------------------------------

def _walk_tables(wg: WeightedGraphView):
    """Per-vertex cumulative conductances for neighbor sampling."""
    w, _ = wg.scaled_weights()
    g = wg.graph
    cums, eids, others, totals = [], [], [], []
    for v in range(g.n):
        acc, cum, es, os = 0.0, [], [], []
        for eid, y in g.adj[v]:
            acc += float(w[eid])
            cum.append(acc)
            es.append(eid)
            os.append(y)
        cums.append(cum)
        eids.append(es)
        others.append(os)
        totals.append(acc)
    return cums, eids, others, totals


def lazy_random_walk(wg: WeightedGraphView, start: int, stop, stream,
                     step_cap: int = DEFAULT_STEP_CAP):
    """Lazy walk (hold 1/2, else move with probability proportional to the
    edge conductance), run until the stop predicate is true.

    Returns the visited vertex sequence including holds.
    """
    cums, _, others, totals = _walk_tables(wg)
    supply = as_supply(stream)
    path = [start]
    v = start
    steps = 0
    while not stop(v, path):
        if steps >= step_cap:
            raise NonterminationSuspected(f"lazy walk exceeded {step_cap} steps")
        steps += 1
        if supply.u() < 0.5:
            path.append(v)
            continue
        tot = totals[v]
        if tot <= 0.0:
            raise NonterminationSuspected("walk reached a conductance sink")
        idx = bisect_right(cums[v], supply.u() * tot)
        idx = min(idx, len(cums[v]) - 1)
        v = others[v][idx]
        path.append(v)
    return path


def loop_erase(path):
    """Chronological loop erasure.

    Follows the forward largest-index rule: repeatedly jump to the last
    occurrence of the current vertex and step from there.  The output is
    self-avoiding and keeps the endpoints.
    """
    if not path:
        raise ValueError("path must be nonempty")
    last = {}
    for i, v in enumerate(path):
        last[v] = i
    out = []
    i = 0
    while True:
        v = path[i]
        out.append(v)
        i = last[v]
        if i == len(path) - 1:
            break
        i += 1
    return out


class TreeSampler:
    """Reusable walk-based samplers bound to one weighted graph."""

    def __init__(self, wg: WeightedGraphView):
        self.wg = wg
        self.g = wg.graph
        if not self.g.is_connected():
            raise GraphError("graph must be connected")
        self._cums, self._eids, self._others, self._totals = _walk_tables(wg)
        if self.g.n > 1 and min(self._totals) <= 0.0:
            raise NonterminationSuspected(
                "a vertex has no representable conductance; use "
                "gibbs_sequential_sample for this disorder strength")

    def wilson_edges(self, stream, root: int = 0, order=None,
                     step_cap: int = DEFAULT_STEP_CAP) -> tuple:
        """Sorted edge-id tuple of one Wilson sample (hot path, unvalidated)."""
        g = self.g
        supply = as_supply(stream)
        u = supply.u
        in_tree = bytearray(g.n)
        in_tree[root] = 1
        nxt_edge = [-1] * g.n
        nxt_vert = [-1] * g.n
        cums, eids, others, totals = (self._cums, self._eids, self._others,
                                      self._totals)
        steps = 0
        edges = []
        for start in (order if order is not None else range(g.n)):
            v = start
            while not in_tree[v]:
                if steps >= step_cap:
                    raise NonterminationSuspected(
                        f"wilson walk exceeded {step_cap} steps")
                steps += 1
                cv = cums[v]
                idx = bisect_right(cv, u() * totals[v])
                if idx >= len(cv):
                    idx = len(cv) - 1
                nxt_edge[v] = eids[v][idx]
                w = others[v][idx]
                nxt_vert[v] = w
                v = w
            v = start
            while not in_tree[v]:
                in_tree[v] = 1
                edges.append(nxt_edge[v])
                v = nxt_vert[v]
        edges.sort()
        return tuple(edges)

    def wilson(self, stream, root: int = 0, order=None,
               step_cap: int = DEFAULT_STEP_CAP) -> SpanningTree:
        return SpanningTree(self.g, self.wilson_edges(
            stream, root=root, order=order, step_cap=step_cap))

    def aldous_broder_edges(self, stream, start: int = 0,
                            step_cap: int = DEFAULT_STEP_CAP) -> tuple:
        """Sorted edge-id tuple of one Aldous-Broder sample (hot path)."""
        g = self.g
        supply = as_supply(stream)
        u = supply.u
        seen = bytearray(g.n)
        seen[start] = 1
        remaining = g.n - 1
        cums, eids, others, totals = (self._cums, self._eids, self._others,
                                      self._totals)
        v = start
        steps = 0
        edges = []
        while remaining > 0:
            if steps >= step_cap:
                raise NonterminationSuspected(
                    f"aldous-broder walk exceeded {step_cap} steps")
            steps += 1
            cv = cums[v]
            idx = bisect_right(cv, u() * totals[v])
            if idx >= len(cv):
                idx = len(cv) - 1
            y = others[v][idx]
            if not seen[y]:
                seen[y] = 1
                remaining -= 1
                edges.append(eids[v][idx])
            v = y
        edges.sort()
        return tuple(edges)

    def aldous_broder(self, stream, start: int = 0,
                      step_cap: int = DEFAULT_STEP_CAP) -> SpanningTree:
        return SpanningTree(self.g, self.aldous_broder_edges(
            stream, start=start, step_cap=step_cap))


def wilson_sample(wg, stream, root: int = 0, order=None,
                  step_cap: int = DEFAULT_STEP_CAP) -> SpanningTree:
    """One weighted spanning tree via loop-erased walks."""
    return TreeSampler(wg).wilson(stream, root=root, order=order, step_cap=step_cap)


def aldous_broder_sample(wg, stream, start: int = 0,
                         step_cap: int = DEFAULT_STEP_CAP) -> SpanningTree:
    """One weighted spanning tree via first-entry edges of a covering walk."""
    return TreeSampler(wg).aldous_broder(stream, start=start, step_cap=step_cap)


# --------------------------------------------------------------------------
# minimum spanning trees
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimumForest:
    """Kruskal/Prim output: a spanning tree, or a forest when disconnected."""

    graph: MultiGraph
    edges: tuple
    connected: bool
    ties_perturbed: bool

    @property
    def tree(self) -> SpanningTree:
        if not self.connected:
            raise GraphError("graph was disconnected; result is a forest")
        return SpanningTree(self.graph, self.edges)

    def total_weight(self, omega) -> float:
        return float(sum(omega[e] for e in self.edges))


def kruskal_mst(g: MultiGraph, env: Environment) -> MinimumForest:
    """Minimum spanning tree for the disorder values, smallest edges first.

    Equal disorder values are broken deterministically by edge id and the
    result is flagged, since the tie-free tree is only unique for atomless
    laws.
    """
    order = sorted(range(g.m), key=lambda e: (env.omega[e], e))
    ties = any(env.omega[order[i]] == env.omega[order[i + 1]]
               for i in range(len(order) - 1))
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    for eid in order:
        u, v = g.endpoints[eid]
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            chosen.append(eid)
            if len(chosen) == g.n - 1:
                break
    return MinimumForest(g, tuple(sorted(chosen)), len(chosen) == g.n - 1, ties)


def prim_mst(g: MultiGraph, env: Environment, start: int = 0) -> MinimumForest:
    """Prim's variant; identical output to Kruskal for distinct weights."""
    visited = bytearray(g.n)
    chosen = []
    ties = len(set(env.omega.tolist())) != g.m
    heap = []
    components = 0
    seed = start
    while True:
        visited[seed] = 1
        components += 1
        for eid, y in g.adj[seed]:
            heapq.heappush(heap, (env.omega[eid], eid, y))
        while heap:
            _, eid, y = heapq.heappop(heap)
            if visited[y]:
                continue
            visited[y] = 1
            chosen.append(eid)
            for eid2, z in g.adj[y]:
                if not visited[z]:
                    heapq.heappush(heap, (env.omega[eid2], eid2, z))
        try:
            seed = next(v for v in range(g.n) if not visited[v])
        except StopIteration:
            break
    return MinimumForest(g, tuple(sorted(chosen)), components == 1, ties)


# --------------------------------------------------------------------------
# exact laws
# --------------------------------------------------------------------------

def matrix_tree_count(g: MultiGraph) -> int:
    """Number of spanning trees (any cofactor of the Laplacian)."""
    if g.n <= 1:
        return 1 if g.n == 1 else 0
    L = np.zeros((g.n, g.n))
    for (u, v) in g.endpoints:
        L[u, u] += 1
        L[v, v] += 1
        L[u, v] -= 1
        L[v, u] -= 1
    sign, logdet = np.linalg.slogdet(L[1:, 1:])
    if sign <= 0:
        return 0
    if logdet > 48 * math.log(2):
        raise TooLargeError("spanning tree count exceeds exact integer range")
    return int(round(math.exp(logdet)))


def matrix_tree_partition_function(wg: WeightedGraphView) -> float:
    """log Z, the log of the weighted spanning tree sum, via a Laplacian
    cofactor of the rescaled conductances.

    When the disorder spread pushes the determinant outside float range the
    cofactor is recomputed in arbitrary precision (big exponents, 80 digits),
    so the value is exact to full float accuracy at any beta.
    """
    g = wg.graph
    if not g.is_connected():
        raise GraphError("graph must be connected")
    if g.n == 1:
        return 0.0
    w, shift = wg.scaled_weights()
    spread = float(wg.log_weights.max() - wg.log_weights.min()) if g.m else 0.0
    if spread <= 25.0:
        # pivots stay no smaller than about e^-spread: safe in double precision
        L = np.zeros((g.n, g.n))
        for eid, (u, v) in enumerate(g.endpoints):
            L[u, u] += w[eid]
            L[v, v] += w[eid]
            L[u, v] -= w[eid]
            L[v, u] -= w[eid]
        sign, logdet = np.linalg.slogdet(L[1:, 1:])
        if sign <= 0:
            raise RuntimeError("non-positive determinant in partition function")
        return float(logdet + (g.n - 1) * shift)
    return _log_partition_mp(wg)


MAX_PARTITION_DPS = 25000


def partition_function_dps(wg: WeightedGraphView) -> int:
    """Decimal digits needed for the determinant route at this disorder
    spread (the pivot cancellations are of order exp(-spread))."""
    spread = float(wg.log_weights.max() - wg.log_weights.min()) if wg.m else 0.0
    return max(60, int(spread * 0.4343) + 60)


def _log_partition_mp(wg: WeightedGraphView) -> float:
    import mpmath as mp

    dps = partition_function_dps(wg)
    if dps > MAX_PARTITION_DPS:
        raise TooLargeError(
            f"determinant needs about {dps} digits; beyond the supported range")
    g = wg.graph
    hi = float(wg.log_weights.max())
    with mp.workdps(dps):
        L = mp.zeros(g.n - 1, g.n - 1)
        for eid, (u, v) in enumerate(g.endpoints):
            val = mp.e ** mp.mpf(float(wg.log_weights[eid]) - hi)
            for x in (u, v):
                if x >= 1:
                    L[x - 1, x - 1] += val
            if u >= 1 and v >= 1:
                L[u - 1, v - 1] -= val
                L[v - 1, u - 1] -= val
        # symmetric diagonal scaling keeps the pivots of order one
        d = [L[i, i] for i in range(g.n - 1)]
        s = [1 / mp.sqrt(x) for x in d]
        for i in range(g.n - 1):
            for j in range(g.n - 1):
                L[i, j] *= s[i] * s[j]
        det = mp.det(L)
        if det <= 0:
            raise RuntimeError("non-positive determinant in partition function")
        log_det = mp.log(det) + mp.fsum(mp.log(x) for x in d)
        return float(log_det + (g.n - 1) * hi)


def enumerate_spanning_trees(g: MultiGraph, cap: int = 10 ** 6):
    """All spanning trees, each as a sorted tuple of edge ids, in a
    deterministic order via contraction/deletion on the lowest-id edge."""
    count = matrix_tree_count(g)
    if count > cap:
        raise TooLargeError(f"{count} spanning trees exceed cap {cap}")
    if not g.is_connected():
        return []
    out = []

    def rec(h, idmap, chosen):
        if h.n == 1:
            out.append(tuple(sorted(chosen)))
            return
        e = min(range(h.m), key=lambda k: idmap[k])
        # include: contract e
        h2, _, emap = contract_edges(h, [e])
        idmap2 = [None] * h2.m
        for k in range(h.m):
            if emap[k] is not None:
                idmap2[emap[k]] = idmap[k]
        rec(h2, idmap2, chosen + [idmap[e]])
        # exclude: delete e, if still connected
        h3, emap3 = delete_edges_mapped(h, [e])
        if h3.is_connected():
            idmap3 = [None] * h3.m
            for k in range(h.m):
                if emap3[k] is not None:
                    idmap3[emap3[k]] = idmap[k]
            rec(h3, idmap3, chosen)

    rec(g, list(range(g.m)), [])
    assert len(out) == count
    return sorted(out)


@dataclass(frozen=True)
class TreeLaw:
    """Exact Gibbs law over all spanning trees of a small graph."""

    graph: MultiGraph
    beta: float
    trees: tuple                 # tuples of edge ids
    hamiltonians: np.ndarray     # H(T) = sum of omega over tree edges
    probs: np.ndarray
    log_Z: float

    def index_of(self, edge_ids) -> int:
        key = tuple(sorted(edge_ids))
        return self.trees.index(key)

    def edge_marginals(self) -> np.ndarray:
        marg = np.zeros(self.graph.m)
        for t, p in zip(self.trees, self.probs):
            for e in t:
                marg[e] += p
        return marg

    def pair_probability(self, e, f) -> float:
        return float(sum(p for t, p in zip(self.trees, self.probs)
                         if e in t and f in t))

    def expectation(self, func) -> float:
        return float(sum(p * func(t) for t, p in zip(self.trees, self.probs)))

    def as_table(self) -> dict:
        return {frozenset(t): float(p) for t, p in zip(self.trees, self.probs)}


def exact_tree_law(wg: WeightedGraphView, cap: int = 10 ** 6) -> TreeLaw:
    """Enumerate the spanning trees and normalize exp(-beta H) in log space;
    the partition function is cross-checked against the matrix-tree value."""
    g = wg.graph
    trees = enumerate_spanning_trees(g, cap)
    if not trees:
        raise GraphError("graph is disconnected")
    H = np.array([sum(wg.omega[e] for e in t) for t in trees])
    logw = -wg.beta * H
    log_Z = float(logsumexp(logw))
    probs = np.exp(logw - log_Z)
    if partition_function_dps(wg) <= MAX_PARTITION_DPS:
        log_Z_mt = matrix_tree_partition_function(wg)
        if abs(log_Z - log_Z_mt) > 1e-9 * max(1.0, abs(log_Z)):
            raise RuntimeError(
                f"partition function mismatch: {log_Z} (enum) vs "
                f"{log_Z_mt} (matrix tree)")
    return TreeLaw(g, wg.beta, tuple(trees), H, probs, log_Z)


def mst_mass_exact(wg: WeightedGraphView) -> float:
    """P(tree == minimum spanning tree), exactly, via log Z."""
    mf = kruskal_mst(wg.graph, wg.env)
    log_p = float(sum(wg.log_weights[e] for e in mf.edges)) - \
        matrix_tree_partition_function(wg)
    return math.exp(min(log_p, 0.0))


# --------------------------------------------------------------------------
# exact sequential sampler and the gap reduction
# --------------------------------------------------------------------------

def gibbs_sequential_sample(wg: WeightedGraphView, stream) -> SpanningTree:
    """Exact Gibbs spanning tree for arbitrary beta.

    Edges are decided one by one in increasing disorder order; each decision
    uses the current edge-inclusion probability on the contracted/deleted
    graph, so the chain rule reproduces the tree law exactly.  Because every
    undecided edge has disorder at least that of the edge being decided,
    recentering the log conductances at the current edge keeps all weights
    in (0, 1] no matter how large beta is.
    """
    g = wg.graph
    if not g.is_connected():
        raise GraphError("graph must be connected")
    gen = stream.generator if hasattr(stream, "generator") else stream
    order = sorted(range(g.m), key=lambda e: (wg.omega[e], e))
    cur = g
    cur_lw = wg.log_weights.copy()
    idmap = list(range(g.m))           # current edge id -> original id
    pos_of = {e: i for i, e in enumerate(idmap)}
    chosen = []
    for orig in order:
        if orig not in pos_of:
            continue
        e = pos_of[orig]
        view = WeightedGraphView(cur, -(cur_lw - cur_lw[e]), 1.0)
        p = kirchhoff_edge_probability(view, e)
        include = gen.random() < p
        if not include:
            nxt, emap = delete_edges_mapped(cur, [e])
            if not nxt.is_connected():
                include = True          # bridge: inclusion probability is one
        if include:
            nxt, _, emap = contract_edges(cur, [e])
            chosen.append(orig)
        else:
            nxt, emap = delete_edges_mapped(cur, [e])
        new_lw = np.zeros(nxt.m)
        new_idmap = [None] * nxt.m
        for k in range(cur.m):
            j = emap[k]
            if j is not None:
                new_lw[j] = cur_lw[k]
                new_idmap[j] = idmap[k]
        cur, cur_lw, idmap = nxt, new_lw, new_idmap
        pos_of = {eid: i for i, eid in enumerate(idmap)}
        if len(chosen) == g.n - 1:
            break
    return SpanningTree(g, tuple(chosen))


def gap_restricted_view(wg: WeightedGraphView, slack: float = 3.0):
    """Restrict a weighted graph to the edges a Gibbs tree can use.

    Keeps every edge with omega <= q where q sits ``(slack + 5 log n + log m)
    / beta`` above the largest disorder on the minimum spanning tree; any
    spanning tree using a discarded edge has probability at most
    ``exp(-slack)/n^3`` in total, which is returned as the bound.

    Returns (restricted view, edge id map new->original, tv error bound).
    """
    g = wg.graph
    if wg.beta <= 0:
        raise ValueError("gap restriction needs beta > 0")
    mf = kruskal_mst(g, wg.env)
    if not mf.connected:
        raise GraphError("graph must be connected")
    p_star = max(wg.omega[e] for e in mf.edges)
    margin = (slack + 5.0 * math.log(max(g.n, 2)) + math.log(max(g.m, 2))) / wg.beta
    q = p_star + margin
    keep = [e for e in range(g.m) if wg.omega[e] <= q]
    # bound: a tree containing a discarded edge e trades it against a path of
    # tree edges, costing a factor <= n * exp(-beta (omega_e - p_star)) each
    bound = min(1.0, g.m * g.n * math.exp(-wg.beta * margin))
    keep_set = set(keep)
    sub_edges = [g.endpoints[e] for e in keep]
    sub = MultiGraph(g.n, sub_edges)
    view = WeightedGraphView(sub, wg.omega[keep], wg.beta)
    assert set(mf.edges) <= keep_set
    return view, keep, bound


# --------------------------------------------------------------------------
# implicit complete-graph samplers (no materialized edge list)
# --------------------------------------------------------------------------

def complete_edge_ids(n, us, vs):
    """Condensed edge index of (u, v), u < v, matching build_complete order."""
    us = np.asarray(us, dtype=np.int64)
    vs = np.asarray(vs, dtype=np.int64)
    lo = np.minimum(us, vs)
    hi = np.maximum(us, vs)
    return lo * (2 * n - lo - 1) // 2 + (hi - lo - 1)


def complete_omega(n, seed, us, vs, law=Uniform01()):
    """Disorder of complete-graph edges, identical to sample_environment on
    build_complete(n) with the same seed."""
    ids = complete_edge_ids(n, us, vs)
    return np.asarray(law.inverse_cdf(keyed_uniforms(seed, ENV_STREAM, ids)), dtype=float)


def complete_wilson(n, beta, seed, stream, law=Uniform01(), root=0,
                    step_cap=DEFAULT_STEP_CAP, batch=None):
    """Wilson's algorithm on an implicit complete graph.

    The walk step does rejection against the bound w <= 1 (laws supported on
    [0, inf)), so no per-vertex tables are ever built.  Returns the tree as a
    list of (u, v) pairs.
    """
    gen = stream.generator if hasattr(stream, "generator") else stream
    if batch is None:
        mean_acc = max(1e-6, min(1.0, (1 - math.exp(-beta)) / beta if beta > 0 else 1.0))
        batch = int(min(4096, max(32, 8.0 / mean_acc)))
    in_tree = np.zeros(n, dtype=bool)
    in_tree[root] = True
    nxt = np.full(n, -1, dtype=np.int64)
    steps = 0

    def step(v):
        nonlocal steps
        while True:
            if steps >= step_cap:
                raise NonterminationSuspected("implicit wilson walk exceeded cap")
            cand = gen.integers(0, n, size=batch)
            acc = gen.random(batch)
            ok = cand != v
            om = complete_omega(n, seed, np.full(batch, v), np.where(ok, cand, (v + 1) % n), law)
            take = ok & (np.log(np.maximum(acc, 1e-300)) < -beta * om)
            steps += batch
            hits = np.nonzero(take)[0]
            if hits.size:
                return int(cand[hits[0]])

    for start in range(n):
        v = start
        while not in_tree[v]:
            nxt[v] = step(v)
            v = nxt[v]
        v = start
        while not in_tree[v]:
            in_tree[v] = True
            v = nxt[v]
    return [(v, int(nxt[v])) for v in range(n) if v != root and nxt[v] >= 0 and in_tree[v]]


def complete_mst(n, seed, law=Uniform01(), q0=None):
    """MST of the implicit complete graph coupled to the keyed environment.

    Scans the condensed edge ids in chunks, keeps the sub-threshold edges and
    runs Kruskal; the threshold doubles until the kept subgraph is spanning
    (if the disorder below the threshold connects the graph, the MST uses
    only such edges).  Returns a list of (u, v) pairs.
    """
    m = n * (n - 1) // 2
    q = q0 if q0 is not None else min(1.0, 3.0 * math.log(max(n, 2)) / n)
    while True:
        us_all, vs_all, omega_all = [], [], []
        chunk = 1 << 22
        for lo_id in range(0, m, chunk):
            ids = np.arange(lo_id, min(lo_id + chunk, m), dtype=np.int64)
            uni = keyed_uniforms(seed, ENV_STREAM, ids)
            mask = uni <= q
            if not mask.any():
                continue
            ids_kept = ids[mask]
            # invert the condensed index; fix float rounding both ways
            u = ((2 * n - 1) - np.sqrt((2 * n - 1) ** 2 - 8.0 * ids_kept)) // 2
            u = np.clip(u.astype(np.int64), 0, n - 2)
            for _ in range(3):
                base = u * (2 * n - u - 1) // 2
                u -= (ids_kept < base).astype(np.int64)
                u = np.clip(u, 0, n - 2)
                nxt_base = (u + 1) * (2 * n - u - 2) // 2
                u += ((ids_kept >= nxt_base) & (u + 1 <= n - 2)).astype(np.int64)
            base = u * (2 * n - u - 1) // 2
            v = ids_kept - base + u + 1
            if np.any(complete_edge_ids(n, u, v) != ids_kept) or np.any(v >= n):
                raise RuntimeError("condensed edge index inversion failed")
            us_all.append(u)
            vs_all.append(v)
            omega_all.append(np.asarray(law.inverse_cdf(uni[mask]), dtype=float))
        if us_all:
            us = np.concatenate(us_all)
            vs = np.concatenate(vs_all)
            om = np.concatenate(omega_all)
            order = np.argsort(om, kind="stable")
            parent = np.arange(n)

            def find(x):
                root = x
                while parent[root] != root:
                    root = parent[root]
                while parent[x] != root:
                    parent[x], x = root, parent[x]
                return root

            edges = []
            for k in order:
                ru, rv = find(int(us[k])), find(int(vs[k]))
                if ru != rv:
                    parent[ru] = rv
                    edges.append((int(us[k]), int(vs[k])))
                    if len(edges) == n - 1:
                        return edges
        if q >= 1.0:
            raise GraphError("complete graph MST scan failed to span")
        q = min(1.0, 2.0 * q)


def pair_list_diameter(n, pairs) -> int:
    """Diameter of a tree given as (u, v) pairs on vertices [0, n)."""
    adj = [[] for _ in range(n)]
    for u, v in pairs:
        adj[u].append(v)
        adj[v].append(u)

    def far(s):
        dist = np.full(n, -1, dtype=np.int64)
        dist[s] = 0
        queue = [s]
        best, bd = s, 0
        qi = 0
        while qi < len(queue):
            x = queue[qi]
            qi += 1
            for y in adj[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    if dist[y] > bd:
                        best, bd = y, int(dist[y])
                    queue.append(y)
        return best, bd

    a, _ = far(0)
    _, d = far(a)
    return d


def pair_list_length(n, pairs, seed, law=Uniform01()) -> float:
    """Total disorder along a tree given as (u, v) pairs."""
    us = np.array([u for u, _ in pairs], dtype=np.int64)
    vs = np.array([v for _, v in pairs], dtype=np.int64)
    return float(complete_omega(n, seed, us, vs, law).sum())
