"""Observables of the tree ensemble: overlaps, length, local balls and
tree-map moments, walk diagnostics, derivative identities, bump steps,
total variation, and tree/MST agreement.

Each observable has an exact route (enumeration or electric identities,
gated by graph size) and, where it matters, a Monte Carlo route; the two are
cross-checked in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .electric import (edge_inclusion_probabilities, joint_edge_probability,
                       kirchhoff_edge_probability)
from .environment import WeightedGraphView
from .graph import MultiGraph, RootedTree, SpanningTree, tree_diameter
from .sampler import (TreeSampler, exact_tree_law, kruskal_mst,
                      matrix_tree_partition_function, mst_mass_exact)


class CheckFailedError(AssertionError):
    pass


# --------------------------------------------------------------------------
# overlap and length
# --------------------------------------------------------------------------

def edge_overlap_exact(wg: WeightedGraphView) -> float:
    """Expected number of common edges of two independent trees in the same
    environment: sum over edges of P(e in tree)^2."""
    p = edge_inclusion_probabilities(wg)
    return float((p * p).sum())


def edge_overlap_mc(wg: WeightedGraphView, pairs: int, stream):
    """Monte Carlo overlap from independent tree pairs.

    Returns (mean, standard error).
    """
    if pairs < 2:
        raise ValueError("need at least two replica pairs")
    ts = TreeSampler(wg)
    vals = np.empty(pairs)
    for i in range(pairs):
        a = ts.wilson_edges(stream)
        b = ts.wilson_edges(stream)
        vals[i] = len(set(a) & set(b))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(pairs))


def tree_overlap_exact(wg: WeightedGraphView, cap: int = 10 ** 6) -> float:
    """Probability that two independent samples are the same tree."""
    law = exact_tree_law(wg, cap)
    return float((law.probs ** 2).sum())


def tree_length(edge_ids, omega) -> float:
    """Total disorder along a tree."""
    return float(sum(omega[e] for e in edge_ids))


def expected_length_exact(wg: WeightedGraphView) -> float:
    """E[sum of omega over the tree] via edge marginals."""
    p = edge_inclusion_probabilities(wg)
    return float((wg.omega * p).sum())


# --------------------------------------------------------------------------
# local balls and tree-map moments
# --------------------------------------------------------------------------

def canonical_code(children, root) -> str:
    """Canonical string of a rooted tree: equal iff rooted-isomorphic."""
    def code(v):
        subs = sorted(code(c) for c in children[v])
        return "(" + "".join(subs) + ")"
    return code(root)


@dataclass(frozen=True)
class LocalBall:
    """Ball of a tree around a root, with a canonical isomorphism key."""

    radius: int
    size: int
    code: str
    tree: RootedTree


def _adjacency_of(t):
    if isinstance(t, SpanningTree):
        return t.adjacency()
    if isinstance(t, RootedTree):
        adj = [[] for _ in range(t.size)]
        for v, cs in enumerate(t.children):
            for c in cs:
                adj[v].append(c)
                adj[c].append(v)
        return adj
    if isinstance(t, MultiGraph):
        return [[y for _, y in t.adj[v]] for v in range(t.n)]
    return t  # assume raw adjacency lists


def local_ball(t, v: int, r: int) -> LocalBall:
    """Ball of radius r around v in a tree, as a canonically coded object."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    adj = _adjacency_of(t)
    # BFS to depth r, recording the induced child structure
    index = {v: 0}
    children = [[]]
    frontier = [v]
    depth = 0
    while frontier and depth < r:
        nxt = []
        for x in frontier:
            for y in adj[x]:
                if y not in index:
                    index[y] = len(children)
                    children.append([])
                    children[index[x]].append(index[y])
                    nxt.append(y)
        frontier = nxt
        depth += 1
    rt = RootedTree(tuple(tuple(c) for c in children), 0)
    return LocalBall(r, len(children), canonical_code(rt.children, 0), rt)


def rooted_isomorphic(b1: LocalBall, b2: LocalBall) -> bool:
    return b1.code == b2.code


def count_tree_maps(host, host_root: int, pattern: RootedTree) -> int:
    """Number of injective, root-preserving, adjacency-preserving maps from
    the pattern tree into the rooted host graph, by backtracking."""
    adj = _adjacency_of(host)
    order = []
    parent = {pattern.root: None}
    stack = [pattern.root]
    while stack:
        x = stack.pop()
        order.append(x)
        for c in pattern.children[x]:
            parent[c] = x
            stack.append(c)
    assignment = {pattern.root: host_root}
    used = {host_root}

    def rec(i):
        if i == len(order):
            return 1
        pv = order[i]
        hp = assignment[parent[pv]]
        total = 0
        for nb in adj[hp]:
            if nb not in used:
                assignment[pv] = nb
                used.add(nb)
                total += rec(i + 1)
                used.remove(nb)
        return total

    return rec(1) if len(order) > 1 else 1


def pattern_path(num_edges: int) -> RootedTree:
    """Path with the given number of edges, rooted at one end."""
    children = [[i + 1] if i < num_edges else [] for i in range(num_edges + 1)]
    return RootedTree(tuple(tuple(c) for c in children), 0)


def pattern_star(leaves: int) -> RootedTree:
    """Root with the given number of children."""
    children = [tuple(range(1, leaves + 1))] + [()] * leaves
    return RootedTree(tuple(children), 0)


def sample_poisson_backbone_ball(r: int, stream) -> LocalBall:
    """Ball of radius r around the root of the one-ended random tree built
    from an infinite backbone with independent mean-one Poisson trees hanging
    off every backbone vertex."""
    if r < 1:
        raise ValueError("radius must be at least 1")
    gen = stream.generator if hasattr(stream, "generator") else stream
    children = [[]]

    def grow_poisson(v, remaining_depth, mean=1.0):
        if remaining_depth <= 0:
            return
        for _ in range(gen.poisson(mean)):
            children.append([])
            c = len(children) - 1
            children[v].append(c)
            grow_poisson(c, remaining_depth - 1, mean)

    backbone = [0]
    for depth in range(1, r + 1):
        children.append([])
        b = len(children) - 1
        children[backbone[-1]].append(b)
        backbone.append(b)
    for depth, v in enumerate(backbone):
        grow_poisson(v, r - depth)
    rt = RootedTree(tuple(tuple(c) for c in children), 0)
    return LocalBall(r, len(children), canonical_code(rt.children, 0), rt)


def backbone_tree_map_reference(pattern: RootedTree) -> float:
    """Expected number of pattern embeddings in the backbone limit object:
    equal to the number of pattern vertices."""
    return float(pattern.size)


# --------------------------------------------------------------------------
# walk diagnostics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WalkDiagnostics:
    stationary: np.ndarray
    balance_ratio: float        # max pi / min pi
    mixing_time: int            # uniform mixing time of the lazy walk
    escaping_sum: float         # sum (t+1) sup_v q_t(v,v) up to mixing time
    bottleneck: float           # min over pi(S) <= 1/2 of the bottleneck ratio
    bottleneck_exact: bool      # False when the subset sweep was sampled


def stationary_distribution(wg: WeightedGraphView) -> np.ndarray:
    w, _ = wg.scaled_weights()
    g = wg.graph
    wv = np.zeros(g.n)
    for eid, (u, v) in enumerate(g.endpoints):
        wv[u] += w[eid]
        wv[v] += w[eid]
    total = w.sum()
    if total <= 0:
        raise ValueError("graph carries no conductance")
    return wv / (2.0 * total)


def lazy_kernel(wg: WeightedGraphView) -> np.ndarray:
    """Dense lazy transition matrix: hold 1/2, else move by conductance."""
    w, _ = wg.scaled_weights()
    g = wg.graph
    P = np.zeros((g.n, g.n))
    for eid, (u, v) in enumerate(g.endpoints):
        P[u, v] += w[eid]
        P[v, u] += w[eid]
    row = P.sum(axis=1)
    if np.any(row <= 0):
        raise ValueError("isolated vertex has no moves")
    P /= row[:, None]
    return 0.5 * np.eye(g.n) + 0.5 * P


def uniform_mixing_time(wg: WeightedGraphView, t_cap: int = 1 << 24) -> int:
    """Smallest t with max |q_t(u,v)/pi(v) - 1| <= 1/2, by repeated squaring
    of the lazy kernel and a binary search on the exponent."""
    pi = stationary_distribution(wg)
    Q = lazy_kernel(wg)
    if wg.graph.n == 1:
        return 0

    def ok(M):
        return float(np.abs(M / pi[None, :] - 1.0).max()) <= 0.5

    powers = [Q]          # powers[k] = Q^(2^k)
    t = 1
    while not ok(powers[-1]):
        if t >= t_cap:
            raise RuntimeError("mixing time exceeds cap")
        powers.append(powers[-1] @ powers[-1])
        t *= 2
    if len(powers) == 1:
        return 1
    # binary search in (2^(k-1), 2^k]
    lo, hi = t // 2, t

    def power(e):
        M = None
        k = 0
        while e:
            if e & 1:
                M = powers[k] if M is None else M @ powers[k]
            e >>= 1
            k += 1
        return M

    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if ok(power(mid)):
            hi = mid
        else:
            lo = mid
    return hi


def escaping_sum(wg: WeightedGraphView, t_mix: int) -> float:
    """Sum over t = 0..t_mix of (t+1) * sup_v q_t(v,v) for the lazy walk."""
    Q = lazy_kernel(wg)
    n = wg.graph.n
    M = np.eye(n)
    total = 0.0
    for t in range(t_mix + 1):
        total += (t + 1) * float(np.diag(M).max())
        if t < t_mix:
            M = M @ Q
    return total


def _subset_bits(count, n, offset):
    ids = np.arange(offset, offset + count, dtype=np.uint64)
    return ((ids[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(float)


def bottleneck_profile(wg: WeightedGraphView, exhaustive_limit: int = 24,
                       sweep_samples: int = 200000, stream=None):
    """All (pi(S), Phi(S)) pairs with pi(S) <= 1/2.

    Exhaustive for n <= exhaustive_limit (chunked subset enumeration), a
    flagged random sweep beyond.  Returns (pis, phis, exact flag).
    """
    g = wg.graph
    w, _ = wg.scaled_weights()
    pi = stationary_distribution(wg)
    wv = pi * 2.0 * w.sum()        # vertex conductance
    ep = np.array(g.endpoints) if g.m else np.zeros((0, 2), dtype=int)
    exact = g.n <= exhaustive_limit
    pis, phis = [], []
    if exact:
        total = 1 << g.n
        chunk = 1 << 20
        for off in range(1, total - 1, chunk):
            cnt = min(chunk, total - 1 - off)
            bits = _subset_bits(cnt, g.n, off)
            vol = bits @ wv
            pivals = bits @ pi
            xor = np.abs(bits[:, ep[:, 0]] - bits[:, ep[:, 1]]) if g.m else 0.0
            cut = xor @ w if g.m else np.zeros(cnt)
            mask = (pivals > 0) & (pivals <= 0.5 + 1e-15)
            phi = 0.5 * cut[mask] / vol[mask]
            pis.append(pivals[mask])
            phis.append(phi)
    else:
        gen = (stream.generator if hasattr(stream, "generator") else stream) \
            if stream is not None else np.random.default_rng(0)
        for _ in range(max(1, sweep_samples // 4096)):
            bits = (gen.random((4096, g.n)) < gen.random((4096, 1))).astype(float)
            vol = bits @ wv
            pivals = bits @ pi
            xor = np.abs(bits[:, ep[:, 0]] - bits[:, ep[:, 1]])
            cut = xor @ w
            mask = (pivals > 0) & (pivals <= 0.5)
            pis.append(pivals[mask])
            phis.append(0.5 * cut[mask] / vol[mask])
    return np.concatenate(pis), np.concatenate(phis), exact


def bottleneck_ratio(wg: WeightedGraphView, **kw):
    """(Phi, exact flag): minimum bottleneck ratio over pi(S) <= 1/2."""
    pis, phis, exact = bottleneck_profile(wg, **kw)
    return float(phis.min()), exact


def heat_cheeger_mixing_bound(wg: WeightedGraphView) -> float:
    """1 + integral from 4*pi_min to 8 of 4 / (r * Phi(r)^2) dr, where
    Phi(r) is the bottleneck profile (minimum ratio over pi(S) <= r, frozen
    at its value at one half beyond r = 1/2)."""
    pis, phis, exact = bottleneck_profile(wg)
    if not exact:
        raise ValueError("profile bound needs the exhaustive subset sweep")
    pi_min = float(stationary_distribution(wg).min())
    lo, hi = 4.0 * pi_min, 8.0
    order = np.argsort(pis, kind="stable")
    pis_s = pis[order]
    run = np.minimum.accumulate(phis[order])
    phi_half = float(run[-1])
    idx = int(np.searchsorted(pis_s, lo, side="right")) - 1
    if idx < 0:
        raise RuntimeError("no admissible subset below the lower limit")
    pos, cur = lo, float(run[idx])
    total = 0.0
    top = min(hi, 0.5)
    for j in range(idx + 1, len(pis_s)):
        p = float(pis_s[j])
        if p >= top:
            break
        f = float(run[j])
        if f < cur - 1e-18 and p > pos:
            total += 4.0 / cur ** 2 * math.log(p / pos)
            pos, cur = p, f
    if top > pos:
        total += 4.0 / cur ** 2 * math.log(top / pos)
        pos = top
    if hi > 0.5:
        total += 4.0 / phi_half ** 2 * math.log(hi / max(pos, 0.5))
    return 1.0 + total


def walk_diagnostics(wg: WeightedGraphView, phi_limit: int = 24,
                     mix_limit: int = 4000) -> WalkDiagnostics:
    g = wg.graph
    if g.n > mix_limit:
        raise ValueError(f"dense kernel powering limited to {mix_limit} vertices")
    pi = stationary_distribution(wg)
    t_mix = uniform_mixing_time(wg)
    esc = escaping_sum(wg, t_mix)
    phi, exact = bottleneck_ratio(wg, exhaustive_limit=phi_limit)
    return WalkDiagnostics(pi, float(pi.max() / pi.min()), t_mix, esc, phi, exact)


# --------------------------------------------------------------------------
# derivative identities and bump steps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivativeReport:
    beta_residual: float
    beta_tolerance: float
    pair_residuals: tuple
    pair_tolerance: float


def derivative_checks(wg: WeightedGraphView, h: float = 1e-4,
                      pair_edges=None) -> DerivativeReport:
    """Finite-difference verification of the thermodynamic identities.

    Checks d/d(beta) log Z = -E[H] and, for edge pairs (e, f), that
    d/d(omega_f) P(e in tree) = beta * (P(e) P(f) - P(e, f)), with central
    differences of step h and tolerance 10 h^2 * scale.
    """
    g = wg.graph
    # beta derivative of log Z against -E[H]
    up = matrix_tree_partition_function(WeightedGraphView(g, wg.omega, wg.beta + h))
    if wg.beta >= h:
        dn = matrix_tree_partition_function(WeightedGraphView(g, wg.omega, wg.beta - h))
        dlogz = (up - dn) / (2 * h)
    else:
        dn = matrix_tree_partition_function(wg)
        dlogz = (up - dn) / h
    expected = -expected_length_exact(wg)
    spread = float(wg.omega.max() - wg.omega.min()) if g.m else 0.0
    scale_beta = max(1.0, ((g.n - 1) * max(spread, float(np.abs(wg.omega).max(initial=0.0)))) ** 3)
    beta_resid = abs(dlogz - expected)
    beta_tol = 10.0 * h * h * scale_beta if wg.beta >= h else 10.0 * h * scale_beta
    if beta_resid > beta_tol:
        raise CheckFailedError(
            f"log-partition derivative residual {beta_resid} > {beta_tol}")

    pairs = pair_edges
    if pairs is None:
        pairs = [(0, 0)] if g.m == 1 else [(0, 1), (0, 0)]
    resids = []
    scale_pair = max(1.0, wg.beta ** 3, 1.0 + wg.beta)
    pair_tol = 10.0 * h * h * scale_pair
    marg = edge_inclusion_probabilities(wg)
    for (e, f) in pairs:
        om_hi, om_lo = wg.omega.copy(), wg.omega.copy()
        om_hi[f] += h
        om_lo[f] -= h
        p_hi = kirchhoff_edge_probability(WeightedGraphView(g, om_hi, wg.beta), e)
        p_lo = kirchhoff_edge_probability(WeightedGraphView(g, om_lo, wg.beta), e)
        lhs = (p_hi - p_lo) / (2 * h)
        pef = marg[e] if e == f else joint_edge_probability(wg, [e, f])
        rhs = wg.beta * (marg[e] * marg[f] - pef)
        resids.append(abs(lhs - rhs))
        if resids[-1] > pair_tol:
            raise CheckFailedError(
                f"marginal derivative residual {resids[-1]} > {pair_tol} at ({e},{f})")
    return DerivativeReport(beta_resid, beta_tol, tuple(resids), pair_tol)


@dataclass(frozen=True)
class BumpReport:
    moved_to: float
    lambda_in: float
    lambda_out: float
    prob_before: float
    prob_after: float
    ill_posed: bool


def bump_step_verify(wg: WeightedGraphView, eid: int, a1: float, a2: float,
                     D: int, cap: int = 10 ** 5) -> BumpReport:
    """One step of the weight-bumping argument.

    Splits P(diam <= D) over whether the edge is in the tree, moves the
    edge's disorder to a1 or a2 toward the smaller conditional, and verifies
    the probability of a small diameter did not increase.
    """
    if not (a1 <= wg.omega[eid] <= a2):
        raise ValueError("need a1 <= omega_e <= a2")
    law = exact_tree_law(wg, cap)
    diam_ok = np.array([tree_diameter(SpanningTree(wg.graph, t)) <= D
                        for t in law.trees])
    with_e = np.array([eid in t for t in law.trees])
    p_in = float(law.probs[with_e].sum())
    p0 = float(law.probs[diam_ok].sum())
    if p_in <= 0.0 or p_in >= 1.0:
        # conditioning on the other branch is ill-posed; any value works
        om = wg.omega.copy()
        om[eid] = a1
        law2 = exact_tree_law(WeightedGraphView(wg.graph, om, wg.beta), cap)
        p1 = float(law2.probs[diam_ok].sum())
        return BumpReport(a1, math.nan, math.nan, p0, p1, True)
    lam1 = float(law.probs[diam_ok & with_e].sum()) / p_in
    lam2 = float(law.probs[diam_ok & ~with_e].sum()) / (1.0 - p_in)
    target = a1 if lam1 <= lam2 else a2
    om = wg.omega.copy()
    om[eid] = target
    law2 = exact_tree_law(WeightedGraphView(wg.graph, om, wg.beta), cap)
    p1 = float(law2.probs[diam_ok].sum())
    if p1 > p0 + 1e-12:
        raise CheckFailedError(f"bump increased P(diam <= D): {p0} -> {p1}")
    return BumpReport(target, lam1, lam2, p0, p1, False)


# --------------------------------------------------------------------------
# total variation and MST agreement
# --------------------------------------------------------------------------

def tv_distance(table1: dict, table2: dict) -> float:
    """(1/2) sum |p1 - p2| over the union of supports of two probability
    tables keyed by hashable outcomes."""
    if not isinstance(table1, dict) or not isinstance(table2, dict):
        raise ValueError("expected probability tables as dicts")
    s1, s2 = sum(table1.values()), sum(table2.values())
    if abs(s1 - 1) > 1e-9 or abs(s2 - 1) > 1e-9:
        raise ValueError("tables must be normalized")
    keys = set(table1) | set(table2)
    return 0.5 * sum(abs(table1.get(k, 0.0) - table2.get(k, 0.0)) for k in keys)


def mst_equality_probability(env_factory, replicas: int, stream) -> float:
    """Empirical frequency that a sampled tree equals the coupled minimum
    spanning tree over fresh environments.

    env_factory(i) must return the weighted view of replica i.
    """
    hits = 0
    for i in range(replicas):
        wg = env_factory(i)
        tree = TreeSampler(wg).wilson_edges(stream.substream(("replica", i))
                                            if hasattr(stream, "substream") else stream)
        mf = kruskal_mst(wg.graph, wg.env)
        hits += int(tuple(sorted(mf.edges)) == tree)
    return hits / replicas


def mst_equality_mass(env_factory, replicas: int) -> float:
    """Mean exact Gibbs mass of the minimum spanning tree over environments."""
    return float(np.mean([mst_mass_exact(env_factory(i)) for i in range(replicas)]))
