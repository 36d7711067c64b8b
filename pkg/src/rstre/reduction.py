"""Two-core and kernel extraction, the contiguous model of the slightly
supercritical giant component, kernel weight statistics, and the
total-variation comparison between restricted tree laws.

The kernel of a graph is its 2-core with isolated cycles removed and every
maximal 2-path contracted to a single edge; the series law turns the path
weights into one kernel conductance, and the kernel tree law couples exactly
to the original one (a kernel edge is in the tree iff its whole path is).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .electric import kirchhoff_edge_probability, joint_edge_probability, conditioned_view
from .environment import Environment, WeightedGraphView, inverse_cdf
from .graph import (GraphError, MultiGraph, SpanningTree, connected_components,
                    restricted_subtree, subgraph_on_vertices)
from .sampler import enumerate_spanning_trees, exact_tree_law


# --------------------------------------------------------------------------
# 2-core and kernel
# --------------------------------------------------------------------------

def two_core(g: MultiGraph):
    """Iterated degree-1 peeling.

    Returns (core graph, kept vertex ids, kept edge ids); the core graph is
    the induced subgraph on the kept vertices.
    """
    deg = [g.degree(v) for v in range(g.n)]
    alive_v = [True] * g.n
    alive_e = [True] * g.m
    stack = [v for v in range(g.n) if deg[v] <= 1]
    while stack:
        x = stack.pop()
        if not alive_v[x] or deg[x] > 1:
            continue
        alive_v[x] = False
        for eid, y in g.adj[x]:
            if alive_e[eid]:
                alive_e[eid] = False
                deg[x] -= 1
                deg[y] -= 1
                if alive_v[y] and deg[y] <= 1:
                    stack.append(y)
    kept_v = [v for v in range(g.n) if alive_v[v] and deg[v] >= 2]
    sub, _, kept_e = subgraph_on_vertices(g, kept_v)
    return sub, kept_v, kept_e


@dataclass(frozen=True)
class KernelDecomposition:
    """Kernel of a graph with the path mapping and series-law weights."""

    two_core: MultiGraph
    core_vertices: tuple        # original vertex ids of the 2-core
    core_edges: tuple           # original edge ids of the 2-core
    kernel: MultiGraph
    kernel_vertices: tuple      # original vertex ids kept in the kernel
    phi: tuple                  # kernel edge id -> tuple of original edge ids
    kernel_weights: np.ndarray  # series-law conductance per kernel edge
    dropped_cycles: tuple       # tuples of original edge ids removed as cycles


def kernel_decompose(g: MultiGraph, env: Environment, beta: float) -> KernelDecomposition:
    """Extract the kernel and its series-law weights.

    Components of the 2-core that are bare cycles are dropped, as are 2-paths
    that close a cycle on a single branch vertex (they would contract to
    self-loops, which are never stored); both are reported in
    ``dropped_cycles``.
    """
    core, core_v, core_e = two_core(g)
    with np.errstate(over="ignore", under="ignore"):
        w_orig = np.exp(-beta * env.omega)
    branch_local = [v for v in range(core.n) if core.degree(v) >= 3]
    branch = set(branch_local)
    dropped = []
    phi, weights, kernel_edges = [], [], []
    if not branch:
        # the whole 2-core is a disjoint union of cycles: everything drops
        comps = connected_components(core)
        for cid in range(len(comps.sizes)):
            verts = comps.vertices_of(cid)
            _, _, eids = subgraph_on_vertices(core, verts)
            dropped.append(tuple(core_e[e] for e in eids))
        kernel = MultiGraph(0, [])
        return KernelDecomposition(core, tuple(core_v), tuple(core_e), kernel,
                                   (), (), np.zeros(0), tuple(dropped))
    # vertices of degree exactly 2 are interior to maximal 2-paths
    kernel_index = {v: i for i, v in enumerate(sorted(branch))}
    visited_edge = [False] * core.m

    def walk_path(start, eid0, nbr0):
        """Follow a 2-path from a branch vertex through interior vertices."""
        path = [eid0]
        prev, cur = start, nbr0
        visited_edge[eid0] = True
        while cur not in branch:
            nxt = [(e, y) for e, y in core.adj[cur] if not visited_edge[e]]
            if not nxt:
                return path, cur  # isolated cycle came back around
            e, y = nxt[0]
            visited_edge[e] = True
            path.append(e)
            prev, cur = cur, y
        return path, cur

    for b in sorted(branch):
        for eid, y in core.adj[b]:
            if visited_edge[eid]:
                continue
            path, end = walk_path(b, eid, y)
            if end == b:
                dropped.append(tuple(core_e[e] for e in path))
                continue
            resistances = 1.0 / np.maximum(w_orig[[core_e[e] for e in path]], 1e-300)
            phi.append(tuple(core_e[e] for e in path))
            weights.append(1.0 / resistances.sum())
            kernel_edges.append((kernel_index[b], kernel_index[end]))
    # cycles with no branch vertex in their component
    comps = connected_components(core)
    for cid in range(len(comps.sizes)):
        verts = comps.vertices_of(cid)
        if not any(v in branch for v in verts):
            _, _, eids = subgraph_on_vertices(core, verts)
            if eids:
                dropped.append(tuple(core_e[e] for e in eids))
    kernel = MultiGraph(len(branch), kernel_edges)
    kernel_vertices = tuple(core_v[v] for v in sorted(branch))
    return KernelDecomposition(core, tuple(core_v), tuple(core_e), kernel,
                               kernel_vertices, tuple(phi),
                               np.array(weights), tuple(dropped))


def kernel_view(dec: KernelDecomposition) -> WeightedGraphView:
    """Weighted view of the kernel carrying the series-law conductances."""
    if np.any(dec.kernel_weights <= 0):
        raise GraphError("kernel weights must be positive")
    return WeightedGraphView(dec.kernel, -np.log(dec.kernel_weights), 1.0)


@dataclass(frozen=True)
class CouplingReport:
    max_marginal_gap: float
    max_sequential_gap: float
    edges_checked: int


def kernel_coupling_check(g: MultiGraph, env: Environment, beta: float,
                          tol: float = 1e-9) -> CouplingReport:
    """Verify the exact coupling between tree laws on a graph and its kernel.

    For every kernel edge, P(kernel edge in kernel tree) must equal
    P(its whole path is in the original tree); the same equalities are then
    rechecked along a sequential conditioning chain (contract the path or
    delete one of its edges), which establishes the full joint coupling.
    Dangling parts outside the 2-core carry no current, so the identity holds
    for any connected graph.
    """
    if not g.is_connected():
        raise GraphError("graph must be connected")
    dec = kernel_decompose(g, env, beta)
    wg = WeightedGraphView(g, env.omega, beta)
    kv = kernel_view(dec)
    worst = 0.0
    for ke in range(dec.kernel.m):
        p_kernel = kirchhoff_edge_probability(kv, ke)
        p_path = joint_edge_probability(wg, list(dec.phi[ke]))
        worst = max(worst, abs(p_kernel - p_path))
    if worst > tol:
        raise GraphError(f"kernel marginal coupling off by {worst}")
    # sequential chain: decide kernel edges one at a time on both sides
    worst_seq = 0.0
    cur_kv, cur_g = kv, wg
    kmap = list(range(dec.kernel.m))
    gmap = list(range(g.m))
    for ke in range(dec.kernel.m):
        kpos = kmap[ke]
        if kpos is None:
            continue
        path = [gmap[e] for e in dec.phi[ke]]
        if any(e is None for e in path):
            continue
        pk = kirchhoff_edge_probability(cur_kv, kpos)
        pg = joint_edge_probability(cur_g, path)
        worst_seq = max(worst_seq, abs(pk - pg))
        include = pk >= 0.5
        if include:
            nxt_kv, em_k = conditioned_view(cur_kv, [kpos], [])
            nxt_g, em_g = conditioned_view(cur_g, path, [])
        else:
            nxt_kv, em_k = conditioned_view(cur_kv, [], [kpos])
            nxt_g, em_g = conditioned_view(cur_g, [], [path[0]])
        kmap = [em_k[k] if k is not None else None for k in kmap]
        gmap = [em_g[e] if e is not None else None for e in gmap]
        cur_kv, cur_g = nxt_kv, nxt_g
        if cur_kv.graph.n <= 1:
            break
    if worst_seq > tol:
        raise GraphError(f"sequential coupling off by {worst_seq}")
    return CouplingReport(worst, worst_seq, dec.kernel.m)


def export_kernel(dec: KernelDecomposition, core_path, kernel_path, phi_path):
    """Write the decomposition as two edge-list files plus the path map."""
    with open(core_path, "w", encoding="utf-8") as fh:
        fh.write(f"{dec.two_core.n}\n")
        for (u, v) in dec.two_core.endpoints:
            fh.write(f"{u} {v}\n")
    with open(kernel_path, "w", encoding="utf-8") as fh:
        fh.write(f"{dec.kernel.n}\n")
        for eid, (u, v) in enumerate(dec.kernel.endpoints):
            fh.write(f"{u} {v} {dec.kernel_weights[eid]!r}\n")
    with open(phi_path, "w", encoding="utf-8") as fh:
        for eid, path in enumerate(dec.phi):
            fh.write(f"{eid}: {','.join(str(e) for e in path)}\n")


# --------------------------------------------------------------------------
# contiguous model of the giant component
# --------------------------------------------------------------------------

def conjugate_parameter(eps: float, tol: float = 1e-12) -> float:
    """The conjugate mu < 1 of 1 + eps: mu e^{-mu} = (1+eps) e^{-(1+eps)}."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return 1.0
    target = (1.0 + eps) * math.exp(-(1.0 + eps))
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(-mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ContiguousModelParams:
    n: int
    eps: float
    mu_star: float
    Lambda: float
    degrees: np.ndarray        # Poisson(Lambda) marks of all n vertices
    kernel_degrees: np.ndarray  # the marks >= 3 actually used
    simple: bool               # kernel pairing avoided multi-edges
    total_vertices: int


def sample_contiguous_giant(n: int, eps: float, stream, depth_cap=None,
                            simple_tries: int = 200):
    """Three-stage surrogate of the slightly supercritical giant component.

    1. a configuration-model kernel on Poisson(Lambda) degrees conditioned
       to be >= 3 with even stub sum,
    2. every kernel edge replaced by a path of geometric length,
    3. an independent subcritical Poisson Galton-Watson tree hung on every
       vertex.

    Returns (graph, params).  Warns (via params) rather than failing when the
    kernel pairing could not be made simple; self-loop pairings are resampled.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    gen = stream.generator if hasattr(stream, "generator") else stream
    mu = conjugate_parameter(eps)
    Lambda = float(gen.normal(1.0 + eps - mu, math.sqrt(1.0 / (eps * n))))
    if Lambda <= 0:
        Lambda = 1.0 + eps - mu
    for _ in range(1000):
        degrees = gen.poisson(Lambda, size=n)
        kernel_deg = degrees[degrees >= 3]
        if kernel_deg.sum() % 2 == 0 and kernel_deg.size >= 2:
            break
    else:
        raise RuntimeError("could not draw an even kernel degree sequence")

    # configuration model on the kernel degrees
    stubs = np.repeat(np.arange(kernel_deg.size), kernel_deg)
    simple = False
    pairs = None
    for _ in range(simple_tries):
        gen.shuffle(stubs)
        cand = stubs.reshape(-1, 2)
        if np.any(cand[:, 0] == cand[:, 1]):
            continue
        lo = np.minimum(cand[:, 0], cand[:, 1])
        hi = np.maximum(cand[:, 0], cand[:, 1])
        pairs = np.stack([lo, hi], axis=1)
        if len(np.unique(lo * (kernel_deg.size + 1) + hi)) == len(lo):
            simple = True
            break
    if pairs is None:
        # accept multi-edges but keep resampling bare self-loops
        for _ in range(1000):
            gen.shuffle(stubs)
            cand = stubs.reshape(-1, 2)
            if not np.any(cand[:, 0] == cand[:, 1]):
                pairs = np.stack([np.minimum(cand[:, 0], cand[:, 1]),
                                  np.maximum(cand[:, 0], cand[:, 1])], axis=1)
                break
        else:
            raise RuntimeError("kernel pairing kept producing self-loops")

    edges = []
    next_vertex = kernel_deg.size
    if depth_cap is None:
        depth_cap = max(8, int(50 * math.log(max(n, 2))))

    # stage 2: geometric path replacement
    for (u, v) in pairs:
        length = int(gen.geometric(1.0 - mu))
        prev = int(u)
        for _ in range(length - 1):
            edges.append((prev, next_vertex))
            prev = next_vertex
            next_vertex += 1
        edges.append((prev, int(v)))

    # stage 3: subcritical Poisson trees on every current vertex
    core_count = next_vertex
    for v in range(core_count):
        frontier = [(v, 0)]
        while frontier:
            x, depth = frontier.pop()
            if depth >= depth_cap:
                raise RuntimeError("attached tree exceeded the depth cap")
            for _ in range(gen.poisson(mu)):
                edges.append((x, next_vertex))
                frontier.append((next_vertex, depth + 1))
                next_vertex += 1

    graph = MultiGraph(next_vertex, edges)
    params = ContiguousModelParams(n, eps, mu, Lambda, degrees, kernel_deg,
                                   simple, next_vertex)
    return graph, params


@dataclass(frozen=True)
class KernelWeightStats:
    samples: int
    quantiles: dict
    lower_bound_ok: int         # count with exp(-beta p1 M) <= w_hat
    sandwich_ok: int            # count with w_hat <= C log(n) exp(-beta p1 M)
    mean_path_length: float


def kernel_weight_law_stats(beta: float, p1: float, mu_star: float,
                            samples: int, stream, n: int = 10 ** 4,
                            C: float = 64.0) -> KernelWeightStats:
    """Sample the in-distribution form of a kernel edge weight: a geometric
    number of conductances exp(-beta p1 U) summed up, and check the sandwich
    around exp(-beta p1 min U)."""
    gen = stream.generator if hasattr(stream, "generator") else stream
    lengths = gen.geometric(1.0 - mu_star, size=samples)
    what = np.empty(samples)
    mins = np.empty(samples)
    for i, L in enumerate(lengths):
        u = gen.random(int(L))
        what[i] = np.exp(-beta * p1 * u).sum()
        mins[i] = u.min()
    lower = np.exp(-beta * p1 * mins)
    qs = {q: float(np.quantile(what, q)) for q in (0.1, 0.25, 0.5, 0.75, 0.9, 0.99)}
    lb_ok = int(np.sum(lower <= what * (1 + 1e-12)))
    sw_ok = int(np.sum(what <= C * math.log(max(n, 2)) * lower * (1 + 1e-12)))
    return KernelWeightStats(samples, qs, lb_ok, sw_ok, float(lengths.mean()))


# --------------------------------------------------------------------------
# restricted tree laws and excess
# --------------------------------------------------------------------------

def graph_excess(g: MultiGraph) -> int:
    """|E| - |V|; -1 for trees, 0 for unicyclic graphs."""
    return g.m - g.n


def largest_component_vertices(g: MultiGraph):
    census = connected_components(g)
    return census.vertices_of(0)


def tv_restricted_laws(g: MultiGraph, env: Environment, beta: float,
                       p0: float, p1: float, cap: int = 10 ** 5):
    """Total variation between the two laws of the minimal subtree over the
    largest p0-open cluster: under the tree law on all of G versus under the
    tree law on the largest p1-open cluster.

    Requires the p0-cluster to be contained in the p1-cluster.  Returns
    (tv, bound) with bound = n^4 exp(-beta (F^-1(p1) - F^-1(p0))).
    """
    if not (0 <= p0 <= p1 <= 1):
        raise ValueError("need 0 <= p0 <= p1 <= 1")
    law = env.law
    if law is None:
        raise ValueError("environment must carry its law")
    t0 = float(inverse_cdf(law, p0))
    t1 = float(inverse_cdf(law, p1))
    open0 = MultiGraph(g.n, [g.endpoints[e] for e in range(g.m)
                             if env.omega[e] <= t0])
    open1_ids = [e for e in range(g.m) if env.omega[e] <= t1]
    open1 = MultiGraph(g.n, [g.endpoints[e] for e in open1_ids])
    cluster0 = set(largest_component_vertices(open0))
    cluster1 = set(largest_component_vertices(open1))
    if not cluster0 <= cluster1:
        raise ValueError("largest p0-cluster not inside the largest p1-cluster")

    wg = WeightedGraphView(g, env.omega, beta)
    law_full = exact_tree_law(wg, cap)
    table1 = {}
    for t, p in zip(law_full.trees, law_full.probs):
        key = frozenset(restricted_subtree(SpanningTree(g, t), cluster0).edges)
        table1[key] = table1.get(key, 0.0) + float(p)

    sub, vmap, kept = subgraph_on_vertices(g, sorted(cluster1))
    keep_ids = [e for e in kept]    # original ids of the induced edges
    sub_env = WeightedGraphView(sub, env.omega[keep_ids], beta)
    if not sub.is_connected():
        raise GraphError("largest p1-cluster induces a disconnected subgraph")
    law_sub = exact_tree_law(sub_env, cap)
    cluster0_sub = sorted(vmap[v] for v in cluster0)
    table2 = {}
    for t, p in zip(law_sub.trees, law_sub.probs):
        rt = restricted_subtree(SpanningTree(sub, t), cluster0_sub)
        key = frozenset(keep_ids[e] for e in rt.edges)
        table2[key] = table2.get(key, 0.0) + float(p)

    keys = set(table1) | set(table2)
    tv = 0.5 * sum(abs(table1.get(k, 0.0) - table2.get(k, 0.0)) for k in keys)
    bound = g.n ** 4 * math.exp(-min(beta * (t1 - t0), 700.0))
    return tv, bound


def subcritical_cluster_bound(s: float, n: int, k: float = 1.0) -> float:
    """Size bound C k log n for the largest cluster of percolation at
    (1-s)/(degree-1) on a bounded-degree graph, with the constant taken from
    the large-deviation rate I(1-s) = -s - log(1-s)."""
    if not (0 < s <= 1):
        raise ValueError("need 0 < s <= 1")
    rate = (1.0 - s) - 1.0 - math.log(1.0 - s) if s < 1 else math.inf
    if not math.isfinite(rate) or rate <= 0:
        return 2.0 * k * math.log(max(n, 2))
    return 2.0 * (k + 2.0) / rate * math.log(max(n, 2))
